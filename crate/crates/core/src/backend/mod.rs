//! The two-party boolean computation substrate: XOR-shared bits, gate
//! evaluation with cost accounting, and the obliviousness contract the
//! solver relies on.
//!
//! Two interchangeable realizations are provided: a cleartext backend for
//! oracle testing, and a dealer-assisted XOR-sharing backend where AND gates
//! consume Beaver multiplication triples and cost one message exchange.
//! Cost accounting reports the garbled-circuit communication model of 32
//! bytes per AND gate in both.

use thiserror::Error;

use crate::transport::{Role, TransportError};

mod circuits;
mod cleartext;
mod shared;
mod triples;

pub use circuits::{
    add_vecs, and_reduce, and_reduce_groups, and_vec, argmax_first, eq_vec, exactly_one_groups,
    index_bits, leftmost_hit, mux_vec, oblivious_max_index, or_reduce_groups, or_vec, popcount,
    to_bits_const,
};
pub use cleartext::CleartextBackend;
pub use shared::SharedBackend;
pub use triples::{generate_triple_files, read_triple_file, write_triple_file, TripleSource};

/// Bytes of garbled-circuit traffic attributed to one AND gate.
pub const BYTES_PER_AND: u64 = 32;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("multiplication triple pool exhausted")]
    TriplesExhausted,
    #[error("session desync: expected message sequence {expected}, got {got}")]
    SeqMismatch { expected: u64, got: u64 },
    #[error("message length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("share owner mismatch: {0}")]
    ShareInput(&'static str),
    #[error("oblivious selection over an empty list")]
    EmptySelection,
    #[error("operand bit widths differ")]
    WidthMismatch,
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// One party's XOR share of a secret bit. Reconstruction is the XOR of the
/// two parties' shares; under the cleartext backend the share is the bit.
#[derive(Clone, Copy, Debug)]
pub struct SharedBit(pub(crate) bool);

/// Monotone per-session gate and message counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GateStats {
    pub and_count: u64,
    pub xor_count: u64,
    pub reveal_count: u64,
}

impl GateStats {
    /// Estimated communication under the 32-bytes-per-AND model.
    pub fn estimated_bytes(&self) -> u64 {
        BYTES_PER_AND * self.and_count
    }
}

/// A recorded backend operation, used to assert that execution traces depend
/// only on public parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Share(usize),
    AndBatch(usize),
    RevealBatch(usize),
}

pub trait Backend {
    fn role(&self) -> Role;

    /// A public constant embedded as a share pair reconstructing to `value`.
    fn constant(&mut self, value: bool) -> SharedBit;

    /// Shares `len` input bits held by `owner`. The owner passes
    /// `Some(bits)`, the other party `None`.
    fn share_bits(
        &mut self,
        owner: Role,
        bits: Option<&[bool]>,
        len: usize,
    ) -> Result<Vec<SharedBit>, BackendError>;

    /// Opens shared bits to both parties. The vendor sends its shares first.
    fn reveal_bits(&mut self, bits: &[SharedBit]) -> Result<Vec<bool>, BackendError>;

    /// Evaluates a batch of AND gates in one message exchange.
    fn and_pairs(
        &mut self,
        pairs: &[(SharedBit, SharedBit)],
    ) -> Result<Vec<SharedBit>, BackendError>;

    /// XOR is local on shares.
    fn xor(&mut self, a: SharedBit, b: SharedBit) -> SharedBit;

    /// NOT is local: the vendor flips its share.
    fn not(&mut self, a: SharedBit) -> SharedBit;

    fn stats(&self) -> GateStats;

    /// Enables or disables trace recording.
    fn set_tracing(&mut self, enabled: bool);

    /// Drains the recorded operation trace.
    fn take_trace(&mut self) -> Vec<TraceEvent>;

    fn share_bit(&mut self, owner: Role, bit: Option<bool>) -> Result<SharedBit, BackendError> {
        let bits_storage;
        let bits = match bit {
            Some(b) => {
                bits_storage = [b];
                Some(&bits_storage[..])
            }
            None => None,
        };
        Ok(self.share_bits(owner, bits, 1)?[0])
    }

    fn reveal(&mut self, bit: SharedBit) -> Result<bool, BackendError> {
        Ok(self.reveal_bits(&[bit])?[0])
    }

    fn and(&mut self, a: SharedBit, b: SharedBit) -> Result<SharedBit, BackendError> {
        Ok(self.and_pairs(&[(a, b)])?[0])
    }

    fn or(&mut self, a: SharedBit, b: SharedBit) -> Result<SharedBit, BackendError> {
        let na = self.not(a);
        let nb = self.not(b);
        let both = self.and(na, nb)?;
        Ok(self.not(both))
    }

    /// Multiplexer `sel ? t : f`, costing exactly one AND gate.
    fn mux(
        &mut self,
        sel: SharedBit,
        t: SharedBit,
        f: SharedBit,
    ) -> Result<SharedBit, BackendError> {
        let d = self.xor(t, f);
        let sd = self.and(sel, d)?;
        Ok(self.xor(f, sd))
    }
}

pub(crate) fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub(crate) fn unpack_bits(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len)
        .map(|i| (bytes[i / 8] >> (i % 8)) & 1 == 1)
        .collect()
}
