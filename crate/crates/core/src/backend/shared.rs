//! Two-party XOR-sharing backend over a frame channel. AND gates consume
//! dealer triples and cost one message exchange each way per batch; XOR and
//! NOT are local. Every message carries a sequence number so a desynced
//! session fails fast instead of computing garbage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{
    pack_bits, unpack_bits, Backend, BackendError, GateStats, SharedBit, TraceEvent, TripleSource,
};
use crate::transport::{FrameChannel, FrameType, Role};

pub struct SharedBackend<C: FrameChannel> {
    channel: C,
    role: Role,
    rng: ChaCha20Rng,
    triples: TripleSource,
    seq: u64,
    stats: GateStats,
    tracing: bool,
    trace: Vec<TraceEvent>,
}

impl<C: FrameChannel> SharedBackend<C> {
    pub fn new(channel: C, role: Role, rng_seed: [u8; 32], triples: TripleSource) -> Self {
        SharedBackend {
            channel,
            role,
            rng: ChaCha20Rng::from_seed(rng_seed),
            triples,
            seq: 0,
            stats: GateStats::default(),
            tracing: false,
            trace: Vec::new(),
        }
    }

    pub fn into_channel(self) -> C {
        self.channel
    }

    pub fn channel_mut(&mut self) -> &mut C {
        &mut self.channel
    }

    fn next_seq(&mut self) -> u64 {
        let s = self.seq;
        self.seq += 1;
        s
    }

    fn send_bits(&mut self, ty: FrameType, seq: u64, bits: &[bool]) -> Result<(), BackendError> {
        let mut payload = Vec::with_capacity(12 + bits.len().div_ceil(8));
        payload.extend_from_slice(&seq.to_le_bytes());
        payload.extend_from_slice(&(bits.len() as u32).to_le_bytes());
        payload.extend_from_slice(&pack_bits(bits));
        self.channel.send_frame(ty, &payload)?;
        Ok(())
    }

    fn recv_bits(
        &mut self,
        ty: FrameType,
        seq: u64,
        len: usize,
    ) -> Result<Vec<bool>, BackendError> {
        let payload = self.channel.expect_frame(ty)?;
        if payload.len() < 12 {
            return Err(BackendError::Transport(
                crate::transport::TransportError::Truncated,
            ));
        }
        let got_seq = u64::from_le_bytes(payload[0..8].try_into().unwrap());
        if got_seq != seq {
            return Err(BackendError::SeqMismatch {
                expected: seq,
                got: got_seq,
            });
        }
        let got_len = u32::from_le_bytes(payload[8..12].try_into().unwrap()) as usize;
        if got_len != len || payload.len() != 12 + len.div_ceil(8) {
            return Err(BackendError::LengthMismatch {
                expected: len,
                got: got_len,
            });
        }
        Ok(unpack_bits(&payload[12..], len))
    }

    /// Opens share vectors: vendor sends first, user answers.
    fn exchange(&mut self, ty: FrameType, ours: &[bool]) -> Result<Vec<bool>, BackendError> {
        let seq = self.next_seq();
        let theirs = match self.role {
            Role::Vendor => {
                self.send_bits(ty, seq, ours)?;
                self.recv_bits(ty, seq, ours.len())?
            }
            Role::User => {
                let theirs = self.recv_bits(ty, seq, ours.len())?;
                self.send_bits(ty, seq, ours)?;
                theirs
            }
        };
        Ok(theirs)
    }
}

impl<C: FrameChannel> Backend for SharedBackend<C> {
    fn role(&self) -> Role {
        self.role
    }

    fn constant(&mut self, value: bool) -> SharedBit {
        // The vendor's share carries public constants.
        SharedBit(value && self.role == Role::Vendor)
    }

    fn share_bits(
        &mut self,
        owner: Role,
        bits: Option<&[bool]>,
        len: usize,
    ) -> Result<Vec<SharedBit>, BackendError> {
        if self.tracing {
            self.trace.push(TraceEvent::Share(len));
        }
        let seq = self.next_seq();
        if owner == self.role {
            let bits = bits.ok_or(BackendError::ShareInput("owner must supply input bits"))?;
            if bits.len() != len {
                return Err(BackendError::LengthMismatch {
                    expected: len,
                    got: bits.len(),
                });
            }
            let mask: Vec<bool> = (0..len).map(|_| self.rng.gen()).collect();
            self.send_bits(FrameType::Share, seq, &mask)?;
            Ok(bits
                .iter()
                .zip(&mask)
                .map(|(&b, &r)| SharedBit(b ^ r))
                .collect())
        } else {
            if bits.is_some() {
                return Err(BackendError::ShareInput(
                    "only the owner supplies input bits",
                ));
            }
            let mask = self.recv_bits(FrameType::Share, seq, len)?;
            Ok(mask.into_iter().map(SharedBit).collect())
        }
    }

    fn reveal_bits(&mut self, bits: &[SharedBit]) -> Result<Vec<bool>, BackendError> {
        self.stats.reveal_count += bits.len() as u64;
        if self.tracing {
            self.trace.push(TraceEvent::RevealBatch(bits.len()));
        }
        let ours: Vec<bool> = bits.iter().map(|b| b.0).collect();
        let theirs = self.exchange(FrameType::Reveal, &ours)?;
        Ok(ours.iter().zip(&theirs).map(|(&a, &b)| a ^ b).collect())
    }

    fn and_pairs(
        &mut self,
        pairs: &[(SharedBit, SharedBit)],
    ) -> Result<Vec<SharedBit>, BackendError> {
        let k = pairs.len();
        self.stats.and_count += k as u64;
        if self.tracing {
            self.trace.push(TraceEvent::AndBatch(k));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let (ta, tb, tc) = self.triples.take(k)?;
        // Open d = x ^ a and e = y ^ b in one combined exchange.
        let mut opening = Vec::with_capacity(2 * k);
        for (i, &(x, y)) in pairs.iter().enumerate() {
            opening.push(x.0 ^ ta[i]);
            opening.push(y.0 ^ tb[i]);
        }
        let theirs = self.exchange(FrameType::Triple, &opening)?;
        let lead = self.role == Role::Vendor;
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let d = opening[2 * i] ^ theirs[2 * i];
            let e = opening[2 * i + 1] ^ theirs[2 * i + 1];
            let mut z = tc[i] ^ (d & tb[i]) ^ (e & ta[i]);
            if lead {
                z ^= d & e;
            }
            out.push(SharedBit(z));
        }
        Ok(out)
    }

    fn xor(&mut self, a: SharedBit, b: SharedBit) -> SharedBit {
        self.stats.xor_count += 1;
        SharedBit(a.0 ^ b.0)
    }

    fn not(&mut self, a: SharedBit) -> SharedBit {
        match self.role {
            Role::Vendor => SharedBit(!a.0),
            Role::User => a,
        }
    }

    fn stats(&self) -> GateStats {
        self.stats
    }

    fn set_tracing(&mut self, enabled: bool) {
        self.tracing = enabled;
    }

    fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::DuplexChannel;

    /// Runs one closure per party over a connected in-process pair.
    pub(crate) fn run_pair<T: Send + 'static>(
        f: impl FnOnce(&mut SharedBackend<DuplexChannel>) -> T + Send + 'static,
        g: impl FnOnce(&mut SharedBackend<DuplexChannel>) -> T + Send + 'static,
    ) -> (T, T) {
        let (ca, cb) = DuplexChannel::pair();
        let seed = [42u8; 32];
        let vendor = std::thread::spawn(move || {
            let mut b = SharedBackend::new(
                ca,
                Role::Vendor,
                [1u8; 32],
                TripleSource::dealer(seed, Role::Vendor),
            );
            f(&mut b)
        });
        let user = std::thread::spawn(move || {
            let mut b = SharedBackend::new(
                cb,
                Role::User,
                [2u8; 32],
                TripleSource::dealer(seed, Role::User),
            );
            g(&mut b)
        });
        (vendor.join().unwrap(), user.join().unwrap())
    }

    #[test]
    fn share_then_reveal_round_trip() {
        let (v, u) = run_pair(
            |b| {
                let s = b.share_bit(Role::Vendor, Some(true)).unwrap();
                b.reveal(s).unwrap()
            },
            |b| {
                let s = b.share_bit(Role::Vendor, None).unwrap();
                b.reveal(s).unwrap()
            },
        );
        assert!(v && u);
    }

    #[test]
    fn xor_with_fresh_mask_cancels() {
        let (v, u) = run_pair(
            |b| {
                let s = b.share_bit(Role::User, None).unwrap();
                let r = b.share_bit(Role::Vendor, Some(true)).unwrap();
                let masked = b.xor(s, r);
                let unmasked = b.xor(masked, r);
                b.reveal(unmasked).unwrap()
            },
            |b| {
                let s = b.share_bit(Role::User, Some(true)).unwrap();
                let r = b.share_bit(Role::Vendor, None).unwrap();
                let masked = b.xor(s, r);
                let unmasked = b.xor(masked, r);
                b.reveal(unmasked).unwrap()
            },
        );
        assert!(v && u);
    }

    #[test]
    fn ten_thousand_random_bits_reconstruct_exactly() {
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let bits: Vec<bool> = {
            let mut rng = StdRng::seed_from_u64(5);
            (0..10_000).map(|_| rng.gen()).collect()
        };
        let expected = bits.clone();
        let (v, u) = run_pair(
            move |b| {
                let shares = b.share_bits(Role::Vendor, Some(&bits), 10_000).unwrap();
                b.reveal_bits(&shares).unwrap()
            },
            |b| {
                let shares = b.share_bits(Role::Vendor, None, 10_000).unwrap();
                b.reveal_bits(&shares).unwrap()
            },
        );
        assert_eq!(v, expected);
        assert_eq!(u, expected);
    }

    #[test]
    fn sequence_desync_is_detected() {
        use crate::transport::FrameChannel;
        let (mut ca, cb) = DuplexChannel::pair();
        // Hand-craft a share frame with the wrong sequence number.
        let mut payload = Vec::new();
        payload.extend_from_slice(&7u64.to_le_bytes());
        payload.extend_from_slice(&1u32.to_le_bytes());
        payload.push(0);
        ca.send_frame(crate::transport::FrameType::Share, &payload)
            .unwrap();
        let mut backend = SharedBackend::new(
            cb,
            Role::User,
            [0u8; 32],
            TripleSource::dealer([0u8; 32], Role::User),
        );
        let res = backend.share_bits(Role::Vendor, None, 1);
        assert!(matches!(
            res,
            Err(BackendError::SeqMismatch {
                expected: 0,
                got: 7
            })
        ));
    }

    #[test]
    fn and_gate_truth_table_under_sharing() {
        for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
            let (v, u) = run_pair(
                move |b| {
                    let sx = b.share_bit(Role::Vendor, Some(x)).unwrap();
                    let sy = b.share_bit(Role::User, None).unwrap();
                    let z = b.and(sx, sy).unwrap();
                    b.reveal(z).unwrap()
                },
                move |b| {
                    let sx = b.share_bit(Role::Vendor, None).unwrap();
                    let sy = b.share_bit(Role::User, Some(y)).unwrap();
                    let z = b.and(sx, sy).unwrap();
                    b.reveal(z).unwrap()
                },
            );
            assert_eq!(v, x & y);
            assert_eq!(u, x & y);
        }
    }

    #[test]
    fn random_circuits_match_plaintext_evaluation() {
        // Three-gate random circuits over up to three inputs, checked across
        // every input assignment against the cleartext backend.
        use crate::backend::CleartextBackend;
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..20 {
            // A gate is (op, lhs, rhs) over the growing wire list.
            let gates: Vec<(u8, usize, usize)> = (0..3)
                .map(|g| {
                    let max = 3 + g;
                    (
                        rng.gen_range(0..3u8),
                        rng.gen_range(0..max),
                        rng.gen_range(0..max),
                    )
                })
                .collect();
            for assignment in 0..8u8 {
                let inputs: Vec<bool> = (0..3).map(|i| (assignment >> i) & 1 == 1).collect();
                let run = |b: &mut dyn Backend, inputs: &[SharedBit]| -> SharedBit {
                    let mut wires = inputs.to_vec();
                    for &(op, l, r) in &gates {
                        let out = match op {
                            0 => b.and(wires[l], wires[r]).unwrap(),
                            1 => b.xor(wires[l], wires[r]),
                            _ => b.or(wires[l], wires[r]).unwrap(),
                        };
                        wires.push(out);
                    }
                    *wires.last().unwrap()
                };
                let mut clear = CleartextBackend::new();
                let clear_in = clear.share_bits(Role::Vendor, Some(&inputs), 3).unwrap();
                let expected = {
                    let out = run(&mut clear, &clear_in);
                    clear.reveal(out).unwrap()
                };
                let gates_v = gates.clone();
                let gates_u = gates.clone();
                let inputs_v = inputs.clone();
                let (v, u) = run_pair(
                    move |b| {
                        let shares = b.share_bits(Role::Vendor, Some(&inputs_v), 3).unwrap();
                        let mut wires = shares;
                        for &(op, l, r) in &gates_v {
                            let out = match op {
                                0 => b.and(wires[l], wires[r]).unwrap(),
                                1 => b.xor(wires[l], wires[r]),
                                _ => b.or(wires[l], wires[r]).unwrap(),
                            };
                            wires.push(out);
                        }
                        let last = *wires.last().unwrap();
                        b.reveal(last).unwrap()
                    },
                    move |b| {
                        let shares = b.share_bits(Role::Vendor, None, 3).unwrap();
                        let mut wires = shares;
                        for &(op, l, r) in &gates_u {
                            let out = match op {
                                0 => b.and(wires[l], wires[r]).unwrap(),
                                1 => b.xor(wires[l], wires[r]),
                                _ => b.or(wires[l], wires[r]).unwrap(),
                            };
                            wires.push(out);
                        }
                        let last = *wires.last().unwrap();
                        b.reveal(last).unwrap()
                    },
                );
                assert_eq!(v, expected);
                assert_eq!(u, expected);
            }
        }
    }
}
