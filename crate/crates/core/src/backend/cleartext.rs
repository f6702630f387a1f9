//! Plaintext backend with the same interface and cost accounting as the
//! shared backend, for oracle testing and fast single-process runs.

use super::{Backend, BackendError, GateStats, SharedBit, TraceEvent};
use crate::transport::Role;

pub struct CleartextBackend {
    role: Role,
    stats: GateStats,
    tracing: bool,
    trace: Vec<TraceEvent>,
}

impl CleartextBackend {
    pub fn new() -> Self {
        CleartextBackend {
            role: Role::Vendor,
            stats: GateStats::default(),
            tracing: false,
            trace: Vec::new(),
        }
    }
}

impl Default for CleartextBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for CleartextBackend {
    fn role(&self) -> Role {
        self.role
    }

    fn constant(&mut self, value: bool) -> SharedBit {
        SharedBit(value)
    }

    fn share_bits(
        &mut self,
        _owner: Role,
        bits: Option<&[bool]>,
        len: usize,
    ) -> Result<Vec<SharedBit>, BackendError> {
        let bits = bits.ok_or(BackendError::ShareInput(
            "cleartext backend needs the plaintext input",
        ))?;
        if bits.len() != len {
            return Err(BackendError::LengthMismatch {
                expected: len,
                got: bits.len(),
            });
        }
        if self.tracing {
            self.trace.push(TraceEvent::Share(len));
        }
        Ok(bits.iter().map(|&b| SharedBit(b)).collect())
    }

    fn reveal_bits(&mut self, bits: &[SharedBit]) -> Result<Vec<bool>, BackendError> {
        self.stats.reveal_count += bits.len() as u64;
        if self.tracing {
            self.trace.push(TraceEvent::RevealBatch(bits.len()));
        }
        Ok(bits.iter().map(|b| b.0).collect())
    }

    fn and_pairs(
        &mut self,
        pairs: &[(SharedBit, SharedBit)],
    ) -> Result<Vec<SharedBit>, BackendError> {
        self.stats.and_count += pairs.len() as u64;
        if self.tracing {
            self.trace.push(TraceEvent::AndBatch(pairs.len()));
        }
        Ok(pairs.iter().map(|&(a, b)| SharedBit(a.0 & b.0)).collect())
    }

    fn xor(&mut self, a: SharedBit, b: SharedBit) -> SharedBit {
        self.stats.xor_count += 1;
        SharedBit(a.0 ^ b.0)
    }

    fn not(&mut self, a: SharedBit) -> SharedBit {
        SharedBit(!a.0)
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

    #[test]
    fn gate_truth_tables() {
        let mut b = CleartextBackend::new();
        for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
            let sx = b.constant(x);
            let sy = b.constant(y);
            assert_eq!(b.and(sx, sy).unwrap().0, x & y);
            assert_eq!(b.or(sx, sy).unwrap().0, x | y);
            assert_eq!(b.xor(sx, sy).0, x ^ y);
        }
        assert_eq!(b.stats().and_count, 8);
    }

    #[test]
    fn mux_selects_for_all_inputs() {
        let mut b = CleartextBackend::new();
        for sel in [false, true] {
            for t in [false, true] {
                for f in [false, true] {
                    let before = b.stats().and_count;
                    let (s, st, sf) = (b.constant(sel), b.constant(t), b.constant(f));
                    let out = b.mux(s, st, sf).unwrap();
                    assert_eq!(out.0, if sel { t } else { f });
                    assert_eq!(b.stats().and_count, before + 1, "mux costs exactly one AND");
                }
            }
        }
    }
}
