//! Beaver multiplication triples: dealer generation, per-party share files,
//! and the pool the shared backend draws from.
//!
//! Triple file layout: u64 LE count header, then three packed bit sections
//! (`a`, `b`, `c` shares in order), each `ceil(count/8)` bytes.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{pack_bits, unpack_bits, BackendError};
use crate::transport::Role;

/// One party's shares of a batch of triples, packed 64 per word.
struct TripleBlock {
    a: u64,
    b: u64,
    c: u64,
}

/// Where a party's triples come from. A seeded dealer refills forever (both
/// parties derive correlated shares from the common dealer seed); a
/// fixed pool errors on exhaustion.
pub enum TripleSource {
    Dealer {
        rng: Box<ChaCha20Rng>,
        role: Role,
    },
    Pool {
        a: Vec<bool>,
        b: Vec<bool>,
        c: Vec<bool>,
        cursor: usize,
    },
}

/// One party's (a, b, c) share vectors.
pub type TripleShares = (Vec<bool>, Vec<bool>, Vec<bool>);

impl TripleSource {
    pub fn dealer(seed: [u8; 32], role: Role) -> Self {
        TripleSource::Dealer {
            rng: Box::new(ChaCha20Rng::from_seed(seed)),
            role,
        }
    }

    pub fn pool(a: Vec<bool>, b: Vec<bool>, c: Vec<bool>) -> Self {
        assert!(a.len() == b.len() && b.len() == c.len());
        TripleSource::Pool { a, b, c, cursor: 0 }
    }

    fn next_block(rng: &mut ChaCha20Rng, role: Role) -> TripleBlock {
        let a: u64 = rng.gen();
        let b: u64 = rng.gen();
        let c = a & b;
        let a0: u64 = rng.gen();
        let b0: u64 = rng.gen();
        let c0: u64 = rng.gen();
        match role {
            Role::Vendor => TripleBlock {
                a: a0,
                b: b0,
                c: c0,
            },
            Role::User => TripleBlock {
                a: a ^ a0,
                b: b ^ b0,
                c: c ^ c0,
            },
        }
    }

    /// Takes `count` triples as three share bit-vectors.
    pub fn take(&mut self, count: usize) -> Result<TripleShares, BackendError> {
        match self {
            TripleSource::Dealer { rng, role } => {
                let mut a = Vec::with_capacity(count);
                let mut b = Vec::with_capacity(count);
                let mut c = Vec::with_capacity(count);
                while a.len() < count {
                    let block = Self::next_block(rng, *role);
                    let take = (count - a.len()).min(64);
                    for k in 0..take {
                        a.push((block.a >> k) & 1 == 1);
                        b.push((block.b >> k) & 1 == 1);
                        c.push((block.c >> k) & 1 == 1);
                    }
                }
                Ok((a, b, c))
            }
            TripleSource::Pool { a, b, c, cursor } => {
                if *cursor + count > a.len() {
                    return Err(BackendError::TriplesExhausted);
                }
                let range = *cursor..*cursor + count;
                *cursor += count;
                Ok((
                    a[range.clone()].to_vec(),
                    b[range.clone()].to_vec(),
                    c[range].to_vec(),
                ))
            }
        }
    }
}

/// Writes one party's triple shares in the file format above.
pub fn write_triple_file<W: Write>(
    out: &mut W,
    a: &[bool],
    b: &[bool],
    c: &[bool],
) -> io::Result<()> {
    assert!(a.len() == b.len() && b.len() == c.len());
    out.write_all(&(a.len() as u64).to_le_bytes())?;
    out.write_all(&pack_bits(a))?;
    out.write_all(&pack_bits(b))?;
    out.write_all(&pack_bits(c))?;
    Ok(())
}

pub fn read_triple_file<R: Read>(input: &mut R) -> io::Result<TripleSource> {
    let mut head = [0u8; 8];
    input.read_exact(&mut head)?;
    let count = u64::from_le_bytes(head) as usize;
    let section = count.div_ceil(8);
    let mut buf = vec![0u8; section];
    input.read_exact(&mut buf)?;
    let a = unpack_bits(&buf, count);
    input.read_exact(&mut buf)?;
    let b = unpack_bits(&buf, count);
    input.read_exact(&mut buf)?;
    let c = unpack_bits(&buf, count);
    Ok(TripleSource::pool(a, b, c))
}

/// Dealer generation: produces both parties' correlated share files.
pub fn generate_triple_files<R: Rng>(rng: &mut R, count: usize) -> (Vec<u8>, Vec<u8>) {
    let mut shares = [
        (Vec::new(), Vec::new(), Vec::new()),
        (Vec::new(), Vec::new(), Vec::new()),
    ];
    for _ in 0..count {
        let a: bool = rng.gen();
        let b: bool = rng.gen();
        let c = a & b;
        let a0: bool = rng.gen();
        let b0: bool = rng.gen();
        let c0: bool = rng.gen();
        shares[0].0.push(a0);
        shares[0].1.push(b0);
        shares[0].2.push(c0);
        shares[1].0.push(a ^ a0);
        shares[1].1.push(b ^ b0);
        shares[1].2.push(c ^ c0);
    }
    let mut out = (Vec::new(), Vec::new());
    write_triple_file(&mut out.0, &shares[0].0, &shares[0].1, &shares[0].2).unwrap();
    write_triple_file(&mut out.1, &shares[1].0, &shares[1].1, &shares[1].2).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;

    #[test]
    fn dealer_shares_reconstruct_valid_triples() {
        let seed = [9u8; 32];
        let mut vendor = TripleSource::dealer(seed, Role::Vendor);
        let mut user = TripleSource::dealer(seed, Role::User);
        let (va, vb, vc) = vendor.take(200).unwrap();
        let (ua, ub, uc) = user.take(200).unwrap();
        for i in 0..200 {
            let a = va[i] ^ ua[i];
            let b = vb[i] ^ ub[i];
            let c = vc[i] ^ uc[i];
            assert_eq!(c, a & b, "triple {i}");
        }
    }

    #[test]
    fn pool_exhaustion_errors() {
        let mut pool = TripleSource::pool(vec![false; 4], vec![false; 4], vec![false; 4]);
        assert!(pool.take(3).is_ok());
        assert!(matches!(pool.take(2), Err(BackendError::TriplesExhausted)));
    }

    #[test]
    fn triple_files_round_trip_and_correlate() {
        let mut rng = StdRng::seed_from_u64(3);
        let (file_v, file_u) = generate_triple_files(&mut rng, 100);
        let mut v = read_triple_file(&mut file_v.as_slice()).unwrap();
        let mut u = read_triple_file(&mut file_u.as_slice()).unwrap();
        let (va, vb, vc) = v.take(100).unwrap();
        let (ua, ub, uc) = u.take(100).unwrap();
        for i in 0..100 {
            assert_eq!(vc[i] ^ uc[i], (va[i] ^ ua[i]) & (vb[i] ^ ub[i]));
        }
    }
}
