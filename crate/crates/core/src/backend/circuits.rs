//! Batched oblivious circuit combinators. Every function evaluates a fixed
//! gate schedule for a given input shape, so gate counts and message sizes
//! depend only on public dimensions, never on share values. Reductions are
//! level-synchronous trees: one AND batch per level across all groups.

use super::{Backend, BackendError, SharedBit};

/// Bits needed to encode indices `0..len`.
pub fn index_bits(len: usize) -> usize {
    if len <= 1 {
        1
    } else {
        (usize::BITS - (len - 1).leading_zeros()) as usize
    }
}

/// A public constant as a little-endian shared bit vector.
pub fn to_bits_const<B: Backend + ?Sized>(b: &mut B, value: u64, width: usize) -> Vec<SharedBit> {
    (0..width)
        .map(|k| b.constant((value >> k) & 1 == 1))
        .collect()
}

/// Elementwise AND of two equal-length vectors in one batch.
pub fn and_vec<B: Backend + ?Sized>(
    b: &mut B,
    xs: &[SharedBit],
    ys: &[SharedBit],
) -> Result<Vec<SharedBit>, BackendError> {
    if xs.len() != ys.len() {
        return Err(BackendError::WidthMismatch);
    }
    b.and_pairs(
        &xs.iter()
            .copied()
            .zip(ys.iter().copied())
            .collect::<Vec<_>>(),
    )
}

/// Elementwise OR in one batch.
pub fn or_vec<B: Backend + ?Sized>(
    b: &mut B,
    xs: &[SharedBit],
    ys: &[SharedBit],
) -> Result<Vec<SharedBit>, BackendError> {
    if xs.len() != ys.len() {
        return Err(BackendError::WidthMismatch);
    }
    let pairs: Vec<_> = xs
        .iter()
        .zip(ys.iter())
        .map(|(&x, &y)| (b.not(x), b.not(y)))
        .collect();
    let nand = b.and_pairs(&pairs)?;
    Ok(nand.into_iter().map(|z| b.not(z)).collect())
}

/// Per-element multiplexer with a single selector: `sel ? t[i] : f[i]`.
pub fn mux_vec<B: Backend + ?Sized>(
    b: &mut B,
    sel: SharedBit,
    t: &[SharedBit],
    f: &[SharedBit],
) -> Result<Vec<SharedBit>, BackendError> {
    if t.len() != f.len() {
        return Err(BackendError::WidthMismatch);
    }
    let diffs: Vec<_> = t
        .iter()
        .zip(f.iter())
        .map(|(&x, &y)| (sel, b.xor(x, y)))
        .collect();
    let gated = b.and_pairs(&diffs)?;
    Ok(gated
        .into_iter()
        .zip(f.iter())
        .map(|(g, &y)| b.xor(g, y))
        .collect())
}

enum ReduceOp {
    Or,
    And,
}

fn reduce_groups<B: Backend + ?Sized>(
    b: &mut B,
    groups: &[Vec<SharedBit>],
    op: ReduceOp,
) -> Result<Vec<SharedBit>, BackendError> {
    // Callers pre-fill empty groups with the identity element.
    let mut layers: Vec<Vec<SharedBit>> = groups.to_vec();
    loop {
        if layers.iter().all(|g| g.len() == 1) {
            return Ok(layers.into_iter().map(|g| g[0]).collect());
        }
        let mut pairs = Vec::new();
        for g in &layers {
            for chunk in g.chunks(2) {
                if chunk.len() == 2 {
                    match op {
                        ReduceOp::Or => pairs.push((b.not(chunk[0]), b.not(chunk[1]))),
                        ReduceOp::And => pairs.push((chunk[0], chunk[1])),
                    }
                }
            }
        }
        let results = b.and_pairs(&pairs)?;
        let mut cursor = 0;
        for g in layers.iter_mut() {
            let mut next = Vec::with_capacity(g.len().div_ceil(2));
            for chunk in g.chunks(2) {
                if chunk.len() == 2 {
                    let r = results[cursor];
                    cursor += 1;
                    next.push(match op {
                        ReduceOp::Or => b.not(r),
                        ReduceOp::And => r,
                    });
                } else {
                    next.push(chunk[0]);
                }
            }
            *g = next;
        }
    }
}

/// OR over each group. Empty groups yield constant false.
pub fn or_reduce_groups<B: Backend + ?Sized>(
    b: &mut B,
    groups: &[Vec<SharedBit>],
) -> Result<Vec<SharedBit>, BackendError> {
    let filled: Vec<Vec<SharedBit>> = groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                vec![b.constant(false)]
            } else {
                g.clone()
            }
        })
        .collect();
    reduce_groups(b, &filled, ReduceOp::Or)
}

/// AND over each group. Empty groups yield constant true.
pub fn and_reduce_groups<B: Backend + ?Sized>(
    b: &mut B,
    groups: &[Vec<SharedBit>],
) -> Result<Vec<SharedBit>, BackendError> {
    let filled: Vec<Vec<SharedBit>> = groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                vec![b.constant(true)]
            } else {
                g.clone()
            }
        })
        .collect();
    reduce_groups(b, &filled, ReduceOp::And)
}

pub fn and_reduce<B: Backend + ?Sized>(
    b: &mut B,
    bits: &[SharedBit],
) -> Result<SharedBit, BackendError> {
    Ok(and_reduce_groups(b, &[bits.to_vec()])?[0])
}

/// Per group: flags for "no bit set" and "exactly one bit set", via a
/// (zero, one) monoid tree costing three ANDs per combine.
pub fn exactly_one_groups<B: Backend + ?Sized>(
    b: &mut B,
    groups: &[Vec<SharedBit>],
) -> Result<(Vec<SharedBit>, Vec<SharedBit>), BackendError> {
    let mut layers: Vec<Vec<(SharedBit, SharedBit)>> = groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                let t = b.constant(true);
                let f = b.constant(false);
                vec![(t, f)]
            } else {
                g.iter().map(|&x| (b.not(x), x)).collect()
            }
        })
        .collect();
    while layers.iter().any(|g| g.len() > 1) {
        let mut pairs = Vec::new();
        for g in &layers {
            for chunk in g.chunks(2) {
                if let [(z1, o1), (z2, o2)] = *chunk {
                    pairs.push((z1, z2));
                    pairs.push((o1, z2));
                    pairs.push((z1, o2));
                }
            }
        }
        let results = b.and_pairs(&pairs)?;
        let mut cursor = 0;
        for g in layers.iter_mut() {
            let mut next = Vec::with_capacity(g.len().div_ceil(2));
            for chunk in g.chunks(2) {
                if chunk.len() == 2 {
                    let z = results[cursor];
                    let oz = results[cursor + 1];
                    let zo = results[cursor + 2];
                    cursor += 3;
                    next.push((z, b.xor(oz, zo)));
                } else {
                    next.push(chunk[0]);
                }
            }
            *g = next;
        }
    }
    let mut zeros = Vec::with_capacity(layers.len());
    let mut ones = Vec::with_capacity(layers.len());
    for g in layers {
        zeros.push(g[0].0);
        ones.push(g[0].1);
    }
    Ok((zeros, ones))
}

/// Ripple addition of number pairs, batched bit position by bit position.
/// Output width is one past the wider operand.
fn add_pairs<B: Backend + ?Sized>(
    b: &mut B,
    pairs: &[(Vec<SharedBit>, Vec<SharedBit>)],
) -> Result<Vec<Vec<SharedBit>>, BackendError> {
    let max_width = pairs
        .iter()
        .map(|(x, y)| x.len().max(y.len()))
        .max()
        .unwrap_or(0);
    let zero = b.constant(false);
    let mut sums: Vec<Vec<SharedBit>> = vec![Vec::new(); pairs.len()];
    let mut carries: Vec<SharedBit> = vec![zero; pairs.len()];
    for k in 0..max_width {
        // s = a ^ b ^ cin; cout = (a & b) ^ (cin & (a ^ b))
        let mut gate_in = Vec::with_capacity(2 * pairs.len());
        let mut axb = Vec::with_capacity(pairs.len());
        for (idx, (x, y)) in pairs.iter().enumerate() {
            if k >= x.len().max(y.len()) {
                axb.push(None);
                continue;
            }
            let a = x.get(k).copied().unwrap_or(zero);
            let bb = y.get(k).copied().unwrap_or(zero);
            let d = b.xor(a, bb);
            gate_in.push((a, bb));
            gate_in.push((carries[idx], d));
            axb.push(Some(d));
        }
        let gates = b.and_pairs(&gate_in)?;
        let mut cursor = 0;
        for (idx, d) in axb.into_iter().enumerate() {
            if let Some(d) = d {
                let ab = gates[cursor];
                let cd = gates[cursor + 1];
                cursor += 2;
                let s = b.xor(d, carries[idx]);
                sums[idx].push(s);
                carries[idx] = b.xor(ab, cd);
            }
        }
    }
    for (idx, sum) in sums.iter_mut().enumerate() {
        sum.push(carries[idx]);
    }
    Ok(sums)
}

pub fn add_vecs<B: Backend + ?Sized>(
    b: &mut B,
    x: &[SharedBit],
    y: &[SharedBit],
) -> Result<Vec<SharedBit>, BackendError> {
    Ok(add_pairs(b, &[(x.to_vec(), y.to_vec())])?.pop().unwrap())
}

/// Counts set bits within each group; all results share one width
/// (`index_bits(len + 1)` of the largest group), little-endian.
pub fn popcount<B: Backend + ?Sized>(
    b: &mut B,
    groups: &[Vec<SharedBit>],
) -> Result<Vec<Vec<SharedBit>>, BackendError> {
    let max_len = groups.iter().map(Vec::len).max().unwrap_or(0);
    let target_width = index_bits(max_len + 1);
    let zero = b.constant(false);
    let mut layers: Vec<Vec<Vec<SharedBit>>> = groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                vec![vec![zero]]
            } else {
                g.iter().map(|&x| vec![x]).collect()
            }
        })
        .collect();
    while layers.iter().any(|g| g.len() > 1) {
        let mut pairs = Vec::new();
        for g in &layers {
            for chunk in g.chunks(2) {
                if chunk.len() == 2 {
                    pairs.push((chunk[0].clone(), chunk[1].clone()));
                }
            }
        }
        let results = add_pairs(b, &pairs)?;
        let mut cursor = 0;
        for g in layers.iter_mut() {
            let mut next = Vec::with_capacity(g.len().div_ceil(2));
            for chunk in g.chunks(2) {
                if chunk.len() == 2 {
                    next.push(results[cursor].clone());
                    cursor += 1;
                } else {
                    next.push(chunk[0].clone());
                }
            }
            *g = next;
        }
    }
    Ok(layers
        .into_iter()
        .map(|g| {
            let mut v = g.into_iter().next().unwrap();
            v.resize(target_width.max(v.len()), zero);
            v
        })
        .collect())
}

/// Batched strict comparison `x > y` on equal-width little-endian numbers.
fn greater_than_pairs<B: Backend + ?Sized>(
    b: &mut B,
    pairs: &[(Vec<SharedBit>, Vec<SharedBit>)],
) -> Result<Vec<SharedBit>, BackendError> {
    let width = pairs.first().map(|(x, _)| x.len()).unwrap_or(0);
    for (x, y) in pairs {
        if x.len() != width || y.len() != width {
            return Err(BackendError::WidthMismatch);
        }
    }
    let mut result: Vec<SharedBit> = (0..pairs.len()).map(|_| b.constant(false)).collect();
    let mut undecided: Vec<SharedBit> = (0..pairs.len()).map(|_| b.constant(true)).collect();
    for k in (0..width).rev() {
        let diffs: Vec<SharedBit> = pairs.iter().map(|(x, y)| b.xor(x[k], y[k])).collect();
        let ud: Vec<_> = undecided
            .iter()
            .copied()
            .zip(diffs.iter().copied())
            .collect();
        let live = b.and_pairs(&ud)?;
        let wins_in: Vec<_> = live
            .iter()
            .copied()
            .zip(pairs.iter().map(|(x, _)| x[k]))
            .collect();
        let wins = b.and_pairs(&wins_in)?;
        let next_undecided_in: Vec<_> = undecided
            .iter()
            .copied()
            .zip(diffs.iter().map(|&d| b.not(d)))
            .collect();
        let next_undecided = b.and_pairs(&next_undecided_in)?;
        for i in 0..pairs.len() {
            // A win can only fire while still undecided, so XOR accumulates.
            result[i] = b.xor(result[i], wins[i]);
            undecided[i] = next_undecided[i];
        }
    }
    Ok(result)
}

/// Tournament argmax keeping the earliest maximum: returns the payload of the
/// first entry attaining the maximum count. Counts must share a width.
pub fn argmax_first<B: Backend + ?Sized>(
    b: &mut B,
    counts: &[Vec<SharedBit>],
    payloads: &[Vec<SharedBit>],
) -> Result<Vec<SharedBit>, BackendError> {
    if counts.is_empty() || counts.len() != payloads.len() {
        return Err(BackendError::EmptySelection);
    }
    let width = counts[0].len();
    let pwidth = payloads[0].len();
    if counts.iter().any(|c| c.len() != width) || payloads.iter().any(|p| p.len() != pwidth) {
        return Err(BackendError::WidthMismatch);
    }
    let mut entries: Vec<(Vec<SharedBit>, Vec<SharedBit>)> = counts
        .iter()
        .cloned()
        .zip(payloads.iter().cloned())
        .collect();
    while entries.len() > 1 {
        let mut cmp_in = Vec::new();
        for chunk in entries.chunks(2) {
            if let [(c1, _), (c2, _)] = chunk {
                // The right side must be strictly greater to displace the left.
                cmp_in.push((c2.clone(), c1.clone()));
            }
        }
        let right_wins = greater_than_pairs(b, &cmp_in)?;
        let mut mux_in = Vec::new();
        let mut cursor = 0;
        for chunk in entries.chunks(2) {
            if let [(c1, p1), (c2, p2)] = chunk {
                let sel = right_wins[cursor];
                cursor += 1;
                for k in 0..width {
                    mux_in.push((sel, b.xor(c2[k], c1[k])));
                }
                for k in 0..pwidth {
                    mux_in.push((sel, b.xor(p2[k], p1[k])));
                }
            }
        }
        let gated = b.and_pairs(&mux_in)?;
        let mut next = Vec::with_capacity(entries.len().div_ceil(2));
        let mut g = 0;
        for chunk in entries.chunks(2) {
            if let [(c1, p1), _] = chunk {
                let c: Vec<SharedBit> = (0..width).map(|k| b.xor(gated[g + k], c1[k])).collect();
                let p: Vec<SharedBit> = (0..pwidth)
                    .map(|k| b.xor(gated[g + width + k], p1[k]))
                    .collect();
                g += width + pwidth;
                next.push((c, p));
            } else {
                next.push(chunk[0].clone());
            }
        }
        entries = next;
    }
    Ok(entries.pop().unwrap().1)
}

/// Binary encoding of the smallest index attaining the maximum value.
/// Gate count is fixed for a given (list length, bit width).
pub fn oblivious_max_index<B: Backend + ?Sized>(
    b: &mut B,
    values: &[Vec<SharedBit>],
) -> Result<Vec<SharedBit>, BackendError> {
    if values.is_empty() {
        return Err(BackendError::EmptySelection);
    }
    let ibits = index_bits(values.len());
    let payloads: Vec<Vec<SharedBit>> = (0..values.len())
        .map(|i| to_bits_const(b, i as u64, ibits))
        .collect();
    argmax_first(b, values, &payloads)
}

/// Selects the payload of the first set flag: returns (any flag set, payload).
pub fn leftmost_hit<B: Backend + ?Sized>(
    b: &mut B,
    flags: &[SharedBit],
    payloads: &[Vec<SharedBit>],
) -> Result<(SharedBit, Vec<SharedBit>), BackendError> {
    if flags.is_empty() || flags.len() != payloads.len() {
        return Err(BackendError::EmptySelection);
    }
    let pwidth = payloads[0].len();
    if payloads.iter().any(|p| p.len() != pwidth) {
        return Err(BackendError::WidthMismatch);
    }
    let mut entries: Vec<(SharedBit, Vec<SharedBit>)> = flags
        .iter()
        .copied()
        .zip(payloads.iter().cloned())
        .collect();
    while entries.len() > 1 {
        let mut gate_in = Vec::new();
        for chunk in entries.chunks(2) {
            if let [(f1, p1), (f2, p2)] = chunk {
                gate_in.push((b.not(*f1), b.not(*f2)));
                for k in 0..pwidth {
                    gate_in.push((*f1, b.xor(p1[k], p2[k])));
                }
            }
        }
        let gates = b.and_pairs(&gate_in)?;
        let mut next = Vec::with_capacity(entries.len().div_ceil(2));
        let mut cursor = 0;
        for chunk in entries.chunks(2) {
            if let [(_, _), (_, p2)] = chunk {
                let f = b.not(gates[cursor]);
                let p: Vec<SharedBit> = (0..pwidth)
                    .map(|k| b.xor(gates[cursor + 1 + k], p2[k]))
                    .collect();
                cursor += 1 + pwidth;
                next.push((f, p));
            } else {
                next.push(chunk[0].clone());
            }
        }
        entries = next;
    }
    let (f, p) = entries.pop().unwrap();
    Ok((f, p))
}

/// Equality of two equal-width vectors.
pub fn eq_vec<B: Backend + ?Sized>(
    b: &mut B,
    xs: &[SharedBit],
    ys: &[SharedBit],
) -> Result<SharedBit, BackendError> {
    if xs.len() != ys.len() {
        return Err(BackendError::WidthMismatch);
    }
    let xnors: Vec<SharedBit> = xs
        .iter()
        .zip(ys.iter())
        .map(|(&x, &y)| {
            let d = b.xor(x, y);
            b.not(d)
        })
        .collect();
    and_reduce(b, &xnors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::CleartextBackend;
    use crate::transport::Role;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn shares(b: &mut CleartextBackend, bits: &[bool]) -> Vec<SharedBit> {
        b.share_bits(Role::Vendor, Some(bits), bits.len()).unwrap()
    }

    fn reveal_num(b: &mut CleartextBackend, bits: &[SharedBit]) -> u64 {
        let plain = b.reveal_bits(bits).unwrap();
        plain
            .iter()
            .enumerate()
            .map(|(k, &v)| (v as u64) << k)
            .sum()
    }

    #[test]
    fn reduce_and_popcount_match_plaintext() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let groups: Vec<Vec<bool>> = (0..rng.gen_range(1..6))
                .map(|_| (0..rng.gen_range(0..9)).map(|_| rng.gen()).collect())
                .collect();
            let mut b = CleartextBackend::new();
            let shared: Vec<Vec<SharedBit>> = groups.iter().map(|g| shares(&mut b, g)).collect();
            let ors = or_reduce_groups(&mut b, &shared).unwrap();
            let ands = and_reduce_groups(&mut b, &shared).unwrap();
            let (zeros, ones) = exactly_one_groups(&mut b, &shared).unwrap();
            let counts = popcount(&mut b, &shared).unwrap();
            for (i, g) in groups.iter().enumerate() {
                let set = g.iter().filter(|&&x| x).count();
                assert_eq!(b.reveal(ors[i]).unwrap(), set > 0);
                assert_eq!(b.reveal(ands[i]).unwrap(), set == g.len());
                assert_eq!(b.reveal(zeros[i]).unwrap(), set == 0);
                assert_eq!(b.reveal(ones[i]).unwrap(), set == 1);
                assert_eq!(reveal_num(&mut b, &counts[i]), set as u64);
            }
        }
    }

    #[test]
    fn adder_matches_integer_addition() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..100 {
            let x: u64 = rng.gen_range(0..256);
            let y: u64 = rng.gen_range(0..256);
            let mut b = CleartextBackend::new();
            let xs = to_bits_const(&mut b, x, 8);
            let ys = to_bits_const(&mut b, y, 8);
            let sum = add_vecs(&mut b, &xs, &ys).unwrap();
            assert_eq!(reveal_num(&mut b, &sum), x + y);
        }
    }

    #[test]
    fn max_index_singleton() {
        let mut b = CleartextBackend::new();
        let v = vec![to_bits_const(&mut b, 3, 3)];
        let idx = oblivious_max_index(&mut b, &v).unwrap();
        assert_eq!(reveal_num(&mut b, &idx), 0);
    }

    #[test]
    fn max_index_tie_breaks_low() {
        let mut b = CleartextBackend::new();
        let values: Vec<Vec<SharedBit>> = [2u64, 5, 5]
            .iter()
            .map(|&v| to_bits_const(&mut b, v, 3))
            .collect();
        let idx = oblivious_max_index(&mut b, &values).unwrap();
        assert_eq!(reveal_num(&mut b, &idx), 1);
    }

    #[test]
    fn max_index_matches_plaintext_argmax() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..100 {
            let len = rng.gen_range(1..12);
            let values: Vec<u64> = (0..len).map(|_| rng.gen_range(0..16)).collect();
            let expected = values
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
                .map(|(i, _)| i as u64)
                .unwrap();
            let mut b = CleartextBackend::new();
            let shared: Vec<Vec<SharedBit>> = values
                .iter()
                .map(|&v| to_bits_const(&mut b, v, 4))
                .collect();
            let idx = oblivious_max_index(&mut b, &shared).unwrap();
            assert_eq!(reveal_num(&mut b, &idx), expected, "values {values:?}");
        }
    }

    #[test]
    fn max_index_rejects_empty_and_ragged() {
        let mut b = CleartextBackend::new();
        assert!(matches!(
            oblivious_max_index(&mut b, &[]),
            Err(BackendError::EmptySelection)
        ));
        let ragged = vec![to_bits_const(&mut b, 1, 2), to_bits_const(&mut b, 1, 3)];
        assert!(matches!(
            oblivious_max_index(&mut b, &ragged),
            Err(BackendError::WidthMismatch)
        ));
    }

    #[test]
    fn leftmost_hit_selects_first_flag() {
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..60 {
            let len = rng.gen_range(1..10);
            let flags: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.3)).collect();
            let payloads: Vec<u64> = (0..len).map(|_| rng.gen_range(0..8)).collect();
            let mut b = CleartextBackend::new();
            let sf = shares(&mut b, &flags);
            let sp: Vec<Vec<SharedBit>> = payloads
                .iter()
                .map(|&p| to_bits_const(&mut b, p, 3))
                .collect();
            let (found, payload) = leftmost_hit(&mut b, &sf, &sp).unwrap();
            let expected = flags.iter().position(|&f| f);
            assert_eq!(b.reveal(found).unwrap(), expected.is_some());
            if let Some(i) = expected {
                assert_eq!(reveal_num(&mut b, &payload), payloads[i]);
            }
        }
    }

    #[test]
    fn gate_count_depends_only_on_shape() {
        let count_for = |values: &[u64]| {
            let mut b = CleartextBackend::new();
            let shared: Vec<Vec<SharedBit>> = values
                .iter()
                .map(|&v| to_bits_const(&mut b, v, 5))
                .collect();
            oblivious_max_index(&mut b, &shared).unwrap();
            b.stats().and_count
        };
        assert_eq!(count_for(&[0, 0, 0, 0, 0]), count_for(&[31, 7, 19, 2, 11]));
    }
}
