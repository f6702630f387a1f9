//! Giant-step DPLL over the paired occurrence matrices, runnable on any
//! backend. Each main-loop iteration performs one full data-oblivious sweep
//! over all n x m cells and then exactly one action in priority order:
//! conflict backtrack, one unit propagation, one pure-literal elimination,
//! or one heuristic decision.
//!
//! Matrices, clause-satisfied flags, and assignment registers stay shared.
//! The per-step outcome (action kind, variable, value) is revealed to drive
//! the plaintext chronological trail; that reveal is the declared leakage
//! surface beyond the verdict and step count. The sweep's gate schedule is a
//! pure function of (n, m, |H|), never of share values.

use thiserror::Error;

use crate::backend::{
    and_reduce, and_reduce_groups, argmax_first, exactly_one_groups, index_bits, leftmost_hit,
    mux_vec, or_reduce_groups, popcount, to_bits_const, Backend, BackendError, GateStats,
    SharedBit,
};
use crate::formula::BitMatrix;
use crate::ir::HeuristicSet;
use crate::transport::Role;

pub const DEFAULT_STEP_LIMIT: u64 = 20_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("step limit must be at least 1")]
    BadStepLimit,
    #[error("matrix dimensions disagree: {0}")]
    DimensionMismatch(String),
    #[error("solver invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Sat,
    Unsat,
    Timeout,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Sat => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Timeout => "TIMEOUT",
        }
    }
}

/// A grid of shared bits, rows = variables, columns = clauses.
#[derive(Clone)]
pub struct SharedMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<SharedBit>,
}

impl SharedMatrix {
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<SharedBit>) -> Self {
        assert_eq!(bits.len(), rows * cols);
        SharedMatrix { rows, cols, bits }
    }

    /// Shares a plaintext matrix held by `owner` (the other party passes
    /// `None`) in a single message.
    pub fn share<B: Backend>(
        backend: &mut B,
        owner: Role,
        plain: Option<&BitMatrix>,
        rows: usize,
        cols: usize,
    ) -> Result<Self, BackendError> {
        let flat: Option<Vec<bool>> = plain.map(|m| {
            let mut v = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for j in 0..cols {
                    v.push(m.get(i, j));
                }
            }
            v
        });
        let bits = backend.share_bits(owner, flat.as_deref(), rows * cols)?;
        Ok(SharedMatrix { rows, cols, bits })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> SharedBit {
        self.bits[row * self.cols + col]
    }

    /// Elementwise XOR; local on shares, zero AND gates.
    pub fn xor<B: Backend>(
        &self,
        backend: &mut B,
        other: &SharedMatrix,
    ) -> Result<Self, SolverError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(SolverError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| backend.xor(a, b))
            .collect();
        Ok(SharedMatrix {
            rows: self.rows,
            cols: self.cols,
            bits,
        })
    }

    /// Appends the columns of `other`, padding missing rows with constant
    /// zero shares. Zero AND gates.
    pub fn append_columns<B: Backend>(&self, backend: &mut B, other: &SharedMatrix) -> Self {
        let rows = self.rows.max(other.rows);
        let cols = self.cols + other.cols;
        let zero = backend.constant(false);
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..self.cols {
                bits.push(if i < self.rows { self.get(i, j) } else { zero });
            }
            for j in 0..other.cols {
                bits.push(if i < other.rows {
                    other.get(i, j)
                } else {
                    zero
                });
            }
        }
        SharedMatrix { rows, cols, bits }
    }

    pub fn reveal<B: Backend>(&self, backend: &mut B) -> Result<BitMatrix, BackendError> {
        let plain = backend.reveal_bits(&self.bits)?;
        let mut m = BitMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if plain[i * self.cols + j] {
                    m.set(i, j, true);
                }
            }
        }
        Ok(m)
    }
}

/// The control-literal priority list as shared state: the list length is
/// public, entry contents (validity flag plus 0-based variable index bits)
/// are shared so the holder's selection never leaks through the sweep.
#[derive(Clone)]
pub struct SharedHeuristic {
    pub entries: Vec<(SharedBit, Vec<SharedBit>)>,
}

/// Shares a padded heuristic set owned by `owner`. `len` is the public
/// (padded) entry count; sentinel literal 0 marks padding and is skipped by
/// the solver. `num_vars` fixes the index width.
pub fn share_heuristic<B: Backend>(
    backend: &mut B,
    owner: Role,
    heuristic: Option<&HeuristicSet>,
    len: usize,
    num_vars: usize,
) -> Result<SharedHeuristic, BackendError> {
    let ibits = index_bits(num_vars.max(1));
    let plain: Option<Vec<bool>> = heuristic.map(|h| {
        let mut bits = Vec::with_capacity(len * (1 + ibits));
        for k in 0..len {
            let lit = h.literals().get(k).copied().unwrap_or(0);
            bits.push(lit != 0);
            let idx = lit.saturating_sub(1) as u64;
            for b in 0..ibits {
                bits.push((idx >> b) & 1 == 1);
            }
        }
        bits
    });
    let shared = backend.share_bits(owner, plain.as_deref(), len * (1 + ibits))?;
    let entries = shared
        .chunks(1 + ibits)
        .map(|chunk| (chunk[0], chunk[1..].to_vec()))
        .collect();
    Ok(SharedHeuristic { entries })
}

#[derive(Clone)]
pub enum Heuristic {
    Dlis,
    Ctrl(SharedHeuristic),
}

/// Per-solve counters. Giant steps count performed actions, so
/// `giant_steps = decisions + propagations + pure_eliminations + backtracks`.
#[derive(Clone, Debug, Default)]
pub struct GiantStepStats {
    pub giant_steps: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub pure_eliminations: u64,
    pub backtracks: u64,
    pub gates: GateStats,
    /// AND gates burned by each sweep iteration, including the final
    /// verdict-revealing sweep; used to assert per-step cost constancy.
    pub step_and_counts: Vec<u64>,
}

impl GiantStepStats {
    pub fn to_json(&self, verdict: Verdict) -> String {
        serde_json::json!({
            "result": verdict.as_str(),
            "giant_steps": self.giant_steps,
            "decisions": self.decisions,
            "propagations": self.propagations,
            "pure_eliminations": self.pure_eliminations,
            "backtracks": self.backtracks,
            "and_gates": self.gates.and_count,
            "estimated_bytes": self.gates.estimated_bytes(),
        })
        .to_string()
    }
}

#[derive(Clone, Copy, Debug)]
struct TrailEntry {
    var: u32,
    value: bool,
    is_decision: bool,
    tried_both: bool,
}

/// What one sweep revealed.
#[derive(Clone, Copy, Debug)]
struct StepOutcome {
    all_sat: bool,
    conflict: bool,
    unit: bool,
    pure: bool,
    var: u32,
    value: bool,
}

/// Evolving solver state: shared matrices and assignment registers plus the
/// plaintext trail for chronological backtracking.
pub struct SolverState {
    pos: SharedMatrix,
    neg: SharedMatrix,
    /// occ(i,j) = P v N, fixed for the whole solve.
    occ: Vec<SharedBit>,
    n: usize,
    m: usize,
    ibits: usize,
    assigned: Vec<SharedBit>,
    value: Vec<SharedBit>,
    trail: Vec<TrailEntry>,
}

impl SolverState {
    pub fn new<B: Backend>(
        backend: &mut B,
        pos: &SharedMatrix,
        neg: &SharedMatrix,
    ) -> Result<Self, SolverError> {
        if pos.rows() != neg.rows() || pos.cols() != neg.cols() {
            return Err(SolverError::DimensionMismatch(format!(
                "P is {}x{}, N is {}x{}",
                pos.rows(),
                pos.cols(),
                neg.rows(),
                neg.cols()
            )));
        }
        let (n, m) = (pos.rows(), pos.cols());
        let mut occ_pairs = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                occ_pairs.push((backend.not(pos.get(i, j)), backend.not(neg.get(i, j))));
            }
        }
        let nocc = backend.and_pairs(&occ_pairs)?;
        let occ = nocc.into_iter().map(|b| backend.not(b)).collect();
        let f = backend.constant(false);
        Ok(SolverState {
            pos: pos.clone(),
            neg: neg.clone(),
            occ,
            n,
            m,
            ibits: index_bits(n.max(1)),
            assigned: vec![f; n],
            value: vec![f; n],
            trail: Vec::new(),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.m
    }

    /// Applies a (public) assignment, as the solve loop does after a reveal.
    pub fn assign<B: Backend>(
        &mut self,
        backend: &mut B,
        var: u32,
        value: bool,
        is_decision: bool,
    ) {
        let i = (var - 1) as usize;
        self.assigned[i] = backend.constant(true);
        self.value[i] = backend.constant(value);
        self.trail.push(TrailEntry {
            var,
            value,
            is_decision,
            tried_both: false,
        });
    }

    /// Pops to the most recent decision not yet tried both ways and flips
    /// it. Returns false when no such decision exists (formula unsatisfiable).
    pub fn backtrack<B: Backend>(&mut self, backend: &mut B) -> bool {
        while let Some(entry) = self.trail.pop() {
            let i = (entry.var - 1) as usize;
            if entry.is_decision && !entry.tried_both {
                let flipped = !entry.value;
                self.value[i] = backend.constant(flipped);
                self.trail.push(TrailEntry {
                    var: entry.var,
                    value: flipped,
                    is_decision: true,
                    tried_both: true,
                });
                return true;
            }
            self.assigned[i] = backend.constant(false);
        }
        false
    }

    pub fn trail_len(&self) -> usize {
        self.trail.len()
    }

    /// sat_j / live_j flags plus the grids the rest of the sweep reuses.
    fn clause_flags<B: Backend>(&self, backend: &mut B) -> Result<ClauseFlags, SolverError> {
        let (n, m) = (self.n, self.m);
        // posval/negval: variable currently assigned true / assigned false.
        let mut pairs = Vec::with_capacity(2 * n);
        for i in 0..n {
            pairs.push((self.assigned[i], self.value[i]));
            pairs.push((self.assigned[i], backend.not(self.value[i])));
        }
        let pv = backend.and_pairs(&pairs)?;
        let posval: Vec<SharedBit> = (0..n).map(|i| pv[2 * i]).collect();
        let negval: Vec<SharedBit> = (0..n).map(|i| pv[2 * i + 1]).collect();

        // Cell satisfaction: P & posval | N & negval (disjoint, so XOR).
        let mut cell_pairs = Vec::with_capacity(2 * n * m);
        for i in 0..n {
            for j in 0..m {
                cell_pairs.push((self.pos.get(i, j), posval[i]));
                cell_pairs.push((self.neg.get(i, j), negval[i]));
            }
        }
        let cells = backend.and_pairs(&cell_pairs)?;
        let mut sat_groups: Vec<Vec<SharedBit>> = vec![Vec::with_capacity(n); m];
        for i in 0..n {
            for (j, group) in sat_groups.iter_mut().enumerate() {
                let k = 2 * (i * m + j);
                let cellsat = backend.xor(cells[k], cells[k + 1]);
                group.push(cellsat);
            }
        }
        let sat = or_reduce_groups(backend, &sat_groups)?;
        let live: Vec<SharedBit> = sat.iter().map(|&s| backend.not(s)).collect();
        let all_sat = and_reduce(backend, &sat)?;

        // Free occurrence grids, masked by assignment and liveness.
        let not_assigned: Vec<SharedBit> = self.assigned.iter().map(|&a| backend.not(a)).collect();
        let mut free_pairs = Vec::with_capacity(3 * n * m);
        for (i, &na) in not_assigned.iter().enumerate() {
            for j in 0..m {
                free_pairs.push((self.occ[i * m + j], na));
                free_pairs.push((self.pos.get(i, j), na));
                free_pairs.push((self.neg.get(i, j), na));
            }
        }
        let free_all = backend.and_pairs(&free_pairs)?;
        let mut free = Vec::with_capacity(n * m);
        let mut fp = Vec::with_capacity(n * m);
        let mut fneg = Vec::with_capacity(n * m);
        for k in 0..n * m {
            free.push(free_all[3 * k]);
            fp.push(free_all[3 * k + 1]);
            fneg.push(free_all[3 * k + 2]);
        }
        let mut live_pairs = Vec::with_capacity(2 * n * m);
        for i in 0..n {
            for j in 0..m {
                live_pairs.push((fp[i * m + j], live[j]));
                live_pairs.push((fneg[i * m + j], live[j]));
            }
        }
        let dlive = backend.and_pairs(&live_pairs)?;
        let mut dp = Vec::with_capacity(n * m);
        let mut dn = Vec::with_capacity(n * m);
        for k in 0..n * m {
            dp.push(dlive[2 * k]);
            dn.push(dlive[2 * k + 1]);
        }
        Ok(ClauseFlags {
            live,
            all_sat,
            free,
            fp,
            dp,
            dn,
        })
    }

    /// Conflict flag and the first-unit-clause candidate.
    fn conflict_and_unit<B: Backend>(
        &self,
        backend: &mut B,
        flags: &ClauseFlags,
    ) -> Result<(SharedBit, SharedBit, Vec<SharedBit>), SolverError> {
        let (n, m) = (self.n, self.m);
        let mut cols: Vec<Vec<SharedBit>> = vec![Vec::with_capacity(n); m];
        for i in 0..n {
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(flags.free[i * m + j]);
            }
        }
        let (zeros, ones) = exactly_one_groups(backend, &cols)?;
        let mut pairs = Vec::with_capacity(2 * m);
        for j in 0..m {
            pairs.push((flags.live[j], zeros[j]));
            pairs.push((flags.live[j], ones[j]));
        }
        let cu = backend.and_pairs(&pairs)?;
        let conflicts: Vec<SharedBit> = (0..m).map(|j| cu[2 * j]).collect();
        let units: Vec<SharedBit> = (0..m).map(|j| cu[2 * j + 1]).collect();
        let conflict_any = or_reduce_groups(backend, &[conflicts])?[0];

        // Unit payload per clause: index bits are XOR-folds of the free
        // column (exactly one bit set when the clause is unit), the value is
        // the parity of free positive occurrences.
        let mut payloads = Vec::with_capacity(m);
        for j in 0..m {
            let mut payload = Vec::with_capacity(self.ibits + 1);
            for b in 0..self.ibits {
                let mut acc = backend.constant(false);
                for i in 0..n {
                    if (i >> b) & 1 == 1 {
                        acc = backend.xor(acc, flags.free[i * m + j]);
                    }
                }
                payload.push(acc);
            }
            let mut val = backend.constant(false);
            for i in 0..n {
                val = backend.xor(val, flags.fp[i * m + j]);
            }
            payload.push(val);
            payloads.push(payload);
        }
        let (unit_found, unit_payload) = leftmost_hit(backend, &units, &payloads)?;
        Ok((conflict_any, unit_found, unit_payload))
    }

    /// Lowest-index pure literal candidate. Row OR-folds of the live free
    /// grids double as the per-variable polarity-presence flags.
    fn pure_candidate<B: Backend>(
        &self,
        backend: &mut B,
        flags: &ClauseFlags,
    ) -> Result<PureCandidate, SolverError> {
        let (n, m) = (self.n, self.m);
        let mut rows: Vec<Vec<SharedBit>> = Vec::with_capacity(2 * n);
        for i in 0..n {
            rows.push(flags.dp[i * m..(i + 1) * m].to_vec());
        }
        for i in 0..n {
            rows.push(flags.dn[i * m..(i + 1) * m].to_vec());
        }
        let folded = or_reduce_groups(backend, &rows)?;
        let row_p = folded[..n].to_vec();
        let row_n = folded[n..].to_vec();
        let pure_flags: Vec<SharedBit> = (0..n).map(|i| backend.xor(row_p[i], row_n[i])).collect();
        let payloads: Vec<Vec<SharedBit>> = (0..n)
            .map(|i| {
                let mut p = to_bits_const(backend, i as u64, self.ibits);
                p.push(row_p[i]);
                p
            })
            .collect();
        let (found, payload) = leftmost_hit(backend, &pure_flags, &payloads)?;
        Ok((row_p, row_n, found, payload))
    }

    /// DLIS occurrence counts over live clauses for unassigned variables,
    /// optionally masking out control variables.
    fn dlis_payload<B: Backend>(
        &self,
        backend: &mut B,
        flags: &ClauseFlags,
        exclude: Option<&[SharedBit]>,
    ) -> Result<Vec<SharedBit>, SolverError> {
        let (n, m) = (self.n, self.m);
        let mut groups: Vec<Vec<SharedBit>> = Vec::with_capacity(2 * n);
        for i in 0..n {
            groups.push(flags.dp[i * m..(i + 1) * m].to_vec());
            groups.push(flags.dn[i * m..(i + 1) * m].to_vec());
        }
        let mut counts = popcount(backend, &groups)?;
        if let Some(excluded) = exclude {
            let keep: Vec<SharedBit> = excluded.iter().map(|&e| backend.not(e)).collect();
            let width = counts[0].len();
            let mut pairs = Vec::with_capacity(2 * n * width);
            for i in 0..n {
                for half in 0..2 {
                    for &bit in &counts[2 * i + half] {
                        pairs.push((bit, keep[i]));
                    }
                }
            }
            let masked = backend.and_pairs(&pairs)?;
            let mut cursor = 0;
            for count in counts.iter_mut() {
                count.copy_from_slice(&masked[cursor..cursor + width]);
                cursor += width;
            }
        }
        // Literal order: variable ascending, positive before negative, so
        // the earliest maximum realizes the documented tie-break.
        let payloads: Vec<Vec<SharedBit>> = (0..2 * n)
            .map(|k| {
                let var = k / 2;
                let positive = k % 2 == 0;
                let mut p = to_bits_const(backend, var as u64, self.ibits);
                p.push(backend.constant(positive));
                p
            })
            .collect();
        Ok(argmax_first(backend, &counts, &payloads)?)
    }

    /// Control-guided candidate per the overwrite scan: later entries in H
    /// overwrite earlier ones, so the highest-priority live control literal
    /// wins; the positive-polarity overwrite is applied last.
    fn ctrl_payload<B: Backend>(
        &self,
        backend: &mut B,
        h: &SharedHeuristic,
        row_p: &[SharedBit],
        row_n: &[SharedBit],
    ) -> Result<(SharedBit, Vec<SharedBit>, Vec<SharedBit>), SolverError> {
        let n = self.n;
        // rowmatch[k][i]: does entry k's index equal variable i?
        let mut match_groups: Vec<Vec<SharedBit>> = Vec::with_capacity(h.entries.len() * n);
        for (_, idx_bits) in &h.entries {
            for i in 0..n {
                let xnors: Vec<SharedBit> = idx_bits
                    .iter()
                    .enumerate()
                    .map(|(b, &bit)| {
                        if (i >> b) & 1 == 1 {
                            bit
                        } else {
                            backend.not(bit)
                        }
                    })
                    .collect();
                match_groups.push(xnors);
            }
        }
        let matches = and_reduce_groups(backend, &match_groups)?;

        // is_control[i] = any valid entry matches i (for the DLIS fallback).
        let mut vc_pairs = Vec::with_capacity(h.entries.len() * n);
        for (k, (valid, _)) in h.entries.iter().enumerate() {
            for i in 0..n {
                vc_pairs.push((matches[k * n + i], *valid));
            }
        }
        let valid_matches = backend.and_pairs(&vc_pairs)?;
        let mut control_cols: Vec<Vec<SharedBit>> = vec![Vec::with_capacity(h.entries.len()); n];
        for k in 0..h.entries.len() {
            for i in 0..n {
                control_cols[i].push(valid_matches[k * n + i]);
            }
        }
        let is_control = or_reduce_groups(backend, &control_cols)?;

        // Sequential overwrite chain.
        let mut found = backend.constant(false);
        let mut idx: Vec<SharedBit> = vec![backend.constant(false); self.ibits];
        let mut val = backend.constant(false);
        for (k, (valid, idx_bits)) in h.entries.iter().enumerate() {
            let row = &valid_matches[k * n..(k + 1) * n];
            let sp_in: Vec<(SharedBit, SharedBit)> =
                row.iter().copied().zip(row_p.iter().copied()).collect();
            let sn_in: Vec<(SharedBit, SharedBit)> =
                row.iter().copied().zip(row_n.iter().copied()).collect();
            let merged: Vec<(SharedBit, SharedBit)> = sp_in.into_iter().chain(sn_in).collect();
            let hits = backend.and_pairs(&merged)?;
            let reduced = or_reduce_groups(backend, &[hits[..n].to_vec(), hits[n..].to_vec()])?;
            let gated = backend.and_pairs(&[(reduced[0], *valid), (reduced[1], *valid)])?;
            let (sp, sn) = (gated[0], gated[1]);
            let sel = backend.or(sp, sn)?;
            found = backend.or(found, sel)?;
            idx = mux_vec(backend, sel, idx_bits, &idx)?;
            // value <- sn ? 0 : value, then value <- sp ? 1 : value.
            let nsn = backend.not(sn);
            val = backend.and(nsn, val)?;
            val = backend.or(sp, val)?;
        }
        let mut payload = idx;
        payload.push(val);
        Ok((found, payload, is_control))
    }

    /// One full sweep: computes every candidate obliviously, then reveals
    /// the step outcome (flags, chosen variable, value).
    fn sweep<B: Backend>(
        &self,
        backend: &mut B,
        heuristic: &Heuristic,
    ) -> Result<StepOutcome, SolverError> {
        let flags = self.clause_flags(backend)?;
        let (conflict_any, unit_found, unit_payload) = self.conflict_and_unit(backend, &flags)?;
        let (row_p, row_n, pure_found, pure_payload) = self.pure_candidate(backend, &flags)?;
        let decide_payload = match heuristic {
            Heuristic::Dlis => self.dlis_payload(backend, &flags, None)?,
            Heuristic::Ctrl(h) => {
                let (ctrl_found, ctrl_payload, is_control) =
                    self.ctrl_payload(backend, h, &row_p, &row_n)?;
                let dlis = self.dlis_payload(backend, &flags, Some(&is_control))?;
                mux_vec(backend, ctrl_found, &ctrl_payload, &dlis)?
            }
        };
        // Priority combine: unit over pure over decide.
        let after_pure = mux_vec(backend, pure_found, &pure_payload, &decide_payload)?;
        let chosen = mux_vec(backend, unit_found, &unit_payload, &after_pure)?;

        let mut to_reveal = vec![flags.all_sat, conflict_any, unit_found, pure_found];
        to_reveal.extend_from_slice(&chosen);
        let opened = backend.reveal_bits(&to_reveal)?;
        let idx: u32 = (0..self.ibits).map(|b| (opened[4 + b] as u32) << b).sum();
        Ok(StepOutcome {
            all_sat: opened[0],
            conflict: opened[1],
            unit: opened[2],
            pure: opened[3],
            var: idx + 1,
            value: opened[4 + self.ibits],
        })
    }

    /// The standalone decision ops, revealing only the decision payload.
    pub fn decide_dlis<B: Backend>(&self, backend: &mut B) -> Result<(u32, bool), SolverError> {
        let flags = self.clause_flags(backend)?;
        let payload = self.dlis_payload(backend, &flags, None)?;
        self.reveal_decision(backend, &payload)
    }

    pub fn decide_ctrl<B: Backend>(
        &self,
        backend: &mut B,
        h: &SharedHeuristic,
    ) -> Result<(u32, bool), SolverError> {
        let flags = self.clause_flags(backend)?;
        let (row_p, row_n, _, _) = self.pure_candidate(backend, &flags)?;
        let (ctrl_found, ctrl_payload, is_control) =
            self.ctrl_payload(backend, h, &row_p, &row_n)?;
        let dlis = self.dlis_payload(backend, &flags, Some(&is_control))?;
        let payload = mux_vec(backend, ctrl_found, &ctrl_payload, &dlis)?;
        self.reveal_decision(backend, &payload)
    }

    fn reveal_decision<B: Backend>(
        &self,
        backend: &mut B,
        payload: &[SharedBit],
    ) -> Result<(u32, bool), SolverError> {
        let opened = backend.reveal_bits(payload)?;
        let idx: u32 = (0..self.ibits).map(|b| (opened[b] as u32) << b).sum();
        let var = idx + 1;
        if var as usize > self.n {
            return Err(SolverError::Internal(format!(
                "decision chose variable {var} > {}",
                self.n
            )));
        }
        Ok((var, opened[self.ibits]))
    }
}

/// (row_p, row_n, found flag, payload) from the pure-literal scan.
type PureCandidate = (Vec<SharedBit>, Vec<SharedBit>, SharedBit, Vec<SharedBit>);

struct ClauseFlags {
    live: Vec<SharedBit>,
    all_sat: SharedBit,
    /// occ & unassigned, per cell.
    free: Vec<SharedBit>,
    /// P & unassigned, per cell.
    fp: Vec<SharedBit>,
    /// P & unassigned & live, per cell.
    dp: Vec<SharedBit>,
    /// N & unassigned & live, per cell.
    dn: Vec<SharedBit>,
}

/// Runs the giant-step loop to a verdict. Both parties execute this same
/// function; all control flow downstream of shares goes through reveals.
pub fn solve<B: Backend>(
    backend: &mut B,
    pos: &SharedMatrix,
    neg: &SharedMatrix,
    heuristic: &Heuristic,
    step_limit: u64,
) -> Result<(Verdict, GiantStepStats), SolverError> {
    if step_limit == 0 {
        return Err(SolverError::BadStepLimit);
    }
    let mut stats = GiantStepStats::default();
    let start_gates = backend.stats();
    if pos.cols() == 0 {
        stats.gates = diff_stats(start_gates, backend.stats());
        return Ok((Verdict::Sat, stats));
    }
    if pos.rows() == 0 {
        // Clauses over no variables are all empty, hence unsatisfiable.
        stats.gates = diff_stats(start_gates, backend.stats());
        return Ok((Verdict::Unsat, stats));
    }
    let mut state = SolverState::new(backend, pos, neg)?;
    let verdict = loop {
        let before = backend.stats().and_count;
        let outcome = state.sweep(backend, heuristic)?;
        stats
            .step_and_counts
            .push(backend.stats().and_count - before);
        if outcome.all_sat {
            break Verdict::Sat;
        }
        if stats.giant_steps == step_limit {
            break Verdict::Timeout;
        }
        stats.giant_steps += 1;
        if outcome.conflict {
            stats.backtracks += 1;
            if !state.backtrack(backend) {
                break Verdict::Unsat;
            }
        } else {
            if outcome.var as usize > state.n {
                return Err(SolverError::Internal(format!(
                    "step chose variable {} > {}",
                    outcome.var, state.n
                )));
            }
            if outcome.unit {
                stats.propagations += 1;
            } else if outcome.pure {
                stats.pure_eliminations += 1;
            } else {
                stats.decisions += 1;
            }
            state.assign(
                backend,
                outcome.var,
                outcome.value,
                !outcome.unit && !outcome.pure,
            );
        }
    };
    stats.gates = diff_stats(start_gates, backend.stats());
    Ok((verdict, stats))
}

fn diff_stats(start: GateStats, end: GateStats) -> GateStats {
    GateStats {
        and_count: end.and_count - start.and_count,
        xor_count: end.xor_count - start.xor_count,
        reveal_count: end.reveal_count - start.reveal_count,
    }
}

/// Shares both matrices of a plaintext instance from one owner; the peer
/// passes `None`. Dimensions are public.
pub fn share_instance<B: Backend>(
    backend: &mut B,
    owner: Role,
    matrices: Option<(&BitMatrix, &BitMatrix)>,
    rows: usize,
    cols: usize,
) -> Result<(SharedMatrix, SharedMatrix), BackendError> {
    let pos = SharedMatrix::share(backend, owner, matrices.map(|(p, _)| p), rows, cols)?;
    let neg = SharedMatrix::share(backend, owner, matrices.map(|(_, n)| n), rows, cols)?;
    Ok((pos, neg))
}
