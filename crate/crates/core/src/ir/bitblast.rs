//! Lowering an unrolled design to CNF: every frame-variable bit gets a
//! literal, gates are constant-folded and then Tseytin-encoded with fresh
//! auxiliary variables, and the observable/control bits are published
//! through a semantic map.

use std::collections::BTreeMap;

use super::design::{frame_name, UnrolledDesign};
use super::expr::Expr;
use super::IrError;
use crate::formula::{Clause, CnfFormula, Literal};

/// Public binding from `signal#frame[bit]` (plain `signal#frame` for 1-bit
/// signals) to CNF literal indices. Injective by construction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SemanticMap {
    entries: BTreeMap<String, u32>,
}

impl SemanticMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: String, literal: u32) {
        self.entries.insert(key, literal);
    }

    pub fn get(&self, key: &str) -> Option<u32> {
        self.entries.get(key).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, u32)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_literal(&self) -> u32 {
        self.entries.values().copied().max().unwrap_or(0)
    }

    /// Literal indices for every bit of `signal#frame`, LSB first. Empty if
    /// the signal is not mapped at that frame.
    pub fn literals_for(&self, signal: &str, frame: u32) -> Vec<u32> {
        let base = frame_name(signal, frame);
        if let Some(lit) = self.get(&base) {
            return vec![lit];
        }
        let mut out = Vec::new();
        while let Some(lit) = self.get(&format!("{base}[{}]", out.len())) {
            out.push(lit);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, IrError> {
        Ok(SemanticMap {
            entries: serde_json::from_str(text)?,
        })
    }
}

/// Control depth per `signal#frame`: 1 for an outermost ite condition,
/// growing inward.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ControlDepthMap {
    entries: BTreeMap<String, u32>,
}

impl ControlDepthMap {
    pub fn from_entries(entries: BTreeMap<String, u32>) -> Self {
        ControlDepthMap { entries }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, u32)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn get(&self, key: &str) -> Option<u32> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, IrError> {
        Ok(ControlDepthMap {
            entries: serde_json::from_str(text)?,
        })
    }
}

/// A lowered bit: a known constant or a CNF literal.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum BBit {
    Const(bool),
    Lit(Literal),
}

impl BBit {
    fn negate(self) -> BBit {
        match self {
            BBit::Const(c) => BBit::Const(!c),
            BBit::Lit(l) => BBit::Lit(!l),
        }
    }
}

/// Gate lowering context: fresh-variable counter plus the clause sink.
/// Gates fold constants before introducing Tseytin definitions.
pub(crate) struct Lowerer {
    next_var: u32,
    clauses: Vec<Clause>,
}

impl Lowerer {
    pub(crate) fn new(first_free_var: u32) -> Self {
        Lowerer {
            next_var: first_free_var,
            clauses: Vec::new(),
        }
    }

    fn fresh(&mut self) -> Literal {
        let v = self.next_var;
        self.next_var += 1;
        Literal::positive(v)
    }

    fn clause(&mut self, lits: Vec<Literal>) {
        self.clauses
            .push(Clause::new(lits).expect("gate clauses are duplicate-free"));
    }

    pub(crate) fn and(&mut self, a: BBit, b: BBit) -> BBit {
        match (a, b) {
            (BBit::Const(false), _) | (_, BBit::Const(false)) => BBit::Const(false),
            (BBit::Const(true), x) | (x, BBit::Const(true)) => x,
            (BBit::Lit(x), BBit::Lit(y)) => {
                if x == y {
                    return BBit::Lit(x);
                }
                if x == !y {
                    return BBit::Const(false);
                }
                let o = self.fresh();
                self.clause(vec![!x, !y, o]);
                self.clause(vec![x, !o]);
                self.clause(vec![y, !o]);
                BBit::Lit(o)
            }
        }
    }

    pub(crate) fn or(&mut self, a: BBit, b: BBit) -> BBit {
        self.and(a.negate(), b.negate()).negate()
    }

    pub(crate) fn xor(&mut self, a: BBit, b: BBit) -> BBit {
        match (a, b) {
            (BBit::Const(c), x) | (x, BBit::Const(c)) => {
                if c {
                    x.negate()
                } else {
                    x
                }
            }
            (BBit::Lit(x), BBit::Lit(y)) => {
                if x == y {
                    return BBit::Const(false);
                }
                if x == !y {
                    return BBit::Const(true);
                }
                let o = self.fresh();
                self.clause(vec![!x, !y, !o]);
                self.clause(vec![x, y, !o]);
                self.clause(vec![x, !y, o]);
                self.clause(vec![!x, y, o]);
                BBit::Lit(o)
            }
        }
    }

    /// `cond ? t : f` as the four standard mux clauses over a fresh output.
    pub(crate) fn mux(&mut self, cond: BBit, t: BBit, f: BBit) -> BBit {
        match cond {
            BBit::Const(true) => return t,
            BBit::Const(false) => return f,
            BBit::Lit(_) => {}
        }
        if t == f {
            return t;
        }
        let c = match cond {
            BBit::Lit(c) => c,
            BBit::Const(_) => unreachable!(),
        };
        match (t, f) {
            (BBit::Const(true), f) => self.or(BBit::Lit(c), f),
            (BBit::Const(false), f) => self.and(BBit::Lit(c).negate(), f),
            (t, BBit::Const(true)) => self.or(BBit::Lit(c).negate(), t),
            (t, BBit::Const(false)) => self.and(BBit::Lit(c), t),
            (BBit::Lit(tl), BBit::Lit(fl)) => {
                if tl == c {
                    return self.or(BBit::Lit(c), BBit::Lit(fl));
                }
                if tl == !c {
                    return self.and(BBit::Lit(!c), BBit::Lit(fl));
                }
                if fl == c {
                    return self.and(BBit::Lit(c), BBit::Lit(tl));
                }
                if fl == !c {
                    return self.or(BBit::Lit(!c), BBit::Lit(tl));
                }
                let o = self.fresh();
                self.clause(vec![!c, !tl, o]);
                self.clause(vec![!c, tl, !o]);
                self.clause(vec![c, !fl, o]);
                self.clause(vec![c, fl, !o]);
                BBit::Lit(o)
            }
        }
    }

    fn and_reduce(&mut self, bits: &[BBit]) -> BBit {
        let mut acc = BBit::Const(true);
        for &b in bits {
            acc = self.and(acc, b);
        }
        acc
    }

    /// Ripple-carry addition, carry out of the top bit discarded.
    fn add(&mut self, a: &[BBit], b: &[BBit]) -> Vec<BBit> {
        let mut out = Vec::with_capacity(a.len());
        let mut carry = BBit::Const(false);
        for (&x, &y) in a.iter().zip(b.iter()) {
            let xy = self.xor(x, y);
            out.push(self.xor(xy, carry));
            let and_xy = self.and(x, y);
            let and_cxy = self.and(carry, xy);
            carry = self.or(and_xy, and_cxy);
        }
        out
    }

    /// Equality as XNOR-reduce-AND, yielding a single bit.
    fn eq(&mut self, a: &[BBit], b: &[BBit]) -> BBit {
        let xnors: Vec<BBit> = a
            .iter()
            .zip(b.iter())
            .map(|(&x, &y)| self.xor(x, y).negate())
            .collect();
        self.and_reduce(&xnors)
    }

    pub(crate) fn lower_expr(
        &mut self,
        expr: &Expr,
        bits_of: &BTreeMap<String, Vec<Literal>>,
    ) -> Result<Vec<BBit>, IrError> {
        match expr {
            Expr::Const { width, value } => Ok((0..*width)
                .map(|k| BBit::Const((value >> k) & 1 == 1))
                .collect()),
            Expr::Signal(name) => bits_of
                .get(name)
                .map(|lits| lits.iter().map(|&l| BBit::Lit(l)).collect())
                .ok_or_else(|| IrError::UnknownSignal(name.clone())),
            Expr::Ite(c, t, e) => {
                let cond = self.lower_expr(c, bits_of)?;
                if cond.len() != 1 {
                    return Err(IrError::WidthMismatch {
                        context: "ite condition must be one bit".into(),
                    });
                }
                // A constant condition lowers only the live branch.
                match cond[0] {
                    BBit::Const(true) => self.lower_expr(t, bits_of),
                    BBit::Const(false) => self.lower_expr(e, bits_of),
                    cond_bit => {
                        let tb = self.lower_expr(t, bits_of)?;
                        let eb = self.lower_expr(e, bits_of)?;
                        if tb.len() != eb.len() {
                            return Err(IrError::WidthMismatch {
                                context: "ite branch widths differ".into(),
                            });
                        }
                        Ok(tb
                            .iter()
                            .zip(eb.iter())
                            .map(|(&x, &y)| self.mux(cond_bit, x, y))
                            .collect())
                    }
                }
            }
            Expr::Eq(a, b) => {
                let ab = self.lower_expr(a, bits_of)?;
                let bb = self.lower_expr(b, bits_of)?;
                if ab.len() != bb.len() {
                    return Err(IrError::WidthMismatch {
                        context: "eq operand widths differ".into(),
                    });
                }
                Ok(vec![self.eq(&ab, &bb)])
            }
            Expr::BvAdd(a, b) => {
                let ab = self.lower_expr(a, bits_of)?;
                let bb = self.lower_expr(b, bits_of)?;
                if ab.len() != bb.len() {
                    return Err(IrError::WidthMismatch {
                        context: "bvadd operand widths differ".into(),
                    });
                }
                Ok(self.add(&ab, &bb))
            }
            Expr::Extract { hi, lo, arg } => {
                let bits = self.lower_expr(arg, bits_of)?;
                if *lo > *hi || *hi as usize >= bits.len() {
                    return Err(IrError::BadExtract {
                        hi: *hi,
                        lo: *lo,
                        width: bits.len() as u32,
                    });
                }
                Ok(bits[*lo as usize..=*hi as usize].to_vec())
            }
            Expr::Not(a) => Ok(self
                .lower_expr(a, bits_of)?
                .into_iter()
                .map(BBit::negate)
                .collect()),
            Expr::And(a, b) => self.lower_binary(a, b, bits_of, Lowerer::and),
            Expr::Or(a, b) => self.lower_binary(a, b, bits_of, Lowerer::or),
            Expr::Xor(a, b) => self.lower_binary(a, b, bits_of, Lowerer::xor),
        }
    }

    fn lower_binary(
        &mut self,
        a: &Expr,
        b: &Expr,
        bits_of: &BTreeMap<String, Vec<Literal>>,
        gate: fn(&mut Lowerer, BBit, BBit) -> BBit,
    ) -> Result<Vec<BBit>, IrError> {
        let ab = self.lower_expr(a, bits_of)?;
        let bb = self.lower_expr(b, bits_of)?;
        if ab.len() != bb.len() {
            return Err(IrError::WidthMismatch {
                context: "bitwise operand widths differ".into(),
            });
        }
        Ok(ab
            .iter()
            .zip(bb.iter())
            .map(|(&x, &y)| gate(self, x, y))
            .collect())
    }

    /// Asserts `target == rhs`.
    fn equate(&mut self, target: Literal, rhs: BBit) {
        match rhs {
            BBit::Const(true) => self.clause(vec![target]),
            BBit::Const(false) => self.clause(vec![!target]),
            BBit::Lit(l) => {
                if l == target {
                    return;
                }
                if l == !target {
                    // Contradictory binding; encode unsatisfiability.
                    self.clause(vec![target]);
                    self.clause(vec![!target]);
                    return;
                }
                self.clause(vec![!target, l]);
                self.clause(vec![target, !l]);
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn clauses(&self) -> &[Clause] {
        &self.clauses
    }
}

/// The full lowering output. `frame_literals` binds every frame variable's
/// bits (LSB first), not just the published ones.
#[derive(Clone, Debug)]
pub struct BlastResult {
    pub cnf: CnfFormula,
    pub semantic_map: SemanticMap,
    pub control_depths: ControlDepthMap,
    pub frame_literals: BTreeMap<String, Vec<u32>>,
}

pub fn bitblast_tseytin(unrolled: &UnrolledDesign) -> Result<BlastResult, IrError> {
    // Frame variables first, in unroll order, bits LSB first.
    let mut bits_of: BTreeMap<String, Vec<Literal>> = BTreeMap::new();
    let mut frame_literals: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    let mut next_var = 1u32;
    for v in &unrolled.vars {
        let lits: Vec<Literal> = (0..v.width)
            .map(|_| {
                let l = Literal::positive(next_var);
                next_var += 1;
                l
            })
            .collect();
        frame_literals.insert(v.name.clone(), lits.iter().map(|l| l.var()).collect());
        bits_of.insert(v.name.clone(), lits);
    }

    // Semantic map: all observable bits of every frame, plus every control
    // signal's bits (control literals stay stable even when unobservable).
    let mut map = SemanticMap::new();
    let publish = |name: &str, lits: &[Literal], map: &mut SemanticMap| {
        if lits.len() == 1 {
            map.insert(name.to_string(), lits[0].var());
        } else {
            for (k, l) in lits.iter().enumerate() {
                map.insert(format!("{name}[{k}]"), l.var());
            }
        }
    };
    for obs in &unrolled.observable {
        for t in 1..=unrolled.bound {
            let key = frame_name(obs, t);
            let lits = bits_of
                .get(&key)
                .ok_or_else(|| IrError::UnknownSignal(key.clone()))?;
            publish(&key, lits, &mut map);
        }
    }
    for key in unrolled.control_depths.keys() {
        let lits = bits_of
            .get(key)
            .ok_or_else(|| IrError::UnmappedControl(key.clone()))?;
        publish(key, lits, &mut map);
    }

    let mut low = Lowerer::new(next_var);
    for (name, width, value) in &unrolled.init {
        let lits = &bits_of[name];
        for k in 0..*width {
            let lit = lits[k as usize];
            if (value >> k) & 1 == 1 {
                low.clause(vec![lit]);
            } else {
                low.clause(vec![!lit]);
            }
        }
    }
    for c in &unrolled.constraints {
        let rhs = low.lower_expr(&c.expr, &bits_of)?;
        if rhs.len() != c.width as usize {
            return Err(IrError::WidthMismatch {
                context: format!(
                    "transition for {} lowers to {} bits, expected {}",
                    c.target,
                    rhs.len(),
                    c.width
                ),
            });
        }
        let target_bits = bits_of
            .get(&c.target)
            .ok_or_else(|| IrError::UnknownSignal(c.target.clone()))?
            .clone();
        for (k, &bit) in rhs.iter().enumerate() {
            low.equate(target_bits[k], bit);
        }
    }

    let cnf = CnfFormula::new(low.next_var - 1, low.clauses.clone())
        .map_err(|e| IrError::Parse(format!("internal lowering produced bad CNF: {e}")))?;
    Ok(BlastResult {
        cnf,
        semantic_map: map,
        control_depths: ControlDepthMap::from_entries(unrolled.control_depths.clone()),
        frame_literals,
    })
}
