//! Bounded temporal property compilation: same-cycle implication, next-cycle
//! implication, and fixed-offset conjunction over observable signal bits,
//! aligned to a design's semantic map. Assert properties are negated
//! symbolically before encoding, so a satisfying assignment of the output is
//! a counterexample; cover properties encode the template itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Clause, CnfFormula, Literal};
use crate::ir::{frame_name, Expr, SemanticMap};

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("signal reference '{0}' does not resolve in the semantic map")]
    Unresolved(String),
    #[error("frame {frame} exceeds the unrolling bound {bound}")]
    FrameOverflow { frame: u32, bound: u32 },
    #[error("auxiliary base {aux_base} must exceed the largest mapped literal {max_literal}")]
    AuxBaseTooLow { aux_base: u32, max_literal: u32 },
    #[error("unsupported property operand: {0}")]
    Unsupported(String),
    #[error("multi-bit signal '{0}' used as a boolean; compare it with a constant")]
    WideSignal(String),
    #[error("concat offset must be at least 1")]
    BadOffset,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Assert,
    Cover,
}

/// The three bounded temporal operators: `A` and `B` hold in the same cycle,
/// `B` follows in the next cycle, or `B` holds a fixed offset later.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TemporalOp {
    Oi,
    Noi,
    Concat(u32),
}

#[derive(Clone, Debug)]
pub struct PropertySpec {
    pub kind: PropertyKind,
    pub op: TemporalOp,
    /// Base frame `i` for the left operand.
    pub frame: u32,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl PropertySpec {
    pub fn rhs_frame(&self) -> u32 {
        match self.op {
            TemporalOp::Oi => self.frame,
            TemporalOp::Noi => self.frame + 1,
            TemporalOp::Concat(n) => self.frame + n,
        }
    }

    pub fn to_json(&self) -> String {
        let (op, offset) = match self.op {
            TemporalOp::Oi => ("OI", None),
            TemporalOp::Noi => ("NOI", None),
            TemporalOp::Concat(n) => ("Concat", Some(n)),
        };
        let doc = PropertyDoc {
            kind: self.kind,
            op: op.to_string(),
            offset,
            frame: self.frame,
            lhs: crate::ir::sexpr::print_expr(&self.lhs),
            rhs: crate::ir::sexpr::print_expr(&self.rhs),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, PropertyError> {
        let doc: PropertyDoc = serde_json::from_str(text)?;
        let op = match doc.op.as_str() {
            "OI" | "oi" => TemporalOp::Oi,
            "NOI" | "noi" => TemporalOp::Noi,
            "Concat" | "concat" => {
                let n = doc.offset.ok_or(PropertyError::BadOffset)?;
                if n == 0 {
                    return Err(PropertyError::BadOffset);
                }
                TemporalOp::Concat(n)
            }
            other => return Err(PropertyError::Unsupported(format!("operator '{other}'"))),
        };
        let lhs = crate::ir::sexpr::parse_expr(&doc.lhs)
            .map_err(|e| PropertyError::Unsupported(e.to_string()))?;
        let rhs = crate::ir::sexpr::parse_expr(&doc.rhs)
            .map_err(|e| PropertyError::Unsupported(e.to_string()))?;
        Ok(PropertySpec {
            kind: doc.kind,
            op,
            frame: doc.frame,
            lhs,
            rhs,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PropertyDoc {
    kind: PropertyKind,
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<u32>,
    frame: u32,
    lhs: String,
    rhs: String,
}

/// Compiled property CNF. Variables below `aux_base` are semantic-map
/// literals shared with the design; `num_aux` fresh variables sit above.
#[derive(Clone, Debug)]
pub struct CompiledProperty {
    pub cnf: CnfFormula,
    pub aux_base: u32,
    pub num_aux: u32,
}

/// A property operand resolved to bit-level form, in negation normal form.
#[derive(Clone, Debug)]
enum BitFormula {
    Atom(Literal),
    And(Vec<BitFormula>),
    Or(Vec<BitFormula>),
}

impl BitFormula {
    fn negate(&self) -> BitFormula {
        match self {
            BitFormula::Atom(l) => BitFormula::Atom(!*l),
            BitFormula::And(cs) => BitFormula::Or(cs.iter().map(Self::negate).collect()),
            BitFormula::Or(cs) => BitFormula::And(cs.iter().map(Self::negate).collect()),
        }
    }
}

fn resolve_bool(expr: &Expr, frame: u32, map: &SemanticMap) -> Result<BitFormula, PropertyError> {
    match expr {
        Expr::Signal(name) => {
            let lits = map.literals_for(name, frame);
            match lits.len() {
                0 => Err(PropertyError::Unresolved(frame_name(name, frame))),
                1 => Ok(BitFormula::Atom(Literal::positive(lits[0]))),
                _ => Err(PropertyError::WideSignal(name.clone())),
            }
        }
        Expr::Eq(a, b) => {
            let (name, width, value) = match (&**a, &**b) {
                (Expr::Signal(n), Expr::Const { width, value })
                | (Expr::Const { width, value }, Expr::Signal(n)) => (n, *width, *value),
                _ => {
                    return Err(PropertyError::Unsupported(
                        "eq operands must be a signal and a constant".into(),
                    ))
                }
            };
            let lits = map.literals_for(name, frame);
            if lits.is_empty() {
                return Err(PropertyError::Unresolved(frame_name(name, frame)));
            }
            if lits.len() != width as usize {
                return Err(PropertyError::Unsupported(format!(
                    "constant width {width} does not match {}-bit signal '{name}'",
                    lits.len()
                )));
            }
            Ok(BitFormula::And(
                lits.iter()
                    .enumerate()
                    .map(|(k, &lit)| {
                        let l = Literal::positive(lit);
                        BitFormula::Atom(if (value >> k) & 1 == 1 { l } else { !l })
                    })
                    .collect(),
            ))
        }
        Expr::Not(a) => Ok(resolve_bool(a, frame, map)?.negate()),
        Expr::And(a, b) => Ok(BitFormula::And(vec![
            resolve_bool(a, frame, map)?,
            resolve_bool(b, frame, map)?,
        ])),
        Expr::Or(a, b) => Ok(BitFormula::Or(vec![
            resolve_bool(a, frame, map)?,
            resolve_bool(b, frame, map)?,
        ])),
        other => Err(PropertyError::Unsupported(format!(
            "operand {:?} (allowed: and/or/not/eq-with-constant over observable bits)",
            other
        ))),
    }
}

struct AuxEncoder {
    next_var: u32,
    clauses: Vec<Clause>,
}

impl AuxEncoder {
    /// Reduces a formula to a single literal, introducing a fresh defined
    /// variable (full biconditional definition) for compound nodes.
    fn literal_of(&mut self, f: &BitFormula) -> Literal {
        match f {
            BitFormula::Atom(l) => *l,
            BitFormula::And(cs) => {
                let lits: Vec<Literal> = cs.iter().map(|c| self.literal_of(c)).collect();
                let o = self.fresh();
                for &l in &lits {
                    self.clauses
                        .push(Clause::new(vec![!o, l]).expect("distinct vars"));
                }
                let mut back: Vec<Literal> = lits.iter().map(|&l| !l).collect();
                back.push(o);
                self.clauses.push(Clause::new(back).expect("distinct vars"));
                o
            }
            BitFormula::Or(cs) => {
                let lits: Vec<Literal> = cs.iter().map(|c| self.literal_of(c)).collect();
                let o = self.fresh();
                for &l in &lits {
                    self.clauses
                        .push(Clause::new(vec![o, !l]).expect("distinct vars"));
                }
                let mut fwd = lits;
                fwd.push(!o);
                self.clauses.push(Clause::new(fwd).expect("distinct vars"));
                o
            }
        }
    }

    fn fresh(&mut self) -> Literal {
        let v = self.next_var;
        self.next_var += 1;
        Literal::positive(v)
    }

    fn unit(&mut self, l: Literal) {
        self.clauses.push(Clause::new(vec![l]).expect("unit"));
    }
}

/// Compiles a property against a semantic map. `aux_base` is the first free
/// variable index (it must clear the map); `bound` is the unrolling depth
/// the map was built for.
pub fn compile_property(
    spec: &PropertySpec,
    map: &SemanticMap,
    aux_base: u32,
    bound: u32,
) -> Result<CompiledProperty, PropertyError> {
    if aux_base <= map.max_literal() {
        return Err(PropertyError::AuxBaseTooLow {
            aux_base,
            max_literal: map.max_literal(),
        });
    }
    if let TemporalOp::Concat(0) = spec.op {
        return Err(PropertyError::BadOffset);
    }
    if spec.frame == 0 || spec.frame > bound {
        return Err(PropertyError::FrameOverflow {
            frame: spec.frame,
            bound,
        });
    }
    let rhs_frame = spec.rhs_frame();
    if rhs_frame > bound {
        return Err(PropertyError::FrameOverflow {
            frame: rhs_frame,
            bound,
        });
    }

    let a = resolve_bool(&spec.lhs, spec.frame, map)?;
    let b = resolve_bool(&spec.rhs, rhs_frame, map)?;

    let mut enc = AuxEncoder {
        next_var: aux_base,
        clauses: Vec::new(),
    };
    match (spec.kind, spec.op) {
        // Template ¬A ∨ B; the negation A ∧ ¬B is formed symbolically.
        (PropertyKind::Assert, TemporalOp::Oi) | (PropertyKind::Assert, TemporalOp::Noi) => {
            let la = enc.literal_of(&a);
            enc.unit(la);
            let nb = b.negate();
            let lnb = enc.literal_of(&nb);
            enc.unit(lnb);
        }
        (PropertyKind::Cover, TemporalOp::Oi) | (PropertyKind::Cover, TemporalOp::Noi) => {
            let lna = enc.literal_of(&a.negate());
            let lb = enc.literal_of(&b);
            enc.clauses.push(
                Clause::new(vec![lna, lb])
                    .map_err(|e| PropertyError::Unsupported(e.to_string()))?,
            );
        }
        // Template A ∧ B; negation ¬A ∨ ¬B.
        (PropertyKind::Assert, TemporalOp::Concat(_)) => {
            let lna = enc.literal_of(&a.negate());
            let lnb = enc.literal_of(&b.negate());
            enc.clauses.push(
                Clause::new(vec![lna, lnb])
                    .map_err(|e| PropertyError::Unsupported(e.to_string()))?,
            );
        }
        (PropertyKind::Cover, TemporalOp::Concat(_)) => {
            let la = enc.literal_of(&a);
            let lb = enc.literal_of(&b);
            enc.unit(la);
            enc.unit(lb);
        }
    }

    let num_aux = enc.next_var - aux_base;
    let num_vars = aux_base - 1 + num_aux;
    let cnf = CnfFormula::new(num_vars, enc.clauses)
        .map_err(|e| PropertyError::Unsupported(format!("internal: {e}")))?;
    Ok(CompiledProperty {
        cnf,
        aux_base,
        num_aux,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::sexpr::parse_expr;

    /// Semantic map of the worked counter example: reset#1 -> 1,
    /// counter#2[0..2] -> 2..4.
    fn counter_map() -> SemanticMap {
        let mut map = SemanticMap::new();
        map.insert("reset#1".into(), 1);
        map.insert("counter#2[0]".into(), 2);
        map.insert("counter#2[1]".into(), 3);
        map.insert("counter#2[2]".into(), 4);
        map
    }

    fn clause_set(cnf: &CnfFormula) -> Vec<Vec<i32>> {
        cnf.clauses()
            .iter()
            .map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect())
            .collect()
    }

    #[test]
    fn assert_oi_with_atomic_bits() {
        let mut map = SemanticMap::new();
        map.insert("a#2".into(), 5);
        map.insert("b#2".into(), 9);
        let spec = PropertySpec {
            kind: PropertyKind::Assert,
            op: TemporalOp::Oi,
            frame: 2,
            lhs: parse_expr("a").unwrap(),
            rhs: parse_expr("b").unwrap(),
        };
        let compiled = compile_property(&spec, &map, 10, 3).unwrap();
        assert_eq!(clause_set(&compiled.cnf), vec![vec![5], vec![-9]]);
        assert_eq!(compiled.num_aux, 0);
    }

    #[test]
    fn assert_counter_reset_matches_worked_encoding() {
        // reset#1 -> counter#2 = 0, negated: (1) and aux defined as 2 v 3 v 4.
        let spec = PropertySpec {
            kind: PropertyKind::Assert,
            op: TemporalOp::Noi,
            frame: 1,
            lhs: parse_expr("reset").unwrap(),
            rhs: parse_expr("(= counter #b000)").unwrap(),
        };
        let compiled = compile_property(&spec, &counter_map(), 5, 2).unwrap();
        assert_eq!(compiled.num_aux, 1);
        let clauses = clause_set(&compiled.cnf);
        assert!(clauses.contains(&vec![1]), "unit on the antecedent");
        assert!(clauses.contains(&vec![5]), "unit on the defined negation");
        // Full biconditional definition of aux 5 = (2 v 3 v 4).
        assert!(clauses.contains(&vec![-2, 5]));
        assert!(clauses.contains(&vec![-3, 5]));
        assert!(clauses.contains(&vec![-4, 5]));
        assert!(clauses.contains(&vec![2, 3, 4, -5]));
        assert_eq!(clauses.len(), 6);
    }

    #[test]
    fn cover_concat_of_atoms_is_two_units() {
        let mut map = SemanticMap::new();
        map.insert("a#1".into(), 3);
        map.insert("b#3".into(), 7);
        let spec = PropertySpec {
            kind: PropertyKind::Cover,
            op: TemporalOp::Concat(2),
            frame: 1,
            lhs: parse_expr("a").unwrap(),
            rhs: parse_expr("b").unwrap(),
        };
        let compiled = compile_property(&spec, &map, 8, 3).unwrap();
        assert_eq!(clause_set(&compiled.cnf), vec![vec![3], vec![7]]);
    }

    #[test]
    fn frame_overflow_and_aux_base_are_checked() {
        let spec = PropertySpec {
            kind: PropertyKind::Assert,
            op: TemporalOp::Noi,
            frame: 2,
            lhs: parse_expr("reset").unwrap(),
            rhs: parse_expr("(= counter #b000)").unwrap(),
        };
        assert!(matches!(
            compile_property(&spec, &counter_map(), 10, 2),
            Err(PropertyError::FrameOverflow { frame: 3, bound: 2 })
        ));
        let ok_spec = PropertySpec { frame: 1, ..spec };
        assert!(matches!(
            compile_property(&ok_spec, &counter_map(), 3, 2),
            Err(PropertyError::AuxBaseTooLow {
                aux_base: 3,
                max_literal: 4
            })
        ));
    }

    #[test]
    fn unresolved_reference_is_reported() {
        let spec = PropertySpec {
            kind: PropertyKind::Cover,
            op: TemporalOp::Oi,
            frame: 1,
            lhs: parse_expr("ghost").unwrap(),
            rhs: parse_expr("reset").unwrap(),
        };
        assert!(matches!(
            compile_property(&spec, &counter_map(), 10, 2),
            Err(PropertyError::Unresolved(ref s)) if s == "ghost#1"
        ));
    }

    #[test]
    fn json_round_trip() {
        let spec = PropertySpec {
            kind: PropertyKind::Assert,
            op: TemporalOp::Concat(2),
            frame: 1,
            lhs: parse_expr("(and a (not b))").unwrap(),
            rhs: parse_expr("(= counter #b01)").unwrap(),
        };
        let back = PropertySpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back.kind, spec.kind);
        assert_eq!(back.op, spec.op);
        assert_eq!(back.frame, spec.frame);
        assert_eq!(back.lhs, spec.lhs);
        assert_eq!(back.rhs, spec.rhs);
    }

    /// Brute force: the compiled CNF (with its unique auxiliary extension)
    /// is satisfied exactly when the assert template is violated / the cover
    /// template holds.
    #[test]
    fn compiled_semantics_match_template_by_enumeration() {
        let map = counter_map();
        let lhs = parse_expr("reset").unwrap();
        let rhs = parse_expr("(= counter #b000)").unwrap();
        for kind in [PropertyKind::Assert, PropertyKind::Cover] {
            for op in [TemporalOp::Oi, TemporalOp::Noi] {
                // Both operands resolve at fixed frames under this map, so
                // OI at frame 1 is only well-formed for NOI-style shapes;
                // use NOI for reset->counter and skip unresolvable combos.
                if matches!(op, TemporalOp::Oi) {
                    continue;
                }
                let spec = PropertySpec {
                    kind,
                    op,
                    frame: 1,
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                };
                let compiled = compile_property(&spec, &map, 5, 2).unwrap();
                let total_vars = compiled.cnf.num_variables();
                for assignment in 0u32..(1 << 4) {
                    let base = |v: u32| (assignment >> (v - 1)) & 1 == 1;
                    let template = !base(1) || (!base(2) && !base(3) && !base(4));
                    let expected = match kind {
                        PropertyKind::Assert => !template,
                        PropertyKind::Cover => template,
                    };
                    // Existential check over the auxiliary extension.
                    let aux_count = total_vars - 4;
                    let mut satisfiable = false;
                    for aux in 0u32..(1 << aux_count) {
                        let value = |v: u32| {
                            if v <= 4 {
                                base(v)
                            } else {
                                (aux >> (v - 5)) & 1 == 1
                            }
                        };
                        if compiled.cnf.clauses().iter().all(|c| {
                            c.literals()
                                .iter()
                                .any(|l| value(l.var()) == l.is_positive())
                        }) {
                            satisfiable = true;
                            break;
                        }
                    }
                    assert_eq!(
                        satisfiable, expected,
                        "{kind:?} {op:?} assignment {assignment:04b}"
                    );
                }
            }
        }
    }
}
