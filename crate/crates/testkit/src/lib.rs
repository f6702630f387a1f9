//! Test-only oracles and generators: brute-force satisfiability checks, an
//! independent recursive DPLL, random and exhaustive CNF families, a
//! word-level bounded-model-checking oracle, and two-party harnesses. None
//! of this code shares logic with the solver or encoder paths it checks.

use std::collections::BTreeMap;

use rand::Rng;

use hwpv::backend::{SharedBackend, TripleSource};
use hwpv::formula::{Clause, ClauseMatrix, CnfFormula, Literal};
use hwpv::ir::{DesignModule, Expr, StateSignal};
use hwpv::property::{PropertyKind, PropertySpec, TemporalOp};
use hwpv::transport::{DuplexChannel, Role};

pub mod chi;

/// Exhaustive satisfiability by enumerating all assignments.
pub fn brute_force_sat(formula: &CnfFormula) -> bool {
    let n = formula.num_variables();
    assert!(n <= 24, "brute force capped at 24 variables");
    'outer: for assignment in 0u64..(1u64 << n) {
        for clause in formula.clauses() {
            let satisfied = clause
                .literals()
                .iter()
                .any(|l| ((assignment >> (l.var() - 1)) & 1 == 1) == l.is_positive());
            if !satisfied {
                continue 'outer;
            }
        }
        return true;
    }
    false
}

/// Matrix-level brute force; tautology padding columns (both bits set on one
/// row) are satisfied by either value of that variable.
pub fn brute_force_sat_matrix(mat: &ClauseMatrix) -> bool {
    let n = mat.num_variables();
    assert!(n <= 24);
    'outer: for assignment in 0u64..(1u64 << n) {
        for j in 0..mat.num_clauses() as usize {
            let mut satisfied = false;
            for var in 1..=n {
                let value = (assignment >> (var - 1)) & 1 == 1;
                if (mat.pos_bit(var, j) && value) || (mat.neg_bit(var, j) && !value) {
                    satisfied = true;
                    break;
                }
            }
            if !satisfied {
                continue 'outer;
            }
        }
        return true;
    }
    false
}

/// Independent recursive DPLL with unit propagation, for formulas whose
/// variable count defeats plain enumeration. Used only as an oracle.
pub fn oracle_dpll(formula: &CnfFormula) -> bool {
    let clauses: Vec<Vec<i32>> = formula
        .clauses()
        .iter()
        .map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect())
        .collect();
    let mut assignment = vec![0i8; formula.num_variables() as usize + 1];
    dpll_rec(&clauses, &mut assignment)
}

fn dpll_rec(clauses: &[Vec<i32>], assignment: &mut Vec<i8>) -> bool {
    // Propagate units to fixpoint.
    let mut touched: Vec<u32> = Vec::new();
    loop {
        let mut unit: Option<i32> = None;
        for clause in clauses {
            let mut unassigned = None;
            let mut count = 0;
            let mut satisfied = false;
            for &lit in clause {
                let var = lit.unsigned_abs() as usize;
                match assignment[var] {
                    0 => {
                        unassigned = Some(lit);
                        count += 1;
                    }
                    v => {
                        if (v > 0) == (lit > 0) {
                            satisfied = true;
                            break;
                        }
                    }
                }
            }
            if satisfied {
                continue;
            }
            if count == 0 {
                for var in touched {
                    assignment[var as usize] = 0;
                }
                return false;
            }
            if count == 1 {
                unit = unassigned;
                break;
            }
        }
        match unit {
            Some(lit) => {
                let var = lit.unsigned_abs();
                assignment[var as usize] = if lit > 0 { 1 } else { -1 };
                touched.push(var);
            }
            None => break,
        }
    }
    let next = assignment.iter().skip(1).position(|&v| v == 0);
    let result = match next {
        None => {
            // Complete assignment with no falsified clause.
            clauses.iter().all(|clause| {
                clause
                    .iter()
                    .any(|&lit| (assignment[lit.unsigned_abs() as usize] > 0) == (lit > 0))
            })
        }
        Some(idx) => {
            let var = idx + 1;
            let mut found = false;
            for value in [1i8, -1] {
                assignment[var] = value;
                if dpll_rec(clauses, assignment) {
                    found = true;
                    break;
                }
            }
            if !found {
                assignment[var] = 0;
            }
            found
        }
    };
    if !result {
        for var in touched {
            assignment[var as usize] = 0;
        }
    }
    result
}

/// Evaluates a bounded temporal property template over a concrete trace.
pub fn template_holds(
    module: &DesignModule,
    values: &BTreeMap<String, u64>,
    property: &PropertySpec,
) -> bool {
    let eval_at = |expr: &Expr, frame: u32| -> bool {
        let env = |name: &str| -> Option<(u32, u64)> {
            let width = module.signal_width(name)?;
            values
                .get(&hwpv::ir::frame_name(name, frame))
                .map(|&v| (width, v))
        };
        let (w, v) = expr.eval(&env).expect("property references resolve");
        assert_eq!(w, 1, "property operand must be boolean");
        v & 1 == 1
    };
    let a = eval_at(&property.lhs, property.frame);
    let b = eval_at(&property.rhs, property.rhs_frame());
    match property.op {
        TemporalOp::Oi | TemporalOp::Noi => !a || b,
        TemporalOp::Concat(_) => a && b,
    }
}

/// Word-level bounded model checking by exhaustive input enumeration:
/// returns whether `design AND compiled-property` is satisfiable, i.e. a
/// counterexample exists for an assert or a witness exists for a cover.
pub fn bmc_oracle(module: &DesignModule, bound: u32, property: &PropertySpec) -> bool {
    let mut free: Vec<(String, u32, bool)> = Vec::new();
    for (name, width) in &module.inputs {
        free.push((name.clone(), *width, true));
    }
    for signal in &module.signals {
        if signal.init.is_none() {
            free.push((signal.name.clone(), signal.width, false));
        }
    }
    let input_bits: u32 = free
        .iter()
        .map(|(_, w, is_input)| if *is_input { w * bound } else { *w })
        .sum();
    assert!(
        input_bits <= 24,
        "bmc oracle capped at 24 free bits, got {input_bits}"
    );
    for assignment in 0u64..(1u64 << input_bits) {
        let mut cursor = 0;
        let mut take = |width: u32| -> u64 {
            let v = (assignment >> cursor) & ((1u64 << width) - 1);
            cursor += width;
            v
        };
        let mut inputs = BTreeMap::new();
        let mut initial = BTreeMap::new();
        for (name, width, is_input) in &free {
            if *is_input {
                inputs.insert(
                    name.clone(),
                    (0..bound).map(|_| take(*width)).collect::<Vec<u64>>(),
                );
            } else {
                initial.insert(name.clone(), take(*width));
            }
        }
        let values = module
            .evaluate(bound, &inputs, &initial)
            .expect("evaluates");
        let holds = template_holds(module, &values, property);
        let hit = match property.kind {
            PropertyKind::Assert => !holds,
            PropertyKind::Cover => holds,
        };
        if hit {
            return true;
        }
    }
    false
}

/// Runs one closure per party over an in-process pair of shared backends
/// with correlated dealer triples.
pub fn run_two_party<T, F, G>(dealer_seed: [u8; 32], vendor_fn: F, user_fn: G) -> (T, T)
where
    T: Send + 'static,
    F: FnOnce(&mut SharedBackend<DuplexChannel>) -> T + Send + 'static,
    G: FnOnce(&mut SharedBackend<DuplexChannel>) -> T + Send + 'static,
{
    let (ca, cb) = DuplexChannel::pair();
    let vendor = std::thread::spawn(move || {
        let mut backend = SharedBackend::new(
            ca,
            Role::Vendor,
            [0x10; 32],
            TripleSource::dealer(dealer_seed, Role::Vendor),
        );
        vendor_fn(&mut backend)
    });
    let user = std::thread::spawn(move || {
        let mut backend = SharedBackend::new(
            cb,
            Role::User,
            [0x20; 32],
            TripleSource::dealer(dealer_seed, Role::User),
        );
        user_fn(&mut backend)
    });
    (vendor.join().unwrap(), user.join().unwrap())
}

/// Random general CNF: clause widths 1..=max_width, no duplicate or
/// contradictory literals within a clause.
pub fn random_cnf<R: Rng>(
    rng: &mut R,
    num_vars: u32,
    num_clauses: usize,
    max_width: u32,
) -> CnfFormula {
    let mut clauses = Vec::with_capacity(num_clauses);
    for _ in 0..num_clauses {
        let width = rng.gen_range(1..=max_width.min(num_vars));
        let mut vars: Vec<u32> = (1..=num_vars).collect();
        for k in 0..width as usize {
            let pick = rng.gen_range(k..vars.len());
            vars.swap(k, pick);
        }
        let literals: Vec<Literal> = vars[..width as usize]
            .iter()
            .map(|&v| Literal::new(v, rng.gen()))
            .collect();
        clauses.push(Clause::new(literals).expect("distinct variables"));
    }
    CnfFormula::new(num_vars, clauses).expect("in range")
}

/// The exhaustive solver-oracle family: every clause set of size at most 4
/// over the width-<=2 universe on 3 variables, every set of size at most 2
/// over the width-<=3 universe on 4 variables, and every set of size 5 or 6
/// over the universe on 2 variables (exercising the full clause-count range).
pub fn exhaustive_family() -> Vec<CnfFormula> {
    let mut out = Vec::new();
    let u3 = clause_universe(3, 2);
    push_subsets(&mut out, 3, &u3, 0, 4);
    let u4 = clause_universe(4, 3);
    push_subsets(&mut out, 4, &u4, 0, 2);
    let u2 = clause_universe(2, 2);
    push_subsets(&mut out, 2, &u2, 5, 6);
    out
}

/// All clauses over `1..=n` with width `1..=max_width`.
fn clause_universe(n: u32, max_width: u32) -> Vec<Clause> {
    let mut out = Vec::new();
    let literals: Vec<Literal> = (1..=n)
        .flat_map(|v| [Literal::positive(v), Literal::negative(v)])
        .collect();
    let count = literals.len();
    for mask in 1u32..(1 << count) {
        if mask.count_ones() > max_width {
            continue;
        }
        let lits: Vec<Literal> = (0..count)
            .filter(|k| (mask >> k) & 1 == 1)
            .map(|k| literals[k])
            .collect();
        if let Ok(clause) = Clause::new(lits) {
            out.push(clause);
        }
    }
    out
}

fn push_subsets(
    out: &mut Vec<CnfFormula>,
    num_vars: u32,
    universe: &[Clause],
    min_size: usize,
    max_size: usize,
) {
    let mut stack: Vec<usize> = Vec::new();
    fn rec(
        out: &mut Vec<CnfFormula>,
        num_vars: u32,
        universe: &[Clause],
        stack: &mut Vec<usize>,
        start: usize,
        min_size: usize,
        max_size: usize,
    ) {
        if stack.len() >= min_size {
            let clauses: Vec<Clause> = stack.iter().map(|&k| universe[k].clone()).collect();
            out.push(CnfFormula::new(num_vars, clauses).expect("in range"));
        }
        if stack.len() == max_size {
            return;
        }
        for k in start..universe.len() {
            stack.push(k);
            rec(out, num_vars, universe, stack, k + 1, min_size, max_size);
            stack.pop();
        }
    }
    rec(out, num_vars, universe, &mut stack, 0, min_size, max_size);
}

/// A design with several independent next-state cones, for pruning tests.
/// Total frame bits stay small enough for the BMC oracle.
pub fn random_multi_cone_module<R: Rng>(rng: &mut R) -> (DesignModule, Vec<Vec<String>>) {
    let cone_count = rng.gen_range(2..=3);
    let mut inputs = Vec::new();
    let mut signals = Vec::new();
    let mut cones = Vec::new();
    for c in 0..cone_count {
        let input = format!("in{c}");
        inputs.push((input.clone(), 1));
        let chain = rng.gen_range(1..=2);
        let mut members = vec![input.clone()];
        let mut prev = input;
        for s in 0..chain {
            let name = format!("s{c}_{s}");
            let next = match rng.gen_range(0..3) {
                0 => Expr::Not(Box::new(Expr::Signal(prev.clone()))),
                1 => Expr::Ite(
                    Box::new(Expr::Signal(prev.clone())),
                    Box::new(Expr::Const { width: 1, value: 1 }),
                    Box::new(Expr::Signal(name.clone())),
                ),
                _ => Expr::Xor(
                    Box::new(Expr::Signal(prev.clone())),
                    Box::new(Expr::Signal(name.clone())),
                ),
            };
            signals.push(StateSignal {
                name: name.clone(),
                width: 1,
                init: if rng.gen_bool(0.5) {
                    Some(rng.gen_range(0..2))
                } else {
                    None
                },
                next,
            });
            members.push(name.clone());
            prev = name;
        }
        cones.push(members);
    }
    let observable = signals.iter().map(|s| s.name.clone()).collect();
    let module = DesignModule {
        id: [0xAB; 32],
        inputs,
        signals,
        observable,
    };
    module.validate().expect("generated module is well-formed");
    (module, cones)
}

/// A small random well-typed design for evaluator/CNF equivalence checks.
pub fn random_small_module<R: Rng>(rng: &mut R) -> DesignModule {
    let num_inputs = rng.gen_range(1..=2);
    let num_signals = rng.gen_range(1..=2);
    let mut widths: Vec<(String, u32)> = Vec::new();
    let mut inputs = Vec::new();
    for k in 0..num_inputs {
        let w = rng.gen_range(1..=3);
        inputs.push((format!("in{k}"), w));
        widths.push((format!("in{k}"), w));
    }
    let mut names = Vec::new();
    for k in 0..num_signals {
        let w = rng.gen_range(1..=3);
        names.push((format!("st{k}"), w));
        widths.push((format!("st{k}"), w));
    }
    let signals = names
        .iter()
        .map(|(name, w)| StateSignal {
            name: name.clone(),
            width: *w,
            init: if rng.gen_bool(0.4) {
                Some(rng.gen_range(0..(1u64 << w)))
            } else {
                None
            },
            next: random_expr(rng, *w, 3, &widths),
        })
        .collect();
    let observable = names.iter().map(|(n, _)| n.clone()).collect();
    let module = DesignModule {
        id: [0xCD; 32],
        inputs,
        signals,
        observable,
    };
    module.validate().expect("generated module is well-formed");
    module
}

fn random_expr<R: Rng>(rng: &mut R, width: u32, depth: u32, widths: &[(String, u32)]) -> Expr {
    let same_width: Vec<&String> = widths
        .iter()
        .filter(|(_, w)| *w == width)
        .map(|(n, _)| n)
        .collect();
    if depth == 0 || rng.gen_bool(0.25) {
        if !same_width.is_empty() && rng.gen_bool(0.7) {
            return Expr::Signal(same_width[rng.gen_range(0..same_width.len())].clone());
        }
        return Expr::Const {
            width,
            value: rng.gen_range(0..(1u64 << width)),
        };
    }
    match rng.gen_range(0..6) {
        0 => Expr::Ite(
            Box::new(random_expr(rng, 1, depth - 1, widths)),
            Box::new(random_expr(rng, width, depth - 1, widths)),
            Box::new(random_expr(rng, width, depth - 1, widths)),
        ),
        1 => Expr::BvAdd(
            Box::new(random_expr(rng, width, depth - 1, widths)),
            Box::new(random_expr(rng, width, depth - 1, widths)),
        ),
        2 => Expr::Not(Box::new(random_expr(rng, width, depth - 1, widths))),
        3 => Expr::Xor(
            Box::new(random_expr(rng, width, depth - 1, widths)),
            Box::new(random_expr(rng, width, depth - 1, widths)),
        ),
        4 if width == 1 => {
            let w = rng.gen_range(1..=3);
            Expr::Eq(
                Box::new(random_expr(rng, w, depth - 1, widths)),
                Box::new(random_expr(rng, w, depth - 1, widths)),
            )
        }
        _ => Expr::And(
            Box::new(random_expr(rng, width, depth - 1, widths)),
            Box::new(random_expr(rng, width, depth - 1, widths)),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn brute_force_agrees_with_dpll_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(0..=10);
            let f = random_cnf(&mut rng, n, m, 3);
            assert_eq!(brute_force_sat(&f), oracle_dpll(&f), "{f:?}");
        }
    }

    #[test]
    fn exhaustive_family_bounds() {
        let family = exhaustive_family();
        assert!(family.len() > 5_000, "family has {} formulas", family.len());
        assert!(family
            .iter()
            .all(|f| f.num_variables() <= 4 && f.num_clauses() <= 6));
        assert!(family.iter().any(|f| f.num_clauses() == 6));
    }

    #[test]
    fn bmc_oracle_counter_reset() {
        use hwpv::ir::sexpr::parse_expr;
        let module = DesignModule {
            id: [0; 32],
            inputs: vec![("reset".into(), 1), ("enable".into(), 1)],
            signals: vec![StateSignal {
                name: "counter".into(),
                width: 3,
                init: None,
                next: parse_expr(
                    "(ite (= reset #b1) #b000 (ite (= enable #b1) (bvadd counter #b010) (bvadd counter #b001)))",
                )
                .unwrap(),
            }],
            observable: vec!["reset".into(), "counter".into()],
        };
        let assert_reset = PropertySpec {
            kind: PropertyKind::Assert,
            op: TemporalOp::Noi,
            frame: 1,
            lhs: parse_expr("reset").unwrap(),
            rhs: parse_expr("(= counter #b000)").unwrap(),
        };
        // The property holds, so no counterexample exists.
        assert!(!bmc_oracle(&module, 2, &assert_reset));
        // The buggy variant (reset drives 1) has a counterexample.
        let mut buggy = module.clone();
        buggy.signals[0].next = parse_expr(
            "(ite (= reset #b1) #b001 (ite (= enable #b1) (bvadd counter #b010) (bvadd counter #b001)))",
        )
        .unwrap();
        assert!(bmc_oracle(&buggy, 2, &assert_reset));
    }
}
