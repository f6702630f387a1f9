//! Generator for the mux-cascade benchmark family: an accumulator whose
//! next state runs through a nest of control-selected branches, one control
//! input per nesting level. The inner branch doubles-and-increments the
//! accumulator; level-k else branches add a level constant. Covering an
//! inner-path value forces a search over the per-frame control choices,
//! which the control-guided heuristic resolves with decision locality while
//! plain occurrence counting wanders.

use std::collections::BTreeMap;

use super::design::{DesignModule, StateSignal};
use super::expr::Expr;
use crate::property::{PropertyKind, PropertySpec, TemporalOp};

const LEVEL_CONSTANTS: [u64; 8] = [4, 6, 10, 12, 5, 11, 7, 14];

/// Builds a cascade of `depth` controls over a `width`-bit accumulator.
/// Control `ck` sits at ite depth `k`.
pub fn mux_cascade(depth: u32, width: u32) -> DesignModule {
    assert!((1..=8).contains(&depth) && (3..=8).contains(&width));
    let inputs: Vec<(String, u32)> = (1..=depth).map(|k| (format!("c{k}"), 1)).collect();
    let mask = (1u64 << width) - 1;
    let acc = || Box::new(Expr::Signal("acc".into()));
    let mut expr = Expr::BvAdd(
        Box::new(Expr::BvAdd(acc(), acc())),
        Box::new(Expr::Const { width, value: 1 }),
    );
    for k in (1..=depth).rev() {
        let alt = Expr::BvAdd(
            acc(),
            Box::new(Expr::Const {
                width,
                value: LEVEL_CONSTANTS[(k - 1) as usize] & mask,
            }),
        );
        expr = Expr::Ite(
            Box::new(Expr::Eq(
                Box::new(Expr::Signal(format!("c{k}"))),
                Box::new(Expr::Const { width: 1, value: 1 }),
            )),
            Box::new(expr),
            Box::new(alt),
        );
    }
    let module = DesignModule {
        id: cascade_id(depth, width),
        inputs,
        signals: vec![StateSignal {
            name: "acc".into(),
            width,
            init: None,
            next: expr,
        }],
        observable: vec!["acc".into()],
    };
    debug_assert!(module.validate().is_ok());
    module
}

fn cascade_id(depth: u32, width: u32) -> [u8; 32] {
    let mut id = [0u8; 32];
    id[0] = 0xCA;
    id[1] = depth as u8;
    id[2] = width as u8;
    id
}

/// The accumulator value reached from zero after `bound - 1` steps with
/// every control asserted (the all-inner path), computed by concrete
/// execution.
pub fn reachable_target(module: &DesignModule, depth: u32, bound: u32) -> u64 {
    let mut inputs = BTreeMap::new();
    for k in 1..=depth {
        inputs.insert(format!("c{k}"), vec![1u64; bound as usize]);
    }
    let mut initial = BTreeMap::new();
    initial.insert("acc".to_string(), 0u64);
    let values = module
        .evaluate(bound, &inputs, &initial)
        .expect("cascade evaluates");
    values[&format!("acc#{bound}")]
}

/// The benchmark cover property: start at zero and reach the all-inner-path
/// value `bound - 1` cycles later. For a single frame the cover degenerates
/// to the starting condition itself.
pub fn cascade_cover_property(
    module: &DesignModule,
    depth: u32,
    width: u32,
    bound: u32,
) -> PropertySpec {
    let zero = Expr::Eq(
        Box::new(Expr::Signal("acc".into())),
        Box::new(Expr::Const { width, value: 0 }),
    );
    if bound == 1 {
        return PropertySpec {
            kind: PropertyKind::Cover,
            op: TemporalOp::Oi,
            frame: 1,
            lhs: zero.clone(),
            rhs: zero,
        };
    }
    let target = reachable_target(module, depth, bound);
    PropertySpec {
        kind: PropertyKind::Cover,
        op: TemporalOp::Concat(bound - 1),
        frame: 1,
        lhs: zero,
        rhs: Expr::Eq(
            Box::new(Expr::Signal("acc".into())),
            Box::new(Expr::Const {
                width,
                value: target,
            }),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_control_depths_match_levels() {
        for depth in 1..=4 {
            let m = mux_cascade(depth, 4);
            m.validate().unwrap();
            let depths = m.control_depths();
            for k in 1..=depth {
                assert_eq!(
                    depths.get(&format!("c{k}")),
                    Some(&k),
                    "depth {depth}, control {k}"
                );
            }
            assert_eq!(depths.len(), depth as usize);
        }
    }

    #[test]
    fn all_inner_path_doubles_and_increments() {
        let m = mux_cascade(3, 4);
        assert_eq!(reachable_target(&m, 3, 2), 1);
        assert_eq!(reachable_target(&m, 3, 3), 3);
    }

    #[test]
    fn property_pins_start_and_target() {
        let m = mux_cascade(2, 4);
        let p = cascade_cover_property(&m, 2, 4, 3);
        assert_eq!(p.kind, PropertyKind::Cover);
        assert_eq!(p.op, TemporalOp::Concat(2));
        let p1 = cascade_cover_property(&m, 2, 4, 1);
        assert_eq!(p1.op, TemporalOp::Oi);
    }
}
