//! The control-literal priority list handed to the solver's guided decision
//! step. The list is ordered lowest priority first; the solver's overwrite
//! scan makes the last live entry win.

use serde::{Deserialize, Serialize};

use super::bitblast::{ControlDepthMap, SemanticMap};
use super::design::split_frame_name;
use super::IrError;

/// Ordered control-literal indices, lowest priority first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicSet(pub Vec<u32>);

impl HeuristicSet {
    pub fn literals(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, IrError> {
        Ok(HeuristicSet(serde_json::from_str(text)?))
    }
}

/// Builds the priority list from the per-frame control depths.
///
/// Sort key, in list order (ascending priority): frame ascending (later
/// frames dominate), then depth descending (outer conditions dominate), then
/// literal index ascending as the documented tie-break.
pub fn build_heuristic_order(
    depths: &ControlDepthMap,
    map: &SemanticMap,
    bound: u32,
) -> Result<HeuristicSet, IrError> {
    let mut entries: Vec<(u32, u32, u32)> = Vec::new();
    for (key, depth) in depths.entries() {
        let (signal, frame) = split_frame_name(key)
            .ok_or_else(|| IrError::Parse(format!("bad control key '{key}'")))?;
        if frame > bound {
            return Err(IrError::Parse(format!(
                "control entry {key} exceeds bound {bound}"
            )));
        }
        let literals = map.literals_for(signal, frame);
        if literals.is_empty() {
            return Err(IrError::UnmappedControl(key.clone()));
        }
        for lit in literals {
            entries.push((frame, depth, lit));
        }
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    Ok(HeuristicSet(
        entries.into_iter().map(|(_, _, lit)| lit).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::bitblast::bitblast_tseytin;
    use crate::ir::design::tests::counter_module;

    #[test]
    fn counter_priority_order_matches_later_frame_then_outer_depth() {
        let unrolled = counter_module().unroll(2).unwrap();
        let blast = bitblast_tseytin(&unrolled).unwrap();
        let h = build_heuristic_order(&blast.control_depths, &blast.semantic_map, 2).unwrap();
        let map = &blast.semantic_map;
        let expected = vec![
            map.get("enable#1").unwrap(),
            map.get("reset#1").unwrap(),
            map.get("enable#2").unwrap(),
            map.get("reset#2").unwrap(),
        ];
        assert_eq!(
            h.literals(),
            expected.as_slice(),
            "lowest priority first; reset#2 on top"
        );
    }

    #[test]
    fn singleton_control_single_frame() {
        let mut m = counter_module();
        m.inputs.retain(|(n, _)| n == "reset");
        m.signals[0].next =
            crate::ir::sexpr::parse_expr("(ite (= reset #b1) #b000 counter)").unwrap();
        let blast = bitblast_tseytin(&m.unroll(1).unwrap()).unwrap();
        let h = build_heuristic_order(&blast.control_depths, &blast.semantic_map, 1).unwrap();
        assert_eq!(h.literals(), &[blast.semantic_map.get("reset#1").unwrap()]);
    }

    #[test]
    fn equal_depth_ties_break_by_ascending_literal() {
        use crate::ir::design::{DesignModule, StateSignal};
        use crate::ir::sexpr::parse_expr;
        // Two independent outermost conditions in one frame: same depth.
        let m = DesignModule {
            id: [0; 32],
            inputs: vec![("p".into(), 1), ("q".into(), 1)],
            signals: vec![
                StateSignal {
                    name: "x".into(),
                    width: 1,
                    init: None,
                    next: parse_expr("(ite p #b1 x)").unwrap(),
                },
                StateSignal {
                    name: "y".into(),
                    width: 1,
                    init: None,
                    next: parse_expr("(ite q #b0 y)").unwrap(),
                },
            ],
            observable: vec!["x".into()],
        };
        let blast = bitblast_tseytin(&m.unroll(1).unwrap()).unwrap();
        let h = build_heuristic_order(&blast.control_depths, &blast.semantic_map, 1).unwrap();
        let p = blast.semantic_map.get("p#1").unwrap();
        let q = blast.semantic_map.get("q#1").unwrap();
        let mut expected = vec![p, q];
        expected.sort_unstable();
        assert_eq!(h.literals(), expected.as_slice());
    }

    #[test]
    fn unmapped_control_is_an_error() {
        let unrolled = counter_module().unroll(2).unwrap();
        let blast = bitblast_tseytin(&unrolled).unwrap();
        let empty = SemanticMap::new();
        assert!(matches!(
            build_heuristic_order(&blast.control_depths, &empty, 2),
            Err(IrError::UnmappedControl(_))
        ));
    }

    #[test]
    fn heuristic_set_json_round_trip() {
        let h = HeuristicSet(vec![2, 1, 7, 6]);
        assert_eq!(h.to_json(), "[2,1,7,6]");
        assert_eq!(HeuristicSet::from_json("[2,1,7,6]").unwrap(), h);
    }
}
