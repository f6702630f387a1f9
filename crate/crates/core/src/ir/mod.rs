//! Word-level design representation and its reduction to CNF: cone-of-
//! influence pruning, time-frame unrolling, bit-blasting with Tseytin
//! encoding, semantic maps, and control-depth extraction.

use thiserror::Error;

mod bitblast;
pub mod cascade;
mod design;
mod expr;
mod heuristic;
pub mod sexpr;

pub use bitblast::{bitblast_tseytin, BlastResult, ControlDepthMap, SemanticMap};
pub use design::{
    frame_name, split_frame_name, DesignId, DesignModule, FrameVar, StateSignal,
    TransitionConstraint, UnrolledDesign,
};
pub use expr::Expr;
pub use heuristic::{build_heuristic_order, HeuristicSet};

#[derive(Debug, Error)]
pub enum IrError {
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
    #[error("duplicate signal '{0}'")]
    DuplicateSignal(String),
    #[error("width mismatch: {context}")]
    WidthMismatch { context: String },
    #[error("extract [{hi}:{lo}] out of range for width {width}")]
    BadExtract { hi: u32, lo: u32, width: u32 },
    #[error("unrolling bound must be at least 1")]
    BadBound,
    #[error("constant {value} does not fit width {width}")]
    BadConstant { width: u32, value: u64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("control signal '{0}' has no semantic-map literal")]
    UnmappedControl(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
