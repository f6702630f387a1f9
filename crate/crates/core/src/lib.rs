//! Two-party privacy-preserving hardware IP verification.
//!
//! A vendor publishes designs as masked CNF clause matrices; a user
//! obliviously selects one, compiles a bounded temporal property against
//! the design's semantic map, and both parties run a data-oblivious DPLL
//! solver under XOR sharing that reveals only the verdict and its
//! giant-step count. Completed trades land on an append-only signed
//! provenance ledger.
//!
//! The pipeline, in module order: [`ir`] turns a word-level design into
//! CNF plus its public semantic map and control-literal priorities;
//! [`property`] compiles the user's property against that map;
//! [`portfolio`] pads and masks design matrices for oblivious selection
//! over [`ot`]; [`solver`] runs the giant-step loop on any [`backend`];
//! [`session`] drives the whole exchange over [`transport`] frames; and
//! [`ledger`] records provenance.

pub mod backend;
pub mod formula;
pub mod ir;
pub mod ledger;
pub mod ot;
pub mod portfolio;
pub mod property;
pub mod session;
pub mod solver;
pub mod transport;
