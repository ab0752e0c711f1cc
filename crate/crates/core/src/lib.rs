//! Offline-to-online reinforcement learning in linear mixture MDPs under
//! environment shift: models, synthetic environments, offline designs,
//! optimistic agents, theory-side diagnostics and an experiment harness.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agents;
pub mod cli;
pub mod diagnostics;
pub mod envfile;
pub mod envgen;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod offline;
pub mod rng;
