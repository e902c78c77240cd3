#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cli;
pub mod conformal;
pub mod geometry;
pub mod report;
pub mod semigroup;
pub mod stochastic;
pub mod verify;
