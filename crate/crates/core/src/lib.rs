//! Accelerated gradient methods whose coupling and descent steps are exact
//! low-dimensional minimizations: smooth, strongly convex, universal,
//! restarted and primal-dual variants, plus a benchmark suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod estimate;
pub mod linesearch;
pub mod oracle;
pub mod primal_dual;
pub mod problems;
pub mod prox;
pub mod restart;
pub mod solver;
pub mod vector;
