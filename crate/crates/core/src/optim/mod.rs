//! Linear and semidefinite programming back ends.

pub mod lp;
pub mod sdp;

pub use lp::{is_feasible, solve_lp, Bound, LinearProgram, LpOptions, LpResult, LpStatus};
pub use sdp::{AffineMatrix, LinExpr, Lmi, MatVar, SdpOptions, SdpProblem, SdpSolution, SymVar};
