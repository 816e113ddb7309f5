//! Optimization kernels: dense LU, a bounded-variable simplex LP solver with
//! warm starts, and a best-first branch-and-bound driver.

pub mod bnb;
pub mod linalg;
pub mod lp;
pub mod milp;
pub mod simplex;

pub use bnb::{branch_and_bound, BnbOptions, BnbResult, BnbStatus, Relaxation};
pub use lp::{solve_lp, LpError, LpOutcome, LpProblem, LpRow, LpSolution};
pub use milp::BinaryMilp;
pub use simplex::{Simplex, Status};
