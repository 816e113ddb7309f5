//! Steady-state flow and pressure computation for water distribution networks.

pub mod conic;
pub mod dispatch;
pub mod energy;
pub mod error;
pub mod graph;
pub mod hybrid;
pub mod hydraulics;
pub mod miqcqp;
pub mod network;
pub mod stitching;

pub use dispatch::{dispatch, solve_with, Dispatched, SolveConfig, SolverChoice};
pub use error::{Result, WdsError};
pub use network::{
    Edge, EdgeKind, Network, NetworkBuilder, Node, NodeKind, PumpCurve, SolutionStatus, WfInput,
    WfSolution,
};
