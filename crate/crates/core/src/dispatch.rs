//! Picks a solver from the network's topology class.

use crate::energy::{solve_energy, SolverConfig};
use crate::error::Result;
use crate::graph::{classify, TopologyClass};
use crate::hybrid::solve_hybrid;
use crate::hydraulics::{solve_tree, OffPumpMode};
use crate::miqcqp::{solve_w2, W2Config};
use crate::network::{Network, SolutionStatus, WfInput, WfSolution};
use crate::stitching::{solve_stitching, StitchConfig};

/// Settings shared by every solver the dispatcher may call.
#[derive(Clone, Debug, Default)]
pub struct SolveConfig {
    pub energy: SolverConfig,
    pub w2: W2Config,
    pub off_pumps: OffPumpMode,
}

impl SolveConfig {
    pub fn stitch_config(&self) -> StitchConfig {
        StitchConfig {
            energy: self.energy.clone(),
            off_pumps: self.off_pumps,
        }
    }

    fn w2(&self) -> W2Config {
        W2Config {
            off_pumps: self.off_pumps,
            ..self.w2.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverChoice {
    Auto,
    Tree,
    Energy,
    Stitching,
    Miqcqp,
    Hybrid,
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Auto => "auto",
            SolverChoice::Tree => "tree",
            SolverChoice::Energy => "energy",
            SolverChoice::Stitching => "stitching",
            SolverChoice::Miqcqp => "miqcqp",
            SolverChoice::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            SolverChoice::Auto,
            SolverChoice::Tree,
            SolverChoice::Energy,
            SolverChoice::Stitching,
            SolverChoice::Miqcqp,
            SolverChoice::Hybrid,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown solver '{s}'"))
    }
}

/// Solver used for each class.
pub fn route(class: TopologyClass) -> SolverChoice {
    match class {
        TopologyClass::Tree => SolverChoice::Tree,
        TopologyClass::NoPumps => SolverChoice::Energy,
        TopologyClass::PumpsNotInCycles => SolverChoice::Stitching,
        TopologyClass::NonOverlappingCycles => SolverChoice::Miqcqp,
        TopologyClass::PumpsNotInOverlappingCycles => SolverChoice::Hybrid,
        TopologyClass::Unsupported => SolverChoice::Miqcqp,
    }
}

#[derive(Clone, Debug)]
pub struct Dispatched {
    pub class: TopologyClass,
    pub solver: SolverChoice,
    pub solution: WfSolution,
}

/// Classifies, routes and solves.
pub fn dispatch(net: &Network, input: &WfInput, cfg: &SolveConfig) -> Result<Dispatched> {
    solve_with(net, input, SolverChoice::Auto, cfg)
}

/// Runs the named solver, or the routed one for `Auto`.
pub fn solve_with(
    net: &Network,
    input: &WfInput,
    choice: SolverChoice,
    cfg: &SolveConfig,
) -> Result<Dispatched> {
    let class = classify(net, input)?;
    let solver = if choice == SolverChoice::Auto {
        route(class)
    } else {
        choice
    };
    let off = !input.off_pumps.is_empty();
    let mut solution = match solver {
        // Contracting off pumps can turn a cyclic network into a tree with
        // self loops; stitching handles both.
        SolverChoice::Tree if net.num_edges() + 1 == net.num_nodes() => solve_tree(net, input)?,
        SolverChoice::Tree => solve_stitching(net, input, &cfg.stitch_config())?,
        SolverChoice::Energy if off => solve_stitching(net, input, &cfg.stitch_config())?,
        SolverChoice::Energy => solve_energy(net, input, &cfg.energy)?,
        SolverChoice::Stitching => solve_stitching(net, input, &cfg.stitch_config())?,
        SolverChoice::Miqcqp => solve_w2(net, input, &cfg.w2())?.solution,
        SolverChoice::Hybrid => solve_hybrid(net, input, cfg)?,
        SolverChoice::Auto => unreachable!("auto is resolved above"),
    };
    if class == TopologyClass::Unsupported && choice == SolverChoice::Auto {
        let msg = "pumps on overlapping cycles: the relaxation carries no exactness guarantee here";
        log::warn!("{msg}");
        solution.diagnostics.push(msg.into());
    }
    if solution.status == SolutionStatus::Candidate {
        log::warn!("{} returned an unverified solution", solver.name());
    }
    Ok(Dispatched {
        class,
        solver,
        solution,
    })
}
