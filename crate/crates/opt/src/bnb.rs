//! Best-first branch and bound over caller-defined nodes.
//!
//! The driver knows nothing about the problem: `relax` evaluates a node and
//! `branch` splits it. Children are evaluated eagerly and queued by their own
//! bound, so the node count equals the number of relaxations solved.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct BnbOptions {
    pub max_nodes: Option<usize>,
    pub time_limit: Option<Duration>,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            max_nodes: None,
            time_limit: None,
            abs_gap: 1e-9,
            rel_gap: 1e-9,
        }
    }
}

/// What `relax` reports for a node.
#[derive(Clone, Debug)]
pub enum Relaxation<S> {
    Infeasible,
    /// `bound` is a valid lower bound for the subtree. When `feasible` is set,
    /// `solution` is feasible for the original problem with objective `bound`.
    Bounded {
        bound: f64,
        solution: S,
        feasible: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnbStatus {
    Optimal,
    Infeasible,
    /// Node or time budget ran out; the incumbent (if any) is not proven optimal.
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct BnbResult<S> {
    pub status: BnbStatus,
    pub incumbent: Option<(f64, S)>,
    /// Lower bound on the optimum; equals the incumbent value when optimal.
    pub best_bound: f64,
    pub nodes: usize,
    /// `(nodes evaluated, incumbent value)` at each improvement.
    pub history: Vec<(usize, f64)>,
    pub elapsed: Duration,
}

impl<S> BnbResult<S> {
    pub fn gap(&self) -> f64 {
        match &self.incumbent {
            Some((v, _)) => v - self.best_bound,
            None => f64::INFINITY,
        }
    }
}

struct Open<N, S> {
    bound: f64,
    seq: usize,
    node: N,
    solution: S,
}

impl<N, S> PartialEq for Open<N, S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<N, S> Eq for Open<N, S> {}
impl<N, S> PartialOrd for Open<N, S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<N, S> Ord for Open<N, S> {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Runs best-first branch and bound from `root`.
///
/// `on_incumbent` is called with every strictly improving feasible solution.
pub fn branch_and_bound<N, S, E, R, B, C>(
    root: N,
    mut relax: R,
    mut branch: B,
    mut on_incumbent: C,
    opts: &BnbOptions,
) -> Result<BnbResult<S>, E>
where
    S: Clone,
    R: FnMut(&N) -> Result<Relaxation<S>, E>,
    B: FnMut(&N, &S) -> Vec<N>,
    C: FnMut(&S, f64),
{
    let start = Instant::now();
    let mut heap: BinaryHeap<Open<N, S>> = BinaryHeap::new();
    let mut incumbent: Option<(f64, S)> = None;
    let mut history = Vec::new();
    let mut nodes = 0usize;
    let mut seq = 0usize;

    let close_enough =
        |bound: f64, inc: f64| inc - bound <= opts.abs_gap.max(opts.rel_gap * inc.abs());

    let mut evaluate = |node: N,
                        heap: &mut BinaryHeap<Open<N, S>>,
                        incumbent: &mut Option<(f64, S)>,
                        nodes: &mut usize,
                        seq: &mut usize|
     -> Result<(), E> {
        *nodes += 1;
        match relax(&node)? {
            Relaxation::Infeasible => {}
            Relaxation::Bounded {
                bound,
                solution,
                feasible,
            } => {
                if feasible {
                    if incumbent.as_ref().is_none_or(|(v, _)| bound < *v) {
                        on_incumbent(&solution, bound);
                        history.push((*nodes, bound));
                        *incumbent = Some((bound, solution));
                    }
                } else if incumbent
                    .as_ref()
                    .is_none_or(|(v, _)| !close_enough(bound, *v))
                {
                    *seq += 1;
                    heap.push(Open {
                        bound,
                        seq: *seq,
                        node,
                        solution,
                    });
                }
            }
        }
        Ok(())
    };

    evaluate(root, &mut heap, &mut incumbent, &mut nodes, &mut seq)?;
    let mut exhausted = false;
    while let Some(top) = heap.peek() {
        if let Some((v, _)) = &incumbent {
            if close_enough(top.bound, *v) {
                break;
            }
        }
        if opts.max_nodes.is_some_and(|m| nodes >= m)
            || opts.time_limit.is_some_and(|t| start.elapsed() >= t)
        {
            exhausted = true;
            break;
        }
        let open = heap.pop().expect("peeked");
        for child in branch(&open.node, &open.solution) {
            evaluate(child, &mut heap, &mut incumbent, &mut nodes, &mut seq)?;
        }
    }
    let open_bound = heap.peek().map_or(f64::INFINITY, |o| o.bound);
    let (status, best_bound) = match (&incumbent, exhausted) {
        (Some((v, _)), false) => (BnbStatus::Optimal, open_bound.min(*v)),
        (Some((v, _)), true) => (BnbStatus::BudgetExhausted, open_bound.min(*v)),
        (None, false) => (BnbStatus::Infeasible, f64::INFINITY),
        (None, true) => (BnbStatus::BudgetExhausted, open_bound),
    };
    Ok(BnbResult {
        status,
        incumbent,
        best_bound,
        nodes,
        history,
        elapsed: start.elapsed(),
    })
}
