//! Mixed-binary linear programs solved by LP-based branch and bound.

use std::sync::Arc;

use crate::bnb::{branch_and_bound, BnbOptions, BnbResult, Relaxation};
use crate::lp::{LpError, LpProblem};
use crate::simplex::{Simplex, Status};

/// An LP in which the listed variables must take values in {0, 1}.
#[derive(Clone, Debug)]
pub struct BinaryMilp {
    pub lp: LpProblem,
    pub binaries: Vec<usize>,
}

const INTEGRALITY_TOL: f64 = 1e-7;

#[derive(Clone)]
struct Node {
    /// Parent's optimal tableau, reused as a warm start.
    warm: Arc<Simplex>,
    fix: Vec<(usize, f64)>,
}

impl BinaryMilp {
    pub fn new(mut lp: LpProblem, binaries: Vec<usize>) -> Self {
        for &j in &binaries {
            let (l, u) = lp.bounds[j];
            lp.bounds[j] = (l.max(0.0), u.min(1.0));
        }
        Self { lp, binaries }
    }

    /// Most-fractional binary, ties to the lowest index.
    fn branching_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f + 1e-12) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    pub fn solve(&self, opts: &BnbOptions) -> Result<BnbResult<Vec<f64>>, LpError> {
        self.lp.validate()?;
        let root = Node {
            warm: Arc::new(Simplex::new(&self.lp)),
            fix: Vec::new(),
        };
        let relax = |node: &Node| -> Result<Relaxation<(Vec<f64>, Arc<Simplex>)>, LpError> {
            let mut s = (*node.warm).clone();
            for &(j, v) in &node.fix {
                s.set_var_bounds(j, v, v);
            }
            match s.solve()? {
                Status::Infeasible => Ok(Relaxation::Infeasible),
                Status::Unbounded => Err(LpError::Malformed("unbounded relaxation".into())),
                Status::Optimal => {
                    let mut x = s.values().to_vec();
                    let feasible = self.branching_var(&x).is_none();
                    if feasible {
                        for &j in &self.binaries {
                            x[j] = x[j].round();
                        }
                    }
                    Ok(Relaxation::Bounded {
                        bound: s.objective(),
                        solution: (x, Arc::new(s)),
                        feasible,
                    })
                }
            }
        };
        let branch = |_: &Node, sol: &(Vec<f64>, Arc<Simplex>)| {
            let j = self.branching_var(&sol.0).expect("fractional node");
            [0.0, 1.0]
                .into_iter()
                .map(|v| Node {
                    warm: Arc::clone(&sol.1),
                    fix: vec![(j, v)],
                })
                .collect()
        };
        let res = branch_and_bound(root, relax, branch, |_, _| {}, opts)?;
        Ok(BnbResult {
            status: res.status,
            incumbent: res.incumbent.map(|(v, (x, _))| (v, x)),
            best_bound: res.best_bound,
            nodes: res.nodes,
            history: res.history,
            elapsed: res.elapsed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnb::BnbStatus;

    #[test]
    fn all_binaries_fixed_needs_one_relaxation() {
        let mut lp = LpProblem::new();
        let a = lp.add_var(1.0, 1.0, 1.0);
        let b = lp.add_var(2.0, 0.0, 0.0);
        lp.add_le(vec![(a, 1.0), (b, 1.0)], 5.0);
        let res = BinaryMilp::new(lp, vec![a, b])
            .solve(&BnbOptions::default())
            .unwrap();
        assert_eq!(res.nodes, 1);
        assert_eq!(res.status, BnbStatus::Optimal);
        assert_eq!(res.incumbent.unwrap().0, 1.0);
    }

    #[test]
    fn two_binary_toy_explores_three_nodes() {
        // min -2a - b  s.t. 2a + 2b <= 3  -> optimum (1, 0), root LP (1, 0.5).
        let mut lp = LpProblem::new();
        let a = lp.add_var(-2.0, 0.0, 1.0);
        let b = lp.add_var(-1.0, 0.0, 1.0);
        lp.add_le(vec![(a, 2.0), (b, 2.0)], 3.0);
        let res = BinaryMilp::new(lp, vec![a, b])
            .solve(&BnbOptions::default())
            .unwrap();
        let (v, x) = res.incumbent.unwrap();
        assert_eq!(v, -2.0);
        assert_eq!(x, vec![1.0, 0.0]);
        assert!(res.nodes <= 3, "explored {} nodes", res.nodes);
    }
}
