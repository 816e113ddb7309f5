//! Mixed-binary relaxation of the flow problem, solved to global optimality
//! by outer approximation inside best-first branch and bound.

mod model;
mod report;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use wdsflow_opt::{
    branch_and_bound, BnbOptions, BnbStatus, LpError, LpRow, Relaxation, Simplex, Status,
};

pub use model::{build_w2, presolve_bridges, MipModel, Quad, QuadKind};
pub use report::{exactness_report, ExactnessReport};

use crate::error::{Result, WdsError};
use crate::graph::{analyze_cycles, bfs_order, bfs_tree, blocks, induced, tree_flows};
use crate::hydraulics::{apply_off_pumps, edge_head_change, validated_solution, OffPumpMode};
use crate::network::{EdgeKind, Network, SolutionStatus, WfInput, WfSolution};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BigM {
    Fixed(f64),
    /// Ten times the larger of a flow scale and a head-range estimate.
    Auto,
}

#[derive(Clone, Debug)]
pub struct W2Config {
    pub big_m: BigM,
    /// Second attempt with this M when the first runs out of budget.
    pub retry_big_m: Option<f64>,
    /// Heads are kept within `h_r ± h_box`.
    pub h_box: f64,
    pub bnb: BnbOptions,
    /// Quadratic rows count as satisfied below this violation.
    pub cut_tol: f64,
    pub cuts_per_round: usize,
    pub max_cut_rounds: usize,
    /// Gap below which the relaxation is called exact.
    pub exact_tol: f64,
    /// Solve each biconnected block separately.
    pub decompose: bool,
    pub off_pumps: OffPumpMode,
}

impl Default for W2Config {
    fn default() -> Self {
        Self {
            big_m: BigM::Fixed(300.0),
            retry_big_m: None,
            h_box: 1e4,
            bnb: BnbOptions {
                time_limit: Some(Duration::from_secs(60)),
                ..BnbOptions::default()
            },
            cut_tol: 1e-8,
            cuts_per_round: 10,
            max_cut_rounds: 2000,
            exact_tol: 1e-6,
            decompose: true,
            off_pumps: OffPumpMode::Contract,
        }
    }
}

#[derive(Clone, Debug)]
pub struct W2Outcome {
    pub solution: WfSolution,
    pub report: ExactnessReport,
    pub status: BnbStatus,
    /// Penalty of the returned point.
    pub objective: f64,
    /// Incumbent minus best bound, summed over blocks.
    pub gap: f64,
    pub nodes: usize,
    pub big_m: f64,
    pub blocks: usize,
    pub seconds: f64,
}

const INTEGRALITY_TOL: f64 = 1e-7;

fn auto_big_m(net: &Network, d: &[f64]) -> f64 {
    let flow = 0.5 * d.iter().map(|v| v.abs()).sum::<f64>();
    let mut head: f64 = 0.0;
    for e in net.edges() {
        match e.kind {
            EdgeKind::Pipe { c, .. } => head = head.max(c * flow * flow),
            EdgeKind::Pump(ref p) => head = head.max(p.nu + p.mu * p.mu / (-4.0 * p.lambda)),
        }
    }
    10.0 * flow.max(head).max(1.0)
}

struct ModelResult {
    x: Vec<f64>,
    model: MipModel,
    objective: f64,
    bound: f64,
    nodes: usize,
    status: BnbStatus,
}

#[derive(Clone)]
struct Node {
    warm: Arc<Simplex>,
    fix: Option<(usize, f64)>,
}

/// Global W2 optimum of one model by branch and bound with cut loops.
fn solve_model(
    net: &Network,
    d: &[f64],
    h_ref: f64,
    big_m: f64,
    cfg: &W2Config,
    bnb: &BnbOptions,
) -> Result<ModelResult> {
    let mut model = build_w2(net, d, h_ref, big_m, cfg.h_box)?;
    presolve_bridges(net, d, &mut model)?;
    let base_rows = model.lp.rows.len();
    let row_cap = base_rows + 6 * model.quads.len() + 50;
    let branching_var = |x: &[f64]| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &model.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f + 1e-12) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    };
    let relax =
        |node: &Node| -> std::result::Result<Relaxation<(Vec<f64>, Arc<Simplex>)>, LpError> {
            let mut s = (*node.warm).clone();
            if let Some((j, v)) = node.fix {
                s.set_var_bounds(j, v, v);
            }
            let mut converged = false;
            for _ in 0..cfg.max_cut_rounds {
                match s.solve()? {
                    Status::Infeasible => return Ok(Relaxation::Infeasible),
                    Status::Unbounded => {
                        return Err(LpError::Malformed("unbounded W2 relaxation".into()))
                    }
                    Status::Optimal => {}
                }
                let x = s.values();
                let mut viol: Vec<(f64, usize)> = model
                    .quads
                    .iter()
                    .enumerate()
                    .map(|(k, q)| (q.row.violation(x), k))
                    .filter(|(v, _)| *v > cfg.cut_tol)
                    .collect();
                if viol.is_empty() {
                    converged = true;
                    break;
                }
                viol.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let cuts: Vec<LpRow> = viol
                    .iter()
                    .take(cfg.cuts_per_round)
                    .map(|&(_, k)| {
                        let q = &model.quads[k].row;
                        let (coeffs, rhs) = q.tangent(x[q.var]);
                        LpRow::le(coeffs, rhs)
                    })
                    .collect();
                if s.num_rows() > row_cap {
                    for i in (base_rows..s.num_rows()).rev() {
                        if s.row_is_slack(i) {
                            s.remove_row(i);
                        }
                    }
                }
                for c in &cuts {
                    s.add_row(c);
                }
            }
            let x = s.values().to_vec();
            let integral = branching_var(&x).is_none();
            if !converged && integral {
                // Cut loop stalled on an integral point; accept if nearly feasible.
                if model.max_quad_violation(&x) > 1e3 * cfg.cut_tol {
                    return Err(LpError::IterationLimit(cfg.max_cut_rounds));
                }
            }
            Ok(Relaxation::Bounded {
                bound: s.objective(),
                solution: (x, Arc::new(s)),
                feasible: integral,
            })
        };
    let branch = |_: &Node, sol: &(Vec<f64>, Arc<Simplex>)| {
        let j = branching_var(&sol.0).expect("fractional node");
        // x = 1 first so ties on zero-flow pipes resolve towards it.
        [1.0, 0.0]
            .into_iter()
            .map(|v| Node {
                warm: Arc::clone(&sol.1),
                fix: Some((j, v)),
            })
            .collect()
    };
    let root = Node {
        warm: Arc::new(Simplex::new(&model.lp)),
        fix: None,
    };
    let res = branch_and_bound(root, relax, branch, |_, _| {}, bnb)?;
    let bound = res.best_bound;
    match (res.status, res.incumbent) {
        (BnbStatus::Infeasible, _) => Err(WdsError::Infeasible(
            "W2 relaxation has no feasible point".into(),
        )),
        (status, Some((objective, (mut x, _)))) => {
            for &j in &model.binaries {
                x[j] = x[j].round();
            }
            Ok(ModelResult {
                x,
                model,
                objective,
                bound,
                nodes: res.nodes,
                status,
            })
        }
        (_, None) => Err(WdsError::Budget {
            nodes: res.nodes,
            gap: f64::INFINITY,
        }),
    }
}

/// W2 result on a network without off pumps.
pub(crate) struct Assembled {
    pub(crate) f: Vec<f64>,
    pub(crate) h: Vec<f64>,
    pub(crate) status: BnbStatus,
    pub(crate) gap: f64,
    pub(crate) nodes: usize,
    pub(crate) blocks: usize,
    /// Cycle blocks whose optimum was swapped for a tight one.
    pub(crate) polished: usize,
}

/// A W2 optimum of a single-cycle block on which every head law is tight.
///
/// On a cycle whose flow circulates, the penalty is flat across many slack
/// points. The loop-flow equation is monotone once pumps stay on the
/// falling side of their curve, so bisection finds the tight point; it is
/// kept only if it is feasible for the model and no worse than `r`.
fn tight_optimum(sub: &Network, d: &[f64], r: &ModelResult) -> Option<(Vec<f64>, Vec<f64>)> {
    let cs = analyze_cycles(sub);
    let [cyc] = cs.cycles.as_slice() else {
        return None;
    };
    let f0 = tree_flows(sub, &cs.tree, d);
    let sigma: Vec<f64> = cyc.indicator.iter().map(|&s| s as f64).collect();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for &p in &cyc.edges {
        let fm = r.model.flow_m[p];
        let (a, b) = match sub.edge(p).kind {
            EdgeKind::Pipe { .. } => (-fm, fm),
            EdgeKind::Pump(ref c) => ((c.mu / (-2.0 * c.lambda)).max(0.0), fm),
        };
        let (ta, tb) = if sigma[p] > 0.0 {
            (a - f0[p], b - f0[p])
        } else {
            (f0[p] - b, f0[p] - a)
        };
        lo = lo.max(ta);
        hi = hi.min(tb);
    }
    if !(lo < hi) {
        return None;
    }
    let flows = |t: f64| -> Vec<f64> { f0.iter().zip(&sigma).map(|(f, s)| f + s * t).collect() };
    let loop_sum = |t: f64| -> f64 {
        let f = flows(t);
        cyc.edges
            .iter()
            .map(|&p| sigma[p] * edge_head_change(sub.edge(p), f[p], true))
            .sum()
    };
    let (mut a, mut b) = (lo, hi);
    if loop_sum(a) > 0.0 || loop_sum(b) < 0.0 {
        return None;
    }
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if loop_sum(m) <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let f = flows(0.5 * (a + b));
    let mut h = vec![0.0; sub.num_nodes()];
    for (u, via) in bfs_order(sub, sub.reference(), |_| true) {
        let Some(p) = via else { continue };
        let e = sub.edge(p);
        let change = edge_head_change(e, f[p], true);
        h[u] = if e.head == u {
            h[e.tail] - change
        } else {
            h[e.head] + change
        };
    }
    let x = r.model.point(sub, &f, &h);
    let obj: f64 = r
        .model
        .lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    let ok =
        r.model.max_violation(&x) <= 1e-7 && obj <= r.objective + 1e-7 * r.objective.abs().max(1.0);
    ok.then_some((f, h))
}

pub(crate) fn resolve_big_m(cfg: &W2Config, net: &Network, d: &[f64]) -> f64 {
    match cfg.big_m {
        BigM::Fixed(m) => m,
        BigM::Auto => auto_big_m(net, d),
    }
}

pub(crate) fn solve_reduced(
    net: &Network,
    d: &[f64],
    h_ref: f64,
    big_m: f64,
    cfg: &W2Config,
) -> Result<Assembled> {
    let start = Instant::now();
    let deadline = cfg.bnb.time_limit.map(|t| start + t);
    let budget = || BnbOptions {
        time_limit: deadline.map(|dl| dl.saturating_duration_since(Instant::now())),
        ..cfg.bnb.clone()
    };
    let mut f = vec![0.0; net.num_edges()];
    let mut dh: Vec<Option<f64>> = vec![None; net.num_edges()];
    let mut out = Assembled {
        f: Vec::new(),
        h: Vec::new(),
        status: BnbStatus::Optimal,
        gap: 0.0,
        nodes: 0,
        blocks: 0,
        polished: 0,
    };
    let absorb = |r: &ModelResult, out: &mut Assembled| {
        out.nodes += r.nodes;
        out.gap += (r.objective - r.bound).max(0.0);
        if r.status == BnbStatus::BudgetExhausted {
            out.status = BnbStatus::BudgetExhausted;
        }
        out.blocks += 1;
    };
    if cfg.decompose {
        let tf = tree_flows(net, &bfs_tree(net), d);
        let order = bfs_order(net, net.reference(), |_| true);
        let mut rank = vec![usize::MAX; net.num_nodes()];
        for (k, &(v, _)) in order.iter().enumerate() {
            rank[v] = k;
        }
        let b = blocks(net);
        for blk in &b.blocks {
            if blk.is_bridge() {
                let p = blk.edges[0];
                f[p] = tf[p];
                dh[p] = Some(edge_head_change(net.edge(p), tf[p], true));
                continue;
            }
            // Every block exchanges a fixed net flow with the rest through
            // its nodes, read off any mass-conserving flow.
            let mut local_d = vec![0.0; blk.nodes.len()];
            let pos = |v: usize| blk.nodes.binary_search(&v).expect("block node");
            for &p in &blk.edges {
                let e = net.edge(p);
                local_d[pos(e.tail)] += tf[p];
                local_d[pos(e.head)] -= tf[p];
            }
            let root = *blk.nodes.iter().min_by_key(|&&v| rank[v]).unwrap();
            let (sub, _) = induced(net, &blk.nodes, &blk.edges, root)?;
            let r = solve_model(&sub, &local_d, 0.0, big_m, cfg, &budget())?;
            let mut fl: Vec<f64> = (0..sub.num_edges()).map(|i| r.x[r.model.flow[i]]).collect();
            let mut hl: Vec<f64> = (0..sub.num_nodes()).map(|v| r.x[r.model.head[v]]).collect();
            if blk.is_simple_cycle()
                && !exactness_report(&sub, &BTreeSet::new(), &fl, &hl, cfg.exact_tol).exact
            {
                if let Some((pf, ph)) = tight_optimum(&sub, &local_d, &r) {
                    out.polished += 1;
                    (fl, hl) = (pf, ph);
                }
            }
            for (i, &p) in blk.edges.iter().enumerate() {
                f[p] = fl[i];
                let e = sub.edge(i);
                dh[p] = Some(hl[e.tail] - hl[e.head]);
            }
            absorb(&r, &mut out);
        }
    } else {
        let r = solve_model(net, d, h_ref, big_m, cfg, &budget())?;
        for p in 0..net.num_edges() {
            f[p] = r.x[r.model.flow[p]];
            let e = net.edge(p);
            dh[p] = Some(r.x[r.model.head[e.tail]] - r.x[r.model.head[e.head]]);
        }
        absorb(&r, &mut out);
    }
    let mut h = vec![0.0; net.num_nodes()];
    h[net.reference()] = h_ref;
    for (u, via) in bfs_order(net, net.reference(), |_| true) {
        let Some(p) = via else { continue };
        let e = net.edge(p);
        let change = dh[p].expect("every edge solved");
        h[u] = if e.head == u {
            h[e.tail] - change
        } else {
            h[e.head] + change
        };
    }
    out.f = f;
    out.h = h;
    Ok(out)
}

/// Solves W2 and reports how exact the relaxation turned out.
pub fn solve_w2(net: &Network, input: &WfInput, cfg: &W2Config) -> Result<W2Outcome> {
    let start = Instant::now();
    let reduced = apply_off_pumps(net, input, cfg.off_pumps)?;
    let d = &reduced.input.injections;
    let mut big_m = resolve_big_m(cfg, &reduced.net, d);
    let mut notes = Vec::new();
    let mut attempt = solve_reduced(&reduced.net, d, input.reference_pressure, big_m, cfg);
    if let Some(m2) = cfg.retry_big_m {
        let exhausted = match &attempt {
            Ok(a) => a.status == BnbStatus::BudgetExhausted,
            Err(e) => matches!(e.root(), WdsError::Budget { .. } | WdsError::Infeasible(_)),
        };
        if exhausted && m2 != big_m {
            notes.push(format!(
                "big-M {big_m} exhausted the budget; retried with {m2}"
            ));
            big_m = m2;
            attempt = solve_reduced(&reduced.net, d, input.reference_pressure, big_m, cfg);
        }
    }
    let a = attempt?;
    let (f, h) = reduced.expand(net, input, &a.f, &a.h);
    let report = exactness_report(net, &input.off_pumps, &f, &h, cfg.exact_tol);
    let objective = MipModel::penalty(&reduced.net, &a.h);
    let mut solution = validated_solution(net, input, f, h, "miqcqp");
    solution.diagnostics.extend(notes);
    if !report.exact {
        solution.status = SolutionStatus::Candidate;
        solution.diagnostics.push(format!(
            "relaxation inexact: max gap {:.3e} m",
            report.max_gap()
        ));
    }
    if a.status == BnbStatus::BudgetExhausted {
        solution.status = SolutionStatus::Candidate;
        solution.diagnostics.push(format!(
            "budget exhausted after {} nodes, gap {:.3e}",
            a.nodes, a.gap
        ));
    }
    Ok(W2Outcome {
        solution,
        report,
        status: a.status,
        objective,
        gap: a.gap,
        nodes: a.nodes,
        big_m,
        blocks: a.blocks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydraulics::solve_tree;
    use crate::network::NetworkBuilder;

    #[test]
    fn tree_is_exact() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3", "4"])
            .pipe("a", "1", "2", 0.01)
            .pipe("b", "2", "3", 0.02)
            .pipe("c", "2", "4", 0.03)
            .build("1")
            .unwrap();
        let input = WfInput::new(&net, vec![10.0, -2.0, -3.0, -5.0], 50.0).unwrap();
        for decompose in [true, false] {
            let cfg = W2Config {
                decompose,
                ..W2Config::default()
            };
            let out = solve_w2(&net, &input, &cfg).unwrap();
            assert!(out.report.exact);
            assert_eq!(out.nodes, if decompose { 0 } else { 1 });
            let truth = solve_tree(&net, &input).unwrap();
            for (a, b) in out.solution.pressures.iter().zip(&truth.pressures) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn triangle_matches_energy_solution() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3"])
            .pipe("12", "1", "2", 1.0)
            .pipe("13", "1", "3", 1.0)
            .pipe("23", "2", "3", 1.0)
            .build("1")
            .unwrap();
        let input = WfInput::new(&net, vec![2.0, -1.0, -1.0], 10.0).unwrap();
        for decompose in [true, false] {
            let out = solve_w2(
                &net,
                &input,
                &W2Config {
                    decompose,
                    ..W2Config::default()
                },
            )
            .unwrap();
            assert!(out.report.exact, "{:?}", out.report);
            assert_eq!(out.solution.status, SolutionStatus::Verified);
            let f = &out.solution.flows;
            assert!(
                (f[0] - 1.0).abs() < 1e-6 && (f[1] - 1.0).abs() < 1e-6 && f[2].abs() < 1e-6,
                "{f:?}"
            );
        }
    }

    #[test]
    fn budget_without_incumbent() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3"])
            .pipe("12", "1", "2", 1.0)
            .pipe("13", "1", "3", 2.0)
            .pipe("23", "2", "3", 3.0)
            .build("1")
            .unwrap();
        let input = WfInput::new(&net, vec![2.0, -0.5, -1.5], 10.0).unwrap();
        let cfg = W2Config {
            bnb: BnbOptions {
                max_nodes: Some(1),
                ..BnbOptions::default()
            },
            ..W2Config::default()
        };
        match solve_w2(&net, &input, &cfg) {
            Ok(out) => assert!(out.report.exact || out.status == BnbStatus::BudgetExhausted),
            Err(e) => assert!(matches!(e, WdsError::Budget { .. })),
        }
    }

    #[test]
    fn circulating_pump_loop_is_tight() {
        let pump = crate::network::PumpCurve {
            lambda: -2.735e-5,
            mu: 0.0129,
            nu: 55.83,
            f_min: 250.0,
            f_max: 1500.0,
        };
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3"])
            .pump("q", "1", "2", pump)
            .pipe("23", "2", "3", 1e-4)
            .pipe("31", "3", "1", 2e-4)
            .build("1")
            .unwrap();
        // Pure circulation: the penalty is zero on a whole family of points.
        let input = WfInput::new(&net, vec![0.0; 3], 10.0).unwrap();
        let out = solve_w2(&net, &input, &W2Config::default()).unwrap();
        assert!(out.report.exact, "{:?}", out.report);
        assert_eq!(out.solution.status, SolutionStatus::Verified);
        let f = out.solution.flows[0];
        assert!((pump.gain(f) - 3e-4 * f * f).abs() < 1e-6);
    }
}
