//! The penalized mixed-binary model: direction binaries gate one-sided
//! quadratic head-loss constraints, pumps get a concave gain ceiling, and the
//! objective sums absolute pipe drops minus pump gains.

use wdsflow_opt::{LpProblem, LpRow};

use crate::conic::{ConicModel, QuadRow};
use crate::error::{Result, WdsError};
use crate::graph::fix_noncycle_flows;
use crate::network::{EdgeKind, Network};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadKind {
    /// `c f² ≤ h_m − h_n + M(1 − x)`
    PipeForward,
    /// `c f² ≤ M x − (h_m − h_n)`
    PipeReverse,
    /// `h_n − h_m ≤ λf² + μf + ν`
    Pump,
}

#[derive(Clone, Debug)]
pub struct Quad {
    pub edge: usize,
    pub kind: QuadKind,
    pub row: QuadRow,
}

/// W2 as an LP skeleton plus convex quadratic rows handled by cuts.
#[derive(Clone, Debug)]
pub struct MipModel {
    pub lp: LpProblem,
    pub names: Vec<String>,
    pub flow: Vec<usize>,
    pub head: Vec<usize>,
    /// Direction binary per pipe.
    pub dir: Vec<Option<usize>>,
    /// Epigraph variable of `|h_m − h_n|` per pipe.
    pub abs: Vec<Option<usize>>,
    /// Binaries still free (not fixed by presolve), ascending by edge.
    pub binaries: Vec<usize>,
    pub quads: Vec<Quad>,
    pub big_m: f64,
    /// Per-edge flow bound used in the direction rows.
    pub flow_m: Vec<f64>,
    pub mass_rows: usize,
    pub direction_rows: usize,
}

impl MipModel {
    pub fn num_binaries(&self) -> usize {
        self.binaries.len()
    }

    /// Penalty of a point: `Σ|h_m − h_n| − Σ_pumps (h_n − h_m)`.
    pub fn penalty(net: &Network, h: &[f64]) -> f64 {
        net.edges()
            .iter()
            .map(|e| match e.kind {
                EdgeKind::Pipe { .. } => (h[e.tail] - h[e.head]).abs(),
                EdgeKind::Pump(_) => -(h[e.head] - h[e.tail]),
            })
            .sum()
    }

    /// Model vector of a flow/head pair: binaries follow the flow sign and
    /// epigraph variables sit at `|h_m − h_n|`.
    pub fn point(&self, net: &Network, f: &[f64], h: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.lp.bounds.len()];
        for (v, &j) in self.head.iter().enumerate() {
            x[j] = h[v];
        }
        for (p, e) in net.edges().iter().enumerate() {
            x[self.flow[p]] = f[p];
            if let Some(j) = self.dir[p] {
                x[j] = if f[p] >= 0.0 { 1.0 } else { 0.0 };
            }
            if let Some(j) = self.abs[p] {
                x[j] = (h[e.tail] - h[e.head]).abs();
            }
        }
        x
    }

    /// Largest violation of bounds, linear rows and quadratic rows.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v = self.max_quad_violation(x);
        for (j, &(l, u)) in self.lp.bounds.iter().enumerate() {
            v = v.max(l - x[j]).max(x[j] - u);
        }
        for r in &self.lp.rows {
            let a: f64 = r.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
            v = v.max(r.lower - a).max(a - r.upper);
        }
        v
    }

    pub fn max_quad_violation(&self, x: &[f64]) -> f64 {
        self.quads
            .iter()
            .fold(0.0_f64, |m, q| m.max(q.row.violation(x)))
    }

    /// Model in the text cone format, quadratics as `QCUT` rows.
    pub fn to_conic(&self) -> ConicModel {
        let mut m = ConicModel {
            vars: self.names.clone(),
            ..ConicModel::default()
        };
        for (j, &(l, u)) in self.lp.bounds.iter().enumerate() {
            if l == u {
                m.equalities.push((vec![(j, 1.0)], l));
                continue;
            }
            if l.is_finite() {
                m.inequalities.push((vec![(j, -1.0)], -l));
            }
            if u.is_finite() {
                m.inequalities.push((vec![(j, 1.0)], u));
            }
        }
        for r in &self.lp.rows {
            if r.lower == r.upper {
                m.equalities.push((r.coeffs.clone(), r.lower));
                continue;
            }
            if r.upper.is_finite() {
                m.inequalities.push((r.coeffs.clone(), r.upper));
            }
            if r.lower.is_finite() {
                m.inequalities
                    .push((r.coeffs.iter().map(|&(j, a)| (j, -a)).collect(), -r.lower));
            }
        }
        m.objective = self
            .lp
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        m.binaries = self.dir.iter().flatten().copied().collect();
        m.quads = self.quads.iter().map(|q| q.row.clone()).collect();
        m
    }
}

/// Builds W2 with head big-M `big_m` and heads boxed to `h_ref ± h_box`.
///
/// A W2-feasible pipe flow obeys `2c f² ≤ M`, so the direction rows use the
/// per-pipe bound `sqrt(M / 2c)`, which removes no feasible point.
pub fn build_w2(net: &Network, d: &[f64], h_ref: f64, big_m: f64, h_box: f64) -> Result<MipModel> {
    net.check_len("injections", d.len(), net.num_nodes())?;
    if !(big_m > 0.0) || !big_m.is_finite() {
        return Err(WdsError::Parameter(format!(
            "big-M must be positive, got {big_m}"
        )));
    }
    if !(h_box > 0.0) {
        return Err(WdsError::Parameter(format!(
            "head box must be positive, got {h_box}"
        )));
    }
    let mut lp = LpProblem::new();
    let mut names = Vec::new();
    let var =
        |lp: &mut LpProblem, names: &mut Vec<String>, name: String, cost: f64, l: f64, u: f64| {
            names.push(name);
            lp.add_var(cost, l, u)
        };
    let head: Vec<usize> = (0..net.num_nodes())
        .map(|v| {
            let (l, u) = if v == net.reference() {
                (h_ref, h_ref)
            } else {
                (h_ref - h_box, h_ref + h_box)
            };
            var(
                &mut lp,
                &mut names,
                format!("h[{}]", net.node(v).id),
                0.0,
                l,
                u,
            )
        })
        .collect();
    let mut flow = Vec::with_capacity(net.num_edges());
    let mut flow_m = Vec::with_capacity(net.num_edges());
    let mut dir = vec![None; net.num_edges()];
    let mut abs = vec![None; net.num_edges()];
    for (p, e) in net.edges().iter().enumerate() {
        match e.kind {
            EdgeKind::Pipe { c, rho } => {
                if rho != 2.0 {
                    return Err(WdsError::Unsupported(format!(
                        "pipe '{}' has exponent {rho}; W2 needs 2",
                        e.id
                    )));
                }
                if c <= 0.0 {
                    return Err(WdsError::Unsupported(format!(
                        "lossless link '{}' in W2",
                        e.id
                    )));
                }
                let fm = (big_m / (2.0 * c)).sqrt();
                flow_m.push(fm);
                flow.push(var(
                    &mut lp,
                    &mut names,
                    format!("f[{}]", e.id),
                    0.0,
                    -fm,
                    fm,
                ));
                dir[p] = Some(var(
                    &mut lp,
                    &mut names,
                    format!("x[{}]", e.id),
                    0.0,
                    0.0,
                    1.0,
                ));
                abs[p] = Some(var(
                    &mut lp,
                    &mut names,
                    format!("u[{}]", e.id),
                    1.0,
                    0.0,
                    2.0 * h_box,
                ));
            }
            EdgeKind::Pump(ref curve) => {
                // Largest flow whose gain still exceeds -2·h_box.
                let disc = curve.mu * curve.mu - 4.0 * curve.lambda * (curve.nu + 2.0 * h_box);
                let fm = (curve.mu + disc.max(0.0).sqrt()) / (-2.0 * curve.lambda);
                flow_m.push(fm);
                flow.push(var(
                    &mut lp,
                    &mut names,
                    format!("f[{}]", e.id),
                    0.0,
                    0.0,
                    fm,
                ));
                lp.objective[head[e.head]] -= 1.0;
                lp.objective[head[e.tail]] += 1.0;
            }
        }
    }
    let mut mass_rows = 0;
    for v in 0..net.num_nodes() {
        if v == net.reference() {
            continue;
        }
        let row = net
            .incident(v)
            .iter()
            .map(|i| {
                (
                    flow[i.edge],
                    if net.edge(i.edge).tail == v {
                        1.0
                    } else {
                        -1.0
                    },
                )
            })
            .collect();
        lp.add_eq(row, d[v]);
        mass_rows += 1;
    }
    let mut quads = Vec::new();
    let mut direction_rows = 0;
    for (p, e) in net.edges().iter().enumerate() {
        let (hm, hn, f) = (head[e.tail], head[e.head], flow[p]);
        match e.kind {
            EdgeKind::Pipe { c, .. } => {
                let (x, u) = (dir[p].unwrap(), abs[p].unwrap());
                let fm = flow_m[p];
                // −F(1−x) ≤ f ≤ F x
                lp.add_ge(vec![(f, 1.0), (x, -fm)], -fm);
                lp.add_le(vec![(f, 1.0), (x, -fm)], 0.0);
                direction_rows += 2;
                lp.add_ge(vec![(u, 1.0), (hm, -1.0), (hn, 1.0)], 0.0);
                lp.add_ge(vec![(u, 1.0), (hm, 1.0), (hn, -1.0)], 0.0);
                quads.push(Quad {
                    edge: p,
                    kind: QuadKind::PipeForward,
                    row: QuadRow {
                        var: f,
                        q: c,
                        lin: vec![(hm, -1.0), (hn, 1.0), (x, big_m)],
                        rhs: big_m,
                    },
                });
                quads.push(Quad {
                    edge: p,
                    kind: QuadKind::PipeReverse,
                    row: QuadRow {
                        var: f,
                        q: c,
                        lin: vec![(hm, 1.0), (hn, -1.0), (x, -big_m)],
                        rhs: 0.0,
                    },
                });
            }
            EdgeKind::Pump(ref curve) => quads.push(Quad {
                edge: p,
                kind: QuadKind::Pump,
                row: QuadRow {
                    var: f,
                    q: -curve.lambda,
                    lin: vec![(f, -curve.mu), (hn, 1.0), (hm, -1.0)],
                    rhs: curve.nu,
                },
            }),
        }
    }
    let binaries = dir.iter().flatten().copied().collect();
    let mut model = MipModel {
        lp,
        names,
        flow,
        head,
        dir,
        abs,
        binaries,
        quads,
        big_m,
        flow_m,
        mass_rows,
        direction_rows,
    };
    add_initial_cuts(net, &mut model);
    Ok(model)
}

/// Tangents at zero flow for pipes and at the range ends for pumps, so the
/// first relaxation already sees the curvature.
fn add_initial_cuts(net: &Network, model: &mut MipModel) {
    let mut rows = Vec::new();
    for q in &model.quads {
        let points: Vec<f64> = match net.edge(q.edge).kind {
            EdgeKind::Pipe { .. } => vec![0.0],
            EdgeKind::Pump(ref c) => vec![c.f_min, c.f_max],
        };
        for at in points {
            let (coeffs, rhs) = q.row.tangent(at);
            rows.push(LpRow::le(coeffs, rhs));
        }
    }
    for r in rows {
        model.lp.add_row(r);
    }
}

/// Fixes bridge flows (shared by every mass-conserving flow) and their
/// directions; returns how many binaries were removed.
pub fn presolve_bridges(net: &Network, d: &[f64], model: &mut MipModel) -> Result<usize> {
    let fixed = fix_noncycle_flows(net, d)?;
    let mut removed = 0;
    for (p, v) in fixed.iter().enumerate() {
        let Some(fp) = *v else { continue };
        let j = model.flow[p];
        let (l, u) = model.lp.bounds[j];
        if fp < l - 1e-9 || fp > u + 1e-9 {
            return Err(WdsError::Infeasible(format!(
                "bridge '{}' must carry {fp}, outside the model bound [{l}, {u}]",
                net.edge(p).id
            )));
        }
        model.lp.bounds[j] = (fp, fp);
        if let Some(x) = model.dir[p] {
            let xv = if fp >= 0.0 { 1.0 } else { 0.0 };
            model.lp.bounds[x] = (xv, xv);
            model.binaries.retain(|&b| b != x);
            removed += 1;
        }
    }
    Ok(removed)
}
