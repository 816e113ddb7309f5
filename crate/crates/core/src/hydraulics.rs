//! Head-loss and pump laws, their inverses, off-pump reduction, and recovery
//! of pressures from flows (and back).

use std::collections::BTreeSet;

use crate::error::{Result, WdsError};
use crate::graph::{bfs_tree, tree_flows, UnionFind};
use crate::network::{Edge, EdgeKind, Network, PumpCurve, SolutionStatus, WfInput, WfSolution};

/// `c·sign(f)·|f|^rho`
pub fn head_drop(c: f64, rho: f64, f: f64) -> f64 {
    c * f.signum() * f.abs().powf(rho)
}

/// Inverse of [`head_drop`]: `sign(Δh)·(|Δh|/c)^(1/rho)`.
pub fn flow_from_drop(c: f64, rho: f64, dh: f64) -> f64 {
    if dh == 0.0 {
        return 0.0;
    }
    dh.signum() * (dh.abs() / c).powf(1.0 / rho)
}

pub fn pump_gain(pump: &PumpCurve, f: f64) -> f64 {
    pump.gain(f)
}

/// Flow on `[f_min, f_max]` delivering gain `g`, from the decreasing branch of
/// the curve.
pub fn pump_flow_from_gain(pump: &PumpCurve, g: f64) -> Result<f64> {
    let g_hi = pump.gain(pump.f_min);
    let g_lo = pump.gain(pump.f_max);
    let slack = 1e-9 * (1.0 + g_hi.abs());
    if g > g_hi + slack || g < g_lo - slack {
        return Err(WdsError::Infeasible(format!(
            "pump gain {g} outside the curve range [{g_lo}, {g_hi}]"
        )));
    }
    let disc = (pump.mu * pump.mu - 4.0 * pump.lambda * (pump.nu - g)).max(0.0);
    // (μ + √D)/(−2λ) without cancellation when μ and √D are both positive.
    let f = (pump.mu + disc.sqrt()) / (-2.0 * pump.lambda);
    Ok(f.clamp(pump.f_min, pump.f_max))
}

/// Expected `h_tail − h_head` on edge `e` carrying flow `f`. Off pumps act
/// as lossless bypass valves.
pub fn edge_head_change(e: &Edge, f: f64, on: bool) -> f64 {
    match e.kind {
        EdgeKind::Pipe { c, rho } => head_drop(c, rho, f),
        EdgeKind::Pump(ref p) if on => -p.gain(f),
        EdgeKind::Pump(_) => 0.0,
    }
}

/// Head recovery: walk a spanning tree from the reference and apply
/// each edge law. Returns pressures and the per-edge law violation, which is
/// nonzero only on off-tree edges when `f` is not a WF solution.
pub fn pressures_from_flows(
    net: &Network,
    off: &BTreeSet<usize>,
    f: &[f64],
    h_ref: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    net.check_len("flows", f.len(), net.num_edges())?;
    let tree = bfs_tree(net);
    let mut h = vec![0.0; net.num_nodes()];
    h[tree.root] = h_ref;
    for &u in &tree.order[1..] {
        let p = tree.parent_edge[u].expect("non-root has parent");
        let e = net.edge(p);
        let dh = edge_head_change(e, f[p], !off.contains(&p));
        h[u] = if e.head == u {
            h[e.tail] - dh
        } else {
            h[e.head] + dh
        };
    }
    let residual = edge_residuals(net, off, f, &h);
    Ok((h, residual))
}

/// `|h_tail − h_head − expected change|` per edge.
pub fn edge_residuals(net: &Network, off: &BTreeSet<usize>, f: &[f64], h: &[f64]) -> Vec<f64> {
    net.edges()
        .iter()
        .enumerate()
        .map(|(p, e)| (h[e.tail] - h[e.head] - edge_head_change(e, f[p], !off.contains(&p))).abs())
        .collect()
}

/// Flows implied edge by edge by pressures `h`.
pub fn flows_from_pressures(net: &Network, h: &[f64], off: &BTreeSet<usize>) -> Result<Vec<f64>> {
    net.check_len("pressures", h.len(), net.num_nodes())?;
    net.edges()
        .iter()
        .enumerate()
        .map(|(p, e)| {
            let dh = h[e.tail] - h[e.head];
            match e.kind {
                EdgeKind::Pipe { c, .. } if c == 0.0 => Err(WdsError::Infeasible(format!(
                    "flow on lossless link '{}' is not determined by pressures",
                    e.id
                ))),
                EdgeKind::Pipe { c, rho } => Ok(flow_from_drop(c, rho, dh)),
                EdgeKind::Pump(_) if off.contains(&p) => Err(WdsError::Infeasible(format!(
                    "flow through off pump '{}' is not determined by pressures",
                    e.id
                ))),
                EdgeKind::Pump(ref curve) => pump_flow_from_gain(curve, -dh)
                    .map_err(|err| WdsError::Infeasible(format!("pump '{}': {err}", e.id))),
            }
        })
        .collect()
}

/// How switched-off pumps enter the solver graph.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum OffPumpMode {
    /// Merge the pump's end nodes (`h_m = h_n`).
    #[default]
    Contract,
    /// Replace the pump by a short pipe with this loss coefficient.
    BypassPipe { c: f64 },
}

/// A network with its off pumps removed, plus the maps back to the original.
#[derive(Clone, Debug)]
pub struct ReducedNetwork {
    pub net: Network,
    pub input: WfInput,
    /// Original node -> reduced node.
    pub node_map: Vec<usize>,
    /// Original edge -> reduced edge; `None` for contracted off pumps.
    pub edge_map: Vec<Option<usize>>,
    mode: OffPumpMode,
}

pub fn apply_off_pumps(
    net: &Network,
    input: &WfInput,
    mode: OffPumpMode,
) -> Result<ReducedNetwork> {
    if input.off_pumps.is_empty() {
        return Ok(ReducedNetwork {
            net: net.clone(),
            input: input.clone(),
            node_map: (0..net.num_nodes()).collect(),
            edge_map: (0..net.num_edges()).map(Some).collect(),
            mode,
        });
    }
    match mode {
        OffPumpMode::BypassPipe { c } => {
            if !(c > 0.0) {
                return Err(WdsError::Parameter(format!(
                    "bypass coefficient must be positive, got {c}"
                )));
            }
            let edges = net
                .edges()
                .iter()
                .enumerate()
                .map(|(p, e)| {
                    let mut e = e.clone();
                    if input.off_pumps.contains(&p) {
                        e.kind = EdgeKind::Pipe { c, rho: 2.0 };
                    }
                    e
                })
                .collect();
            let reduced = Network::new(net.nodes().to_vec(), edges, net.reference())?;
            let input2 =
                WfInput::new(&reduced, input.injections.clone(), input.reference_pressure)?;
            Ok(ReducedNetwork {
                net: reduced,
                input: input2,
                node_map: (0..net.num_nodes()).collect(),
                edge_map: (0..net.num_edges()).map(Some).collect(),
                mode,
            })
        }
        OffPumpMode::Contract => {
            let mut uf = UnionFind::new(net.num_nodes());
            for &p in &input.off_pumps {
                uf.union(net.edge(p).tail, net.edge(p).head);
            }
            // Each group is represented by its smallest original node.
            let mut node_map = vec![usize::MAX; net.num_nodes()];
            let mut nodes = Vec::new();
            for v in 0..net.num_nodes() {
                let r = uf.find(v);
                if r == v {
                    node_map[v] = nodes.len();
                    nodes.push(net.node(v).clone());
                }
            }
            for v in 0..net.num_nodes() {
                node_map[v] = node_map[uf.find(v)];
            }
            let mut d = vec![0.0; nodes.len()];
            for v in 0..net.num_nodes() {
                d[node_map[v]] += input.injections[v];
            }
            let mut edges = Vec::new();
            let mut edge_map = vec![None; net.num_edges()];
            for (p, e) in net.edges().iter().enumerate() {
                if input.off_pumps.contains(&p) {
                    continue;
                }
                let (t, h) = (node_map[e.tail], node_map[e.head]);
                if t == h {
                    return Err(WdsError::Unsupported(format!(
                        "edge '{}' becomes a self-loop once off pumps are contracted",
                        e.id
                    )));
                }
                edge_map[p] = Some(edges.len());
                edges.push(Edge {
                    id: e.id.clone(),
                    tail: t,
                    head: h,
                    kind: e.kind,
                });
            }
            let reduced = Network::new_internal(nodes, edges, node_map[net.reference()])?;
            let input2 = WfInput::new(&reduced, d, input.reference_pressure)?;
            Ok(ReducedNetwork {
                net: reduced,
                input: input2,
                node_map,
                edge_map,
                mode,
            })
        }
    }
}

impl ReducedNetwork {
    /// Lifts reduced flows and pressures to the original network. Bypass
    /// flows of contracted pumps follow from mass balance; if bypasses close
    /// a loop among themselves the loop carries no flow.
    pub fn expand(
        &self,
        original: &Network,
        input: &WfInput,
        f: &[f64],
        h: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hv: Vec<f64> = self.node_map.iter().map(|&r| h[r]).collect();
        let mut fv = vec![0.0; original.num_edges()];
        for (p, m) in self.edge_map.iter().enumerate() {
            if let Some(q) = m {
                fv[p] = f[*q];
            }
        }
        if matches!(self.mode, OffPumpMode::Contract) && !input.off_pumps.is_empty() {
            let residual = original
                .mass_residual(&fv, &input.injections)
                .expect("dimensions");
            let need: Vec<f64> = residual.iter().map(|r| -r).collect();
            let valves = valve_forest(original, &input.off_pumps);
            let solved = tree_flows(original, &valves, &need);
            for &p in &input.off_pumps {
                fv[p] = solved[p];
            }
        }
        (fv, hv)
    }
}

/// Spanning forest of the off-pump edges, shaped as a `SpanningTree` whose
/// non-valve parts are isolated roots so `tree_flows` can back-substitute.
fn valve_forest(net: &Network, off: &BTreeSet<usize>) -> crate::graph::SpanningTree {
    let n = net.num_nodes();
    let mut parent_edge = vec![None; n];
    let mut in_tree = vec![false; net.num_edges()];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let start = order.len();
        order.push(s);
        let mut k = start;
        while k < order.len() {
            let u = order[k];
            k += 1;
            for inc in net.incident(u) {
                if off.contains(&inc.edge) && !seen[inc.other] {
                    seen[inc.other] = true;
                    parent_edge[inc.other] = Some(inc.edge);
                    in_tree[inc.edge] = true;
                    order.push(inc.other);
                }
            }
        }
    }
    crate::graph::SpanningTree {
        root: 0,
        parent_edge,
        order,
        in_tree,
    }
}

pub const DEFAULT_MASS_TOL: f64 = 1e-6;
pub const DEFAULT_EDGE_TOL: f64 = 1e-6;

/// Checks `(f, h)` against every WF equation and packages the result.
pub fn validated_solution(
    net: &Network,
    input: &WfInput,
    flows: Vec<f64>,
    pressures: Vec<f64>,
    tag: impl Into<String>,
) -> WfSolution {
    let mass = net
        .mass_residual(&flows, &input.injections)
        .expect("dimensions");
    let residual_mass = mass.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let residual_edges = edge_residuals(net, &input.off_pumps, &flows, &pressures);
    let mut diagnostics = Vec::new();
    for p in net.pumps() {
        if !input.is_on(p) {
            continue;
        }
        let curve = net.edge(p).pump().expect("pump");
        let f = flows[p];
        if f < curve.f_min - 1e-9 || f > curve.f_max + 1e-9 {
            diagnostics.push(format!(
                "pump '{}' runs at {f:.6} m3/h, outside [{}, {}]",
                net.edge(p).id,
                curve.f_min,
                curve.f_max
            ));
        }
    }
    let max_edge = residual_edges.iter().fold(0.0_f64, |m, v| m.max(*v));
    let ref_ok = pressures[net.reference()] == input.reference_pressure;
    let mass_tol = DEFAULT_MASS_TOL * input.injections.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let status = if residual_mass <= mass_tol && max_edge <= DEFAULT_EDGE_TOL && ref_ok {
        SolutionStatus::Verified
    } else {
        diagnostics.push(format!(
            "validation failed: mass residual {residual_mass:.3e}, max edge residual {max_edge:.3e}"
        ));
        SolutionStatus::Candidate
    };
    WfSolution {
        flows,
        pressures,
        residual_mass,
        residual_edges,
        solver_tag: tag.into(),
        status,
        diagnostics,
    }
}

/// Exact solution of a tree network: flows by back-substitution, pressures
/// by walking the edge laws from the reference.
pub fn solve_tree(net: &Network, input: &WfInput) -> Result<WfSolution> {
    if net.num_edges() + 1 != net.num_nodes() {
        return Err(WdsError::Unsupported("network has cycles".into()));
    }
    let tree = bfs_tree(net);
    let f = tree_flows(net, &tree, &input.injections);
    let (h, _) = pressures_from_flows(net, &input.off_pumps, &f, input.reference_pressure)?;
    Ok(validated_solution(net, input, f, h, "tree"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

    pub(crate) const REF_PUMP: PumpCurve = PumpCurve {
        lambda: -2.735e-5,
        mu: 0.0129,
        nu: 55.83,
        f_min: 250.0,
        f_max: 1500.0,
    };

    #[test]
    fn head_drop_examples() {
        assert_eq!(head_drop(2.0, 2.0, 3.0), 18.0);
        assert_eq!(head_drop(2.0, 2.0, -3.0), -18.0);
        assert!((head_drop(1.0, 1.852, 2.0) - 2f64.powf(1.852)).abs() < 1e-15);
        assert!((head_drop(1.0, 1.852, 2.0) - 3.610003).abs() < 1e-5);
        assert_eq!(flow_from_drop(2.0, 2.0, 18.0), 3.0);
        assert_eq!(flow_from_drop(2.0, 2.0, 0.0), 0.0);
    }

    #[test]
    fn pump_examples() {
        assert!((pump_gain(&REF_PUMP, 1000.0) - 41.38).abs() < 1e-9);
        assert_eq!(pump_gain(&REF_PUMP, 0.0), 55.83);
        assert!(pump_gain(&REF_PUMP, 1500.0) < pump_gain(&REF_PUMP, 250.0));
        let g = pump_gain(&REF_PUMP, 1000.0);
        assert!((pump_flow_from_gain(&REF_PUMP, g).unwrap() - 1000.0).abs() < 1e-9);
        let gmin = pump_gain(&REF_PUMP, REF_PUMP.f_min);
        assert!((pump_flow_from_gain(&REF_PUMP, gmin).unwrap() - 250.0).abs() < 1e-9);
        assert!(pump_flow_from_gain(&REF_PUMP, 60.0).is_err());
    }

    #[test]
    fn pressures_along_pipe_and_pump() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2"])
            .pipe("p", "1", "2", 2.0)
            .build("1")
            .unwrap();
        let (h, _) = pressures_from_flows(&net, &BTreeSet::new(), &[1.0], 10.0).unwrap();
        assert_eq!(h, vec![10.0, 8.0]);
        let net = NetworkBuilder::new()
            .junctions(["1", "2"])
            .pump("q", "1", "2", REF_PUMP)
            .build("1")
            .unwrap();
        let (h, _) = pressures_from_flows(&net, &BTreeSet::new(), &[1000.0], 10.0).unwrap();
        assert!((h[1] - 51.38).abs() < 1e-9);
    }

    #[test]
    fn equal_pressures_give_zero_flow() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3"])
            .pipe("a", "1", "2", 1.0)
            .pipe("b", "2", "3", 3.0)
            .pipe("c", "1", "3", 2.0)
            .build("1")
            .unwrap();
        assert_eq!(
            flows_from_pressures(&net, &[5.0; 3], &BTreeSet::new()).unwrap(),
            vec![0.0; 3]
        );
    }

    #[test]
    fn off_pump_contraction_on_bridge() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3"])
            .pipe("a", "1", "2", 1.0)
            .pump("q", "2", "3", REF_PUMP)
            .build("1")
            .unwrap();
        let input =
            WfInput::with_off_pumps(&net, vec![2.0, 0.0, -2.0], 10.0, BTreeSet::from([1])).unwrap();
        let r = apply_off_pumps(&net, &input, OffPumpMode::Contract).unwrap();
        assert_eq!(r.net.num_nodes(), 2);
        let sol = solve_tree(&r.net, &r.input).unwrap();
        let (f, h) = r.expand(&net, &input, &sol.flows, &sol.pressures);
        assert_eq!(f, vec![2.0, 2.0]);
        assert_eq!(h, vec![10.0, 6.0, 6.0]);
        let checked = validated_solution(&net, &input, f, h, "t");
        assert_eq!(checked.status, SolutionStatus::Verified);
    }

    #[test]
    fn all_pumps_on_is_identity() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2"])
            .pump("q", "1", "2", REF_PUMP)
            .build("1")
            .unwrap();
        let input = WfInput::new(&net, vec![500.0, -500.0], 10.0).unwrap();
        let r = apply_off_pumps(&net, &input, OffPumpMode::Contract).unwrap();
        assert_eq!(r.net, net);
    }

    #[test]
    fn off_pump_flows_are_not_determined_by_pressures() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2"])
            .pump("q", "1", "2", REF_PUMP)
            .build("1")
            .unwrap();
        assert!(flows_from_pressures(&net, &[1.0, 1.0], &BTreeSet::from([0])).is_err());
    }
}
