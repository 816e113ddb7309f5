//! Networks whose pumps lie on no cycle: pump flows follow from the tree of
//! pump-free components, each component is solved convexly, and component
//! pressures are shifted across the pumps.

use std::collections::VecDeque;

use crate::energy::{solve_energy, SolverConfig};
use crate::error::{Result, WdsError};
use crate::graph::{bfs_tree, blocks, fix_noncycle_flows, induced, tree_flows};
use crate::hydraulics::{
    apply_off_pumps, edge_head_change, pressures_from_flows, validated_solution, OffPumpMode,
};
use crate::network::{balance_tolerance, Network, WfInput, WfSolution};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StitchConfig {
    pub energy: SolverConfig,
    pub off_pumps: OffPumpMode,
}

/// Pump-free components joined by pumps.
#[derive(Clone, Debug, PartialEq)]
pub struct Supergraph {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    /// `(pump edge, tail component, head component)`.
    pub pumps: Vec<(usize, usize, usize)>,
}

impl Supergraph {
    /// Components in breadth-first order from `start`, each with the pump
    /// that reached it.
    pub fn bfs(&self, start: usize) -> Vec<(usize, Option<usize>)> {
        let k = self.components.len();
        let mut seen = vec![false; k];
        let mut out = vec![(start, None)];
        seen[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(c) = q.pop_front() {
            for &(p, a, b) in &self.pumps {
                let next = if a == c {
                    b
                } else if b == c {
                    a
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    out.push((next, Some(p)));
                    q.push_back(next);
                }
            }
        }
        out
    }
}

/// Removes the pumps and checks that the components form a tree.
pub fn supergraph(net: &Network) -> Result<Supergraph> {
    let b = blocks(net);
    if let Some(p) = net
        .pumps()
        .find(|&p| !b.blocks[b.block_of_edge[p]].is_bridge())
    {
        return Err(WdsError::Unsupported(format!(
            "pump '{}' lies on a cycle",
            net.edge(p).id
        )));
    }
    let components = net.components(|p| !net.edge(p).is_pump());
    let mut component_of = vec![0; net.num_nodes()];
    for (k, c) in components.iter().enumerate() {
        for &v in c {
            component_of[v] = k;
        }
    }
    let pumps: Vec<_> = net
        .pumps()
        .map(|p| {
            (
                p,
                component_of[net.edge(p).tail],
                component_of[net.edge(p).head],
            )
        })
        .collect();
    debug_assert_eq!(pumps.len() + 1, components.len());
    Ok(Supergraph {
        components,
        component_of,
        pumps,
    })
}

/// Stitching on a network whose pumps are all running. Returns flows,
/// pressures and notes from the inner solves.
pub(crate) fn stitch(
    net: &Network,
    d: &[f64],
    h_ref: f64,
    cfg: &StitchConfig,
) -> Result<(Vec<f64>, Vec<f64>, Vec<String>)> {
    let sg = supergraph(net)?;
    let fixed = fix_noncycle_flows(net, d)?;
    let mut f = vec![0.0; net.num_edges()];
    let mut d_hat = d.to_vec();
    for &(p, _, _) in &sg.pumps {
        let fp = fixed[p].expect("pumps are bridges");
        f[p] = fp;
        let e = net.edge(p);
        d_hat[e.tail] -= fp;
        d_hat[e.head] += fp;
    }
    let mut h = vec![0.0; net.num_nodes()];
    let mut notes = Vec::new();
    for comp in &sg.components {
        let edges: Vec<usize> = (0..net.num_edges())
            .filter(|&p| {
                !net.edge(p).is_pump()
                    && sg.component_of[net.edge(p).tail] == sg.component_of[comp[0]]
            })
            .collect();
        let root = if comp.contains(&net.reference()) {
            net.reference()
        } else {
            comp[0]
        };
        let local_d: Vec<f64> = comp.iter().map(|&v| d_hat[v]).collect();
        let total: f64 = local_d.iter().sum();
        if total.abs() > balance_tolerance(d) {
            return Err(WdsError::InvalidInput(format!(
                "component of node '{}' has unbalanced injections ({total:e})",
                net.node(comp[0]).id
            )));
        }
        if edges.is_empty() {
            continue;
        }
        let (sub, local) = induced(net, comp, &edges, root)?;
        let (fl, hl) = solve_pump_free(&sub, local_d, cfg, &mut notes)?;
        for (i, &p) in edges.iter().enumerate() {
            f[p] = fl[i];
        }
        for &v in comp {
            h[v] = hl[local[v]];
        }
    }
    // Shift components outward from the reference across each pump.
    let start = sg.component_of[net.reference()];
    let shift0 = h_ref - h[net.reference()];
    for &v in &sg.components[start] {
        h[v] += shift0;
    }
    for (k, via) in sg.bfs(start).into_iter().skip(1) {
        let p = via.expect("non-root component has a pump");
        let e = net.edge(p);
        let dh = edge_head_change(e, f[p], true);
        let shift = if sg.component_of[e.head] == k {
            h[e.tail] - dh - h[e.head]
        } else {
            h[e.head] + dh - h[e.tail]
        };
        for &v in &sg.components[k] {
            h[v] += shift;
        }
    }
    Ok((f, h, notes))
}

/// Flows and pressures (reference at 0) of a pump-free network.
pub(crate) fn solve_pump_free(
    net: &Network,
    d: Vec<f64>,
    cfg: &StitchConfig,
    notes: &mut Vec<String>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if net.num_edges() + 1 == net.num_nodes() {
        let f = tree_flows(net, &bfs_tree(net), &d);
        let (h, _) = pressures_from_flows(net, &Default::default(), &f, 0.0)?;
        return Ok((f, h));
    }
    let input = WfInput::new(net, d, 0.0)?;
    let sol = solve_energy(net, &input, &cfg.energy)?;
    notes.extend(sol.diagnostics);
    Ok((sol.flows, sol.pressures))
}

/// Stitching solve for networks whose running pumps all lie on bridges.
pub fn solve_stitching(net: &Network, input: &WfInput, cfg: &StitchConfig) -> Result<WfSolution> {
    let reduced = apply_off_pumps(net, input, cfg.off_pumps)?;
    let (f, h, notes) = stitch(
        &reduced.net,
        &reduced.input.injections,
        input.reference_pressure,
        cfg,
    )?;
    let (f, h) = reduced.expand(net, input, &f, &h);
    let mut sol = validated_solution(net, input, f, h, "stitching");
    sol.diagnostics.extend(notes);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydraulics::pump_gain;
    use crate::network::{NetworkBuilder, PumpCurve, SolutionStatus};

    const PUMP: PumpCurve = PumpCurve {
        lambda: -2.735e-5,
        mu: 0.0129,
        nu: 55.83,
        f_min: 250.0,
        f_max: 1500.0,
    };

    #[test]
    fn pump_between_two_pipes() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3", "4"])
            .pipe("a", "1", "2", 1e-5)
            .pump("q", "2", "3", PUMP)
            .pipe("b", "3", "4", 1e-5)
            .build("1")
            .unwrap();
        let input = WfInput::new(&net, vec![600.0, 0.0, 0.0, -600.0], 10.0).unwrap();
        let sol = solve_stitching(&net, &input, &StitchConfig::default()).unwrap();
        assert_eq!(sol.status, SolutionStatus::Verified);
        assert_eq!(sol.flows[1], 600.0);
        let gain = sol.pressures[2] - sol.pressures[1];
        assert!((gain - pump_gain(&PUMP, 600.0)).abs() < 1e-9);
        assert_eq!(sol.pressures[0], 10.0);
    }

    #[test]
    fn pumps_in_series_make_a_path() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3", "4"])
            .pump("q1", "1", "2", PUMP)
            .pump("q2", "2", "3", PUMP)
            .pump("q3", "3", "4", PUMP)
            .build("1")
            .unwrap();
        let sg = supergraph(&net).unwrap();
        assert_eq!(sg.components.len(), 4);
        assert_eq!(sg.bfs(0).len(), 4);
    }

    #[test]
    fn pump_on_cycle_rejected() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3"])
            .pipe("a", "1", "2", 1.0)
            .pipe("b", "2", "3", 1.0)
            .pump("q", "3", "1", PUMP)
            .build("1")
            .unwrap();
        let input = WfInput::new(&net, vec![0.0; 3], 0.0).unwrap();
        let err = solve_stitching(&net, &input, &StitchConfig::default()).unwrap_err();
        assert!(matches!(err, WdsError::Unsupported(_)));
    }
}
