//! Networks whose pumps sit on bridges or on cycles sharing no edge with
//! another cycle. Pump cycles are contracted to supernodes, the rest is
//! stitched, and each pump cycle is solved on its own with W2.

use crate::dispatch::SolveConfig;
use crate::error::{Result, WdsError};
use crate::graph::{bfs_order, blocks, contract_supernodes, fix_noncycle_flows, induced};
use crate::hydraulics::{apply_off_pumps, edge_head_change, validated_solution};
use crate::miqcqp::{resolve_big_m, solve_reduced};
use crate::network::{Network, SolutionStatus, WfInput, WfSolution};
use crate::stitching::stitch;

/// Edge sets of the cyclic blocks that carry a pump. Errors if such a block
/// is more than a single cycle.
pub fn pump_cycles(net: &Network) -> Result<Vec<Vec<usize>>> {
    let b = blocks(net);
    let mut out: Vec<usize> = Vec::new();
    for p in net.pumps() {
        let k = b.block_of_edge[p];
        let blk = &b.blocks[k];
        if blk.is_bridge() || out.contains(&k) {
            continue;
        }
        if !blk.is_simple_cycle() {
            return Err(WdsError::Unsupported(format!(
                "pump '{}' lies on overlapping cycles",
                net.edge(p).id
            )));
        }
        out.push(k);
    }
    out.sort_unstable();
    Ok(out.into_iter().map(|k| b.blocks[k].edges.clone()).collect())
}

/// Flows and pressures of a network without off pumps.
fn hybrid_reduced(
    net: &Network,
    d: &[f64],
    h_ref: f64,
    cfg: &SolveConfig,
) -> Result<(Vec<f64>, Vec<f64>, Vec<String>)> {
    let cycles = pump_cycles(net)?;
    if cycles.is_empty() {
        return stitch(net, d, h_ref, &cfg.stitch_config()).map_err(|e| e.at("stitching"));
    }
    // T1: split shared nodes and contract each pump cycle.
    let (split, con) = contract_supernodes(net, &cycles).map_err(|e| e.at("contraction"))?;
    let s = &split.net;
    let ds = split.lift_injections(d);
    let mut dg = vec![0.0; con.net.num_nodes()];
    for (v, &r) in con.node_map.iter().enumerate() {
        dg[r] += ds[v];
    }
    // T2: supernode edges are bridges of the reduced graph.
    let fixed = fix_noncycle_flows(&con.net, &dg)?;
    let is_super = |v: usize| con.supernodes.contains(&v);
    let mut f = vec![0.0; s.num_edges()];
    let mut dh: Vec<Option<f64>> = vec![None; s.num_edges()];
    let mut d_hat = dg.clone();
    for (q, e) in con.net.edges().iter().enumerate() {
        if !(is_super(e.tail) || is_super(e.head)) {
            continue;
        }
        let fq = fixed[q].ok_or_else(|| {
            WdsError::Unsupported(format!(
                "edge '{}' next to a pump cycle is itself on a cycle",
                e.id
            ))
        })?;
        let p = con.edge_origin[q];
        f[p] = fq;
        dh[p] = Some(edge_head_change(s.edge(p), fq, true));
        // T3
        d_hat[e.tail] -= fq;
        d_hat[e.head] += fq;
    }
    // T4-T5: stitch each component left after removing the supernodes.
    let mut notes = Vec::new();
    let keep = |q: usize| {
        let e = con.net.edge(q);
        !is_super(e.tail) && !is_super(e.head)
    };
    for comp in con.net.components(keep) {
        if comp.len() == 1 && is_super(comp[0]) {
            continue;
        }
        let edges: Vec<usize> = (0..con.net.num_edges())
            .filter(|&q| keep(q) && comp.contains(&con.net.edge(q).tail))
            .collect();
        if edges.is_empty() {
            continue;
        }
        let (sub, local) = induced(&con.net, &comp, &edges, comp[0])?;
        let local_d: Vec<f64> = comp.iter().map(|&v| d_hat[v]).collect();
        let (fl, hl, n) = stitch(&sub, &local_d, 0.0, &cfg.stitch_config())
            .map_err(|e| e.at("component stitching"))?;
        notes.extend(n);
        for (i, &q) in edges.iter().enumerate() {
            let p = con.edge_origin[q];
            let e = con.net.edge(q);
            f[p] = fl[i];
            dh[p] = Some(hl[local[e.tail]] - hl[local[e.head]]);
        }
    }
    // T6-T7: each cycle with its boundary inflows as injections.
    for c in &cycles {
        let mut nodes: Vec<usize> = c
            .iter()
            .flat_map(|&p| [s.edge(p).tail, s.edge(p).head])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut local_d: Vec<f64> = nodes.iter().map(|&v| ds[v]).collect();
        for (i, &v) in nodes.iter().enumerate() {
            for inc in s.incident(v) {
                if c.contains(&inc.edge) {
                    continue;
                }
                let out = if s.edge(inc.edge).tail == v {
                    f[inc.edge]
                } else {
                    -f[inc.edge]
                };
                local_d[i] -= out;
            }
        }
        let (sub, _) = induced(s, &nodes, c, nodes[0])?;
        let mut big_m = resolve_big_m(&cfg.w2, &sub, &local_d);
        let mut res = solve_reduced(&sub, &local_d, 0.0, big_m, &cfg.w2);
        if let Some(m2) = cfg.w2.retry_big_m {
            let retry = match &res {
                Ok(a) => a.status != wdsflow_opt::BnbStatus::Optimal,
                Err(_) => true,
            };
            if retry && m2 != big_m {
                notes.push(format!("cycle W2 retried with big-M {m2}"));
                big_m = m2;
                res = solve_reduced(&sub, &local_d, 0.0, big_m, &cfg.w2);
            }
        }
        let a = res.map_err(|e| e.at("cycle W2"))?;
        if a.status != wdsflow_opt::BnbStatus::Optimal {
            notes.push(format!("cycle W2 stopped on budget with gap {:.3e}", a.gap));
        }
        for (i, &p) in c.iter().enumerate() {
            let e = sub.edge(i);
            f[p] = a.f[i];
            dh[p] = Some(a.h[e.tail] - a.h[e.head]);
        }
    }
    // T8: heads from the per-edge changes, outward from the reference.
    let mut h = vec![0.0; s.num_nodes()];
    h[s.reference()] = h_ref;
    for (u, via) in bfs_order(s, s.reference(), |_| true) {
        let Some(p) = via else { continue };
        let e = s.edge(p);
        let change = dh[p]
            .ok_or_else(|| WdsError::InvalidInput(format!("edge '{}' was never solved", e.id)))?;
        h[u] = if e.head == u {
            h[e.tail] - change
        } else {
            h[e.head] + change
        };
    }
    f.truncate(split.original_edges);
    h.truncate(net.num_nodes());
    Ok((f, h, notes))
}

/// Hybrid solve: stitching around pump cycles, W2 on each pump cycle.
pub fn solve_hybrid(net: &Network, input: &WfInput, cfg: &SolveConfig) -> Result<WfSolution> {
    let reduced = apply_off_pumps(net, input, cfg.off_pumps)?;
    let (f, h, notes) = hybrid_reduced(
        &reduced.net,
        &reduced.input.injections,
        input.reference_pressure,
        cfg,
    )?;
    let (f, h) = reduced.expand(net, input, &f, &h);
    let mut sol = validated_solution(net, input, f, h, "hybrid");
    sol.diagnostics.extend(notes);
    if sol.status == SolutionStatus::Candidate {
        log::warn!("hybrid solution failed validation: {:?}", sol.diagnostics);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkBuilder, PumpCurve};

    const PUMP: PumpCurve = PumpCurve {
        lambda: -2.735e-5,
        mu: 0.0129,
        nu: 55.83,
        f_min: 250.0,
        f_max: 1500.0,
    };

    /// Pump triangle hanging off a two-pipe tree, built from chosen heads.
    fn triangle_instance() -> (Network, WfInput, Vec<f64>, Vec<f64>) {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3", "4", "5"])
            .pipe("12", "1", "2", 1e-5)
            .pump("q", "2", "3", PUMP)
            .pipe("34", "3", "4", 1e-4)
            .pipe("42", "4", "2", 2e-4)
            .pipe("45", "4", "5", 1e-5)
            .build("1")
            .unwrap();
        let fq: f64 = 800.0;
        let mut h = vec![10.0, 9.0, 0.0, 0.0, 5.0];
        h[2] = h[1] + PUMP.gain(fq);
        h[3] = h[1] + 20.0;
        let f: Vec<f64> = net
            .edges()
            .iter()
            .enumerate()
            .map(|(p, e)| match e.pipe() {
                Some((c, _)) => crate::hydraulics::flow_from_drop(c, 2.0, h[e.tail] - h[e.head]),
                None => {
                    assert_eq!(p, 1);
                    fq
                }
            })
            .collect();
        let d: Vec<f64> = net.net_outflow(&f);
        let input = WfInput::new(&net, d, 10.0).unwrap();
        (net, input, f, h)
    }

    #[test]
    fn pump_triangle_recovers_ground_truth() {
        let (net, input, f, h) = triangle_instance();
        let sol = solve_hybrid(&net, &input, &SolveConfig::default()).unwrap();
        assert_eq!(
            sol.status,
            SolutionStatus::Verified,
            "{:?}",
            sol.diagnostics
        );
        for (a, b) in sol.flows.iter().zip(&f) {
            assert!((a - b).abs() <= 1e-4 * b.abs().max(1.0), "{a} vs {b}");
        }
        for (a, b) in sol.pressures.iter().zip(&h) {
            assert!((a - b).abs() <= 1e-4 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn pump_on_overlapping_cycles_rejected() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3", "4"])
            .pump("q", "1", "2", PUMP)
            .pipe("b", "2", "3", 1.0)
            .pipe("c", "3", "1", 1.0)
            .pipe("d", "3", "4", 1.0)
            .pipe("e", "4", "1", 1.0)
            .build("1")
            .unwrap();
        assert!(matches!(pump_cycles(&net), Err(WdsError::Unsupported(_))));
    }
}
