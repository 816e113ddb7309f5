//! Energy-solver flows against a brute-force search over loop flows.

mod common;

use common::{random_demands, random_network, rel_err};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wdsflow_core::energy::{solve_energy, SolverConfig};
use wdsflow_core::graph::{analyze_cycles, tree_flows};
use wdsflow_core::{Network, WfInput};

fn energy(net: &Network, f: &[f64]) -> f64 {
    net.edges()
        .iter()
        .zip(f)
        .map(|(e, &x)| {
            let (c, rho) = e.pipe().unwrap();
            c * x.abs().powf(rho + 1.0) / (rho + 1.0)
        })
        .sum()
}

/// Minimizes the energy over `f0 + Σ t_l n_l` by a shrinking grid.
fn loop_flow_oracle(net: &Network, d: &[f64]) -> Vec<f64> {
    let cs = analyze_cycles(net);
    let f0 = tree_flows(net, &cs.tree, d);
    let k = cs.cycles.len();
    let at = |t: &[f64]| -> Vec<f64> {
        let mut f = f0.clone();
        for (l, c) in cs.cycles.iter().enumerate() {
            for (p, &s) in c.indicator.iter().enumerate() {
                f[p] += s as f64 * t[l];
            }
        }
        f
    };
    let mut center = vec![0.0; k];
    let mut half = d.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    let pts = 11usize;
    while half > 1e-13 * d.iter().fold(1.0_f64, |m, x| m.max(x.abs())) {
        let step = 2.0 * half / (pts - 1) as f64;
        let mut best = (f64::INFINITY, center.clone());
        for idx in 0..pts.pow(k as u32) {
            let mut r = idx;
            let t: Vec<f64> = (0..k)
                .map(|l| {
                    let i = r % pts;
                    r /= pts;
                    center[l] - half + step * i as f64
                })
                .collect();
            let e = energy(net, &at(&t));
            if e < best.0 {
                best = (e, t);
            }
        }
        center = best.1;
        half = 2.0 * step;
    }
    at(&center)
}

#[test]
fn energy_matches_loop_flow_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = SolverConfig::default();
    for trial in 0..30 {
        let n = 4 + trial % 9;
        let extra = 1 + trial % 3;
        let net = random_network(&mut rng, n, extra, (1e-4, 1e-2));
        let d = random_demands(&mut rng, n, 50.0);
        let oracle = loop_flow_oracle(&net, &d);
        let input = WfInput::new(&net, d, 0.0).unwrap();
        let sol = solve_energy(&net, &input, &cfg).unwrap();
        let err = rel_err(&sol.flows, &oracle, 1e-9);
        assert!(err <= 1e-4, "trial {trial}: relative flow error {err:e}");
        assert!(sol.max_edge_residual() <= 1e-6);
    }
}

#[test]
fn two_loop_network() {
    // Two loops sharing the pipe 2-3.
    let net = wdsflow_core::NetworkBuilder::new()
        .junctions(["1", "2", "3", "4"])
        .pipe("12", "1", "2", 1.0)
        .pipe("13", "1", "3", 2.0)
        .pipe("23", "2", "3", 0.5)
        .pipe("24", "2", "4", 1.5)
        .pipe("34", "3", "4", 1.0)
        .build("1")
        .unwrap();
    let d = vec![10.0, -2.0, -3.0, -5.0];
    let oracle = loop_flow_oracle(&net, &d);
    let sol = solve_energy(
        &net,
        &WfInput::new(&net, d, 0.0).unwrap(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(
        rel_err(&sol.flows, &oracle, 1e-9) <= 1e-4,
        "{:?} vs {oracle:?}",
        sol.flows
    );
}
