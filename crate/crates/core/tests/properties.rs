//! Graph, head-law and relaxation invariants.

mod common;

use std::collections::BTreeSet;

use common::{random_demands, random_network};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wdsflow_core::graph::{analyze_cycles, fix_noncycle_flows, tree_flows, tree_from_edge_order};
use wdsflow_core::hydraulics::{
    flow_from_drop, head_drop, pressures_from_flows, pump_flow_from_gain,
};
use wdsflow_core::miqcqp::exactness_report;
use wdsflow_core::PumpCurve;

const PUMP: PumpCurve = PumpCurve {
    lambda: -2.735e-5,
    mu: 0.0129,
    nu: 55.83,
    f_min: 250.0,
    f_max: 1500.0,
};

#[test]
fn incidence_columns_and_cycle_indicators() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..40 {
        let n = 3 + trial % 15;
        let net = random_network(&mut rng, n, trial % 6, (0.1, 1.0));
        let a = net.incidence();
        // One row per edge: +1 at the tail, -1 at the head.
        assert_eq!(a.len(), net.num_edges());
        for (row, e) in a.iter().zip(net.edges()) {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == -1.0).count(), 1);
            assert_eq!((row[e.tail], row[e.head]), (1.0, -1.0));
        }
        let cs = analyze_cycles(&net);
        assert_eq!(cs.cycles.len(), net.num_edges() + 1 - net.num_nodes());
        for c in &cs.cycles {
            let ind: Vec<f64> = c.indicator.iter().map(|&s| s as f64).collect();
            assert!(net.net_outflow(&ind).iter().all(|&v| v == 0.0));
            assert_eq!(c.indicator[c.generator], 1);
        }
        // Bridges are exactly the edges on no cycle.
        for p in 0..net.num_edges() {
            assert_eq!(cs.bridges.contains(&p), !cs.cycle_edges.contains(&p));
        }
    }
}

#[test]
fn bridge_flows_do_not_depend_on_the_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..30 {
        let n = 4 + trial % 12;
        let net = random_network(&mut rng, n, 1 + trial % 4, (0.1, 1.0));
        let d = random_demands(&mut rng, n, 10.0);
        let fixed = fix_noncycle_flows(&net, &d).unwrap();
        for _ in 0..5 {
            let mut order: Vec<usize> = (0..net.num_edges()).collect();
            order.shuffle(&mut rng);
            let f = tree_flows(&net, &tree_from_edge_order(&net, &order), &d);
            let gap = net.mass_residual(&f, &d).unwrap();
            assert!(gap.iter().all(|v| v.abs() < 1e-9));
            for (p, v) in fixed.iter().enumerate() {
                if let Some(fp) = v {
                    assert!(
                        (f[p] - fp).abs() <= 1e-9 * (1.0 + fp.abs()),
                        "bridge {p}: {} vs {fp}",
                        f[p]
                    );
                }
            }
        }
    }
}

#[test]
fn relaxation_gaps_nonnegative_at_inflated_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    use rand::RngExt;
    for trial in 0..30 {
        let n = 3 + trial % 10;
        let net = random_network(&mut rng, n, 0, (0.01, 1.0));
        let d = random_demands(&mut rng, n, 10.0);
        let f = tree_flows(&net, &analyze_cycles(&net).tree, &d);
        // Walk the tree again with every drop inflated by a random factor.
        let inflated: Vec<f64> = f
            .iter()
            .map(|&x| x * (1.0 + rng.random_range(0.0..0.5_f64)).sqrt())
            .collect();
        let (h, _) = pressures_from_flows(&net, &BTreeSet::new(), &inflated, 0.0).unwrap();
        let rep = exactness_report(&net, &BTreeSet::new(), &f, &h, 1e-6);
        assert!(
            rep.pipe_gaps.iter().all(|&(_, g)| g >= -1e-8),
            "{:?}",
            rep.pipe_gaps
        );
    }
}

proptest! {
    #[test]
    fn head_loss_round_trip(c in 1e-6f64..10.0, f in -5e3f64..5e3, rho in prop::sample::select(vec![2.0, 1.852, 1.5])) {
        let back = flow_from_drop(c, rho, head_drop(c, rho, f));
        prop_assert!((back - f).abs() <= 1e-12 * f.abs().max(1e-300));
    }

    #[test]
    fn drop_round_trip(c in 1e-6f64..10.0, dh in -500.0f64..500.0) {
        let back = head_drop(c, 2.0, flow_from_drop(c, 2.0, dh));
        prop_assert!((back - dh).abs() <= 1e-12 * dh.abs().max(1e-300));
    }

    #[test]
    fn pump_gain_decreases_on_range(a in 250.0f64..1500.0, b in 250.0f64..1500.0) {
        prop_assume!(a < b);
        prop_assert!(PUMP.gain(a) > PUMP.gain(b));
        prop_assert!(PUMP.slope(a) < 0.0);
    }

    #[test]
    fn pump_inverse(f in 250.0f64..1500.0) {
        let back = pump_flow_from_gain(&PUMP, PUMP.gain(f)).unwrap();
        prop_assert!((back - f).abs() <= 1e-9 * f);
    }
}
