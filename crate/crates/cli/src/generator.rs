//! Random feasible instances built backwards from pressures.

use std::collections::BTreeSet;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use wdsflow_core::hydraulics::{edge_head_change, flows_from_pressures, validated_solution};
use wdsflow_core::{EdgeKind, Network, Result, WdsError, WfInput, WfSolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceGenConfig {
    pub seed: u64,
    pub reference_pressure: f64,
    pub pressure_mean: f64,
    pub pressure_variance: f64,
    pub pump_on_probability: f64,
    /// On-pump flows are uniform on this range, clipped to each pump's own.
    pub pump_flow: (f64, f64),
    /// Off pumps carry `N(0, off_flow_variance)`.
    pub off_flow_variance: f64,
    /// Base demands are scaled by a uniform draw from this range.
    pub demand_scale: (f64, f64),
}

impl Default for InstanceGenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            reference_pressure: 10.0,
            pressure_mean: 10.0,
            pressure_variance: 2.0,
            pump_on_probability: 0.5,
            pump_flow: (250.0, 1500.0),
            off_flow_variance: 200.0,
            demand_scale: (0.0, 1.5),
        }
    }
}

impl InstanceGenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(WdsError::Parameter(m.to_string()));
        if !(self.pressure_variance >= 0.0 && self.off_flow_variance >= 0.0) {
            return bad("variances must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.pump_on_probability) {
            return bad("pump on-probability must lie in [0, 1]");
        }
        if !(self.pump_flow.0 <= self.pump_flow.1 && self.demand_scale.0 <= self.demand_scale.1) {
            return bad("ranges must be ordered");
        }
        Ok(())
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub input: WfInput,
    pub truth: WfSolution,
}

/// Instance number `index` of the family fixed by `cfg.seed`.
pub fn generate_feasible_instance(
    net: &Network,
    cfg: &InstanceGenConfig,
    index: u64,
) -> Result<Instance> {
    cfg.validate()?;
    let mut rng = cfg.rng(index);
    let normal = |var: f64| Normal::new(0.0, var.sqrt()).expect("variance checked");
    let r = net.reference();
    let noise = normal(cfg.pressure_variance);
    let mut h: Vec<f64> = (0..net.num_nodes())
        .map(|v| {
            if v == r {
                cfg.reference_pressure
            } else {
                cfg.pressure_mean + noise.sample(&mut rng)
            }
        })
        .collect();
    let mut fixed = vec![false; net.num_nodes()];
    fixed[r] = true;
    let mut off = BTreeSet::new();
    let mut pump_flow = vec![0.0; net.num_edges()];
    let off_noise = normal(cfg.off_flow_variance);
    for p in net.pumps() {
        let e = net.edge(p);
        let curve = e.pump().expect("pump");
        let on = rng.random_bool(cfg.pump_on_probability);
        let change = if on {
            let lo = cfg.pump_flow.0.max(curve.f_min);
            let hi = cfg.pump_flow.1.min(curve.f_max);
            if lo > hi {
                return Err(WdsError::Parameter(format!(
                    "pump '{}' range misses the flow draw range",
                    e.id
                )));
            }
            pump_flow[p] = if lo < hi {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            edge_head_change(e, pump_flow[p], true)
        } else {
            off.insert(p);
            pump_flow[p] = off_noise.sample(&mut rng);
            0.0
        };
        // h_m - h_n = change
        if !fixed[e.head] {
            h[e.head] = h[e.tail] - change;
        } else if !fixed[e.tail] {
            h[e.tail] = h[e.head] + change;
        } else {
            return Err(WdsError::Unsupported(format!(
                "pump '{}' closes a cycle of pumps",
                e.id
            )));
        }
        fixed[e.tail] = true;
        fixed[e.head] = true;
    }
    // Pumps and lossless links are set above; the rest follow from pressures.
    let mut f = flows_from_pressures(&net.with_pipes_only(), &h, &BTreeSet::new())?;
    for p in net.pumps() {
        f[p] = pump_flow[p];
    }
    let d = net.net_outflow(&f);
    let input = WfInput::with_off_pumps(net, d, cfg.reference_pressure, off)?;
    let truth = validated_solution(net, &input, f, h, "generator");
    Ok(Instance { input, truth })
}

/// Base injections scaled by one uniform draw; the reference balances them.
pub fn scaled_injections(
    net: &Network,
    base: &[f64],
    cfg: &InstanceGenConfig,
    index: u64,
) -> Vec<f64> {
    let mut rng = cfg.rng(index);
    let (lo, hi) = cfg.demand_scale;
    let s = if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    };
    let r = net.reference();
    let mut d: Vec<f64> = base.iter().map(|v| s * v).collect();
    d[r] = 0.0;
    d[r] = -d.iter().sum::<f64>();
    d
}

trait PipesOnly {
    fn with_pipes_only(&self) -> Network;
}

impl PipesOnly for Network {
    /// Same graph with each pump swapped for a unit pipe, so that
    /// `flows_from_pressures` can run over it; pump flows are overwritten.
    fn with_pipes_only(&self) -> Network {
        let mut edges = self.edges().to_vec();
        for e in &mut edges {
            if let EdgeKind::Pump(_) = e.kind {
                e.kind = EdgeKind::Pipe { c: 1.0, rho: 2.0 };
            }
        }
        Network::new(self.nodes().to_vec(), edges, self.reference()).expect("same graph")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wdsflow_core::{NetworkBuilder, PumpCurve, SolutionStatus};

    const PUMP: PumpCurve = PumpCurve {
        lambda: -2.735e-5,
        mu: 0.0129,
        nu: 55.83,
        f_min: 250.0,
        f_max: 1500.0,
    };

    fn net() -> Network {
        NetworkBuilder::new()
            .junctions(["1", "2", "3", "4"])
            .pipe("12", "1", "2", 1e-5)
            .pump("q", "2", "3", PUMP)
            .pipe("34", "3", "4", 2e-5)
            .pipe("42", "4", "2", 3e-5)
            .build("1")
            .unwrap()
    }

    #[test]
    fn deterministic() {
        let cfg = InstanceGenConfig {
            seed: 7,
            ..Default::default()
        };
        let a = generate_feasible_instance(&net(), &cfg, 3).unwrap();
        let b = generate_feasible_instance(&net(), &cfg, 3).unwrap();
        assert_eq!(a.input, b.input);
        assert_eq!(a.truth, b.truth);
        let c = generate_feasible_instance(&net(), &cfg, 4).unwrap();
        assert_ne!(a.input, c.input);
    }

    #[test]
    fn injections_balance_and_truth_holds() {
        let n = net();
        let cfg = InstanceGenConfig {
            seed: 1,
            ..Default::default()
        };
        let mut on = 0;
        for k in 0..200 {
            let inst = generate_feasible_instance(&n, &cfg, k).unwrap();
            assert!(inst.input.injections.iter().sum::<f64>().abs() <= 1e-10);
            assert_eq!(inst.truth.status, SolutionStatus::Verified);
            assert!(inst.truth.max_edge_residual() <= 1e-10);
            assert_eq!(inst.truth.pressures[0], 10.0);
            if inst.input.off_pumps.is_empty() {
                on += 1;
                assert!((250.0..=1500.0).contains(&inst.truth.flows[1]));
            }
        }
        assert!((70..130).contains(&on), "{on}");
    }

    #[test]
    fn pump_into_reference_moves_tail() {
        let n = NetworkBuilder::new()
            .junctions(["1", "2"])
            .pump("q", "2", "1", PUMP)
            .pipe("p", "1", "2", 1e-4)
            .build("1")
            .unwrap();
        let cfg = InstanceGenConfig {
            pump_on_probability: 1.0,
            ..Default::default()
        };
        let inst = generate_feasible_instance(&n, &cfg, 0).unwrap();
        assert_eq!(inst.truth.pressures[0], 10.0);
        assert_eq!(inst.truth.status, SolutionStatus::Verified);
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = InstanceGenConfig {
            pressure_variance: -1.0,
            ..Default::default()
        };
        assert!(generate_feasible_instance(&net(), &cfg, 0).is_err());
    }

    #[test]
    fn scaled_demands_balance() {
        let n = net();
        let base = vec![0.0, -3.0, -2.0, -5.0];
        let cfg = InstanceGenConfig::default();
        for k in 0..20 {
            let d = scaled_injections(&n, &base, &cfg, k);
            assert!(d.iter().sum::<f64>().abs() < 1e-12);
            let s = d[1] / -3.0;
            assert!((0.0..=1.5).contains(&s));
        }
    }
}
