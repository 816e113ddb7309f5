use std::collections::BTreeSet;

use crate::network::{EdgeKind, Network};

/// How far a relaxed point is from satisfying the head laws with equality.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactnessReport {
    /// `|h_m − h_n| − c|f|^ρ` per pipe.
    pub pipe_gaps: Vec<(usize, f64)>,
    /// `g(f) − (h_n − h_m)` per running pump.
    pub pump_gaps: Vec<(usize, f64)>,
    pub max_pipe_gap: f64,
    pub max_pump_gap: f64,
    pub tolerance: f64,
    pub exact: bool,
}

impl ExactnessReport {
    pub fn max_gap(&self) -> f64 {
        self.max_pipe_gap.max(self.max_pump_gap)
    }

    /// Pipe with the largest gap.
    pub fn worst_pipe(&self) -> Option<(usize, f64)> {
        self.pipe_gaps
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub fn exactness_report(
    net: &Network,
    off: &BTreeSet<usize>,
    f: &[f64],
    h: &[f64],
    tolerance: f64,
) -> ExactnessReport {
    let mut pipe_gaps = Vec::new();
    let mut pump_gaps = Vec::new();
    for (p, e) in net.edges().iter().enumerate() {
        let dh = h[e.tail] - h[e.head];
        match e.kind {
            EdgeKind::Pipe { c, rho } => pipe_gaps.push((p, dh.abs() - c * f[p].abs().powf(rho))),
            EdgeKind::Pump(ref curve) if !off.contains(&p) => {
                pump_gaps.push((p, curve.gain(f[p]) + dh))
            }
            EdgeKind::Pump(_) => {}
        }
    }
    let max = |v: &[(usize, f64)]| v.iter().fold(f64::NEG_INFINITY, |m, g| m.max(g.1)).max(0.0);
    let max_pipe_gap = max(&pipe_gaps);
    let max_pump_gap = max(&pump_gaps);
    ExactnessReport {
        exact: max_pipe_gap <= tolerance && max_pump_gap <= tolerance,
        pipe_gaps,
        pump_gaps,
        max_pipe_gap,
        max_pump_gap,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

    #[test]
    fn gaps_of_exact_and_slack_points() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2"])
            .pipe("p", "1", "2", 2.0)
            .build("1")
            .unwrap();
        let r = exactness_report(&net, &BTreeSet::new(), &[3.0], &[20.0, 2.0], 1e-6);
        assert!(r.exact);
        assert_eq!(r.max_pipe_gap, 0.0);
        let r = exactness_report(&net, &BTreeSet::new(), &[3.0], &[21.0, 2.0], 1e-6);
        assert!(!r.exact);
        assert_eq!(r.max_gap(), 1.0);
        assert_eq!(r.worst_pipe(), Some((0, 1.0)));
    }
}
