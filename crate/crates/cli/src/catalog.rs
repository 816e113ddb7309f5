//! Built-in test networks. Names are accepted by the CLI wherever a file is.
//!
//! Pump curves use the default `λ = −2.735e-5, μ = 0.0129, ν = 55.83` on
//! `[250, 1500]` m³/h; pipe coefficients are in m/(m³/h)².

use wdsflow_core::{Network, NetworkBuilder, Result};

use crate::inp::DEFAULT_PUMP;

/// Deterministic spread of coefficients in `[lo, hi]`.
fn spread(k: usize, lo: f64, hi: f64) -> f64 {
    let t = ((k * 7919) % 97) as f64 / 96.0;
    lo * (hi / lo).powf(t)
}

fn build(
    nodes: usize,
    pipes: &[(usize, usize)],
    pumps: &[(usize, usize)],
    lo: f64,
    hi: f64,
) -> Result<Network> {
    let mut b = NetworkBuilder::new().junctions((1..=nodes).map(|v| v.to_string()));
    for (k, &(m, n)) in pipes.iter().enumerate() {
        b = b.pipe(
            format!("p{m}-{n}"),
            m.to_string(),
            n.to_string(),
            spread(k, lo, hi),
        );
    }
    for &(m, n) in pumps {
        b = b.pump(
            format!("q{m}-{n}"),
            m.to_string(),
            n.to_string(),
            DEFAULT_PUMP,
        );
    }
    b.build("1")
}

/// 23 nodes, 25 pipes and 3 pumps. Pump cycles 1-2-3-4 and 14-15-16-17;
/// removing them leaves three pieces (nodes 5..13, 18..21, 22..23); the
/// third pump 11-12 is a bridge inside the first piece.
pub fn pump_cycles23() -> Result<Network> {
    let pipes = [
        (2, 3),
        (3, 4),
        (4, 1),
        (15, 16),
        (16, 17),
        (17, 14),
        (3, 18),
        (13, 14),
        (16, 22),
        (18, 19),
        (19, 20),
        (20, 21),
        (21, 18),
        (22, 23),
        (4, 5),
        (5, 6),
        (6, 4),
        (5, 7),
        (7, 6),
        (7, 8),
        (8, 9),
        (9, 10),
        (10, 7),
        (10, 11),
        (12, 13),
    ];
    build(23, &pipes, &[(1, 2), (14, 15), (11, 12)], 1e-5, 5e-5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Twin20 {
    Full,
    /// Pumps only on cycles that share no edge with another cycle.
    Ci,
    /// Pump cycle 3-4-5-9 shares pipe 5-9 with the cycle 5-9-10.
    Cii,
}

/// Two pumped copies of a 10-node block, tied by three pipes.
pub fn twin20(config: Twin20) -> Result<Network> {
    let mut pipes = vec![
        (1, 3),
        (4, 5),
        (5, 9),
        (9, 3),
        (9, 10),
        (10, 5),
        (5, 6),
        (6, 8),
        (6, 7),
        (7, 8),
        (2, 3),
        (11, 13),
        (14, 15),
        (15, 19),
        (19, 13),
        (14, 20),
        (15, 16),
        (16, 18),
        (16, 17),
        (17, 18),
        (12, 13),
        (1, 2),
        (7, 14),
        (8, 20),
    ];
    match config {
        Twin20::Full => {}
        Twin20::Ci => pipes.retain(|&e| e != (9, 10)),
        Twin20::Cii => pipes.retain(|&e| e != (8, 20)),
    }
    build(20, &pipes, &[(3, 4), (13, 14)], 5e-6, 5e-5)
}

/// 4 nodes, 5 pipes: triangles 1-2-3 and 1-3-4 share pipe 1-3.
pub fn twin_triangles(c: [f64; 5]) -> Result<Network> {
    let ids = [
        ("12", "1", "2"),
        ("23", "2", "3"),
        ("13", "1", "3"),
        ("34", "3", "4"),
        ("14", "1", "4"),
    ];
    let mut b = NetworkBuilder::new().junctions(["1", "2", "3", "4"]);
    for ((id, m, n), c) in ids.into_iter().zip(c) {
        b = b.pipe(id, m, n, c);
    }
    b.build("1")
}

/// Mesh pipes of the 36-node, 40-pipe network, nodes numbered
/// from 1: a binary tree plus five chords.
fn mesh40() -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = (2..=36).map(|k| (k / 2, k)).collect();
    e.extend([(8, 9), (20, 21), (12, 26), (30, 15), (33, 34)]);
    e
}

/// Pump-free 36-node, 40-pipe mesh. Coefficients in [3e-5, 3e-4] put
/// c|f| near 1e-3 for nodal demands of 10 to 50 m3/h.
pub fn mesh40_normalized() -> Result<Network> {
    build(36, &mesh40(), &[], 3e-5, 3e-4)
}

/// Source pipe into a 3×3 grid, no pumps.
pub fn grid3x3() -> Result<Network> {
    let mut pipes = vec![(1, 2)];
    for r in 0..3 {
        for k in 0..3 {
            let v = 2 + 3 * r + k;
            if k < 2 {
                pipes.push((v, v + 1));
            }
            if r < 2 {
                pipes.push((v, v + 3));
            }
        }
    }
    build(10, &pipes, &[], 1e-5, 5e-5)
}

/// A source feeding the 40-pipe mesh through one pump.
pub fn pumped_mesh40() -> Result<Network> {
    let pipes: Vec<(usize, usize)> = mesh40().into_iter().map(|(m, n)| (m + 1, n + 1)).collect();
    build(37, &pipes, &[(1, 2)], 1e-5, 1e-4)
}

/// One pump from the source into a 2×4 grid of pipes.
pub fn pump_mesh() -> Result<Network> {
    let pipes = [
        (2, 3),
        (3, 4),
        (4, 5),
        (6, 7),
        (7, 8),
        (8, 9),
        (2, 6),
        (3, 7),
        (4, 8),
        (5, 9),
    ];
    build(9, &pipes, &[(1, 2)], 1e-5, 5e-5)
}

/// Three simple cycles on a chain of bridges, pumps on two of them.
pub fn pump_rings() -> Result<Network> {
    let pipes = [
        (1, 2),
        (3, 4),
        (4, 2),
        (4, 5),
        (5, 6),
        (7, 8),
        (8, 5),
        (8, 9),
        (9, 10),
        (10, 11),
        (11, 9),
        (7, 12),
    ];
    build(12, &pipes, &[(2, 3), (6, 7)], 1e-5, 5e-5)
}

pub const NAMES: [&str; 10] = [
    "pump-cycles23",
    "twin20",
    "twin20-ci",
    "twin20-cii",
    "pumped-mesh40",
    "mesh40",
    "grid3x3",
    "pump-mesh",
    "pump-rings",
    "twin-triangles",
];

/// Pipe coefficients (12, 23, 13, 34, 14) of the built-in twin-triangles network.
/// Pipe 13 is three orders of magnitude smaller than its neighbours.
pub const TRIANGLES_C: [f64; 5] = [7.75e-4, 9.32e-3, 1.19e-6, 5.84e-3, 6.22e-4];

/// Demands at nodes 2 and 4 (m3/h) that make W2 inexact on twin-triangles.
pub const TRIANGLES_DEMANDS: [f64; 2] = [172.0, 154.0];

pub fn by_name(name: &str) -> Option<Result<Network>> {
    Some(match name {
        "pump-cycles23" => pump_cycles23(),
        "twin20" => twin20(Twin20::Full),
        "twin20-ci" => twin20(Twin20::Ci),
        "twin20-cii" => twin20(Twin20::Cii),
        "pumped-mesh40" => pumped_mesh40(),
        "mesh40" => mesh40_normalized(),
        "grid3x3" => grid3x3(),
        "pump-mesh" => pump_mesh(),
        "pump-rings" => pump_rings(),
        "twin-triangles" => twin_triangles(TRIANGLES_C),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use wdsflow_core::graph::{analyze_cycles, classify_network, TopologyClass};

    #[test]
    fn sizes() {
        let n = pump_cycles23().unwrap();
        assert_eq!(
            (n.num_nodes(), n.num_edges(), n.pumps().count()),
            (23, 28, 3)
        );
        let n = pumped_mesh40().unwrap();
        assert_eq!((n.num_nodes(), n.num_edges()), (37, 41));
        assert_eq!(mesh40_normalized().unwrap().num_edges(), 40);
        assert_eq!(grid3x3().unwrap().num_edges(), 13);
        assert_eq!(twin20(Twin20::Full).unwrap().num_nodes(), 20);
    }

    #[test]
    fn classes() {
        use TopologyClass::*;
        let table = [
            (pump_cycles23(), PumpsNotInOverlappingCycles),
            (twin20(Twin20::Full), Unsupported),
            (twin20(Twin20::Ci), PumpsNotInOverlappingCycles),
            (twin20(Twin20::Cii), Unsupported),
            (pumped_mesh40(), PumpsNotInCycles),
            (mesh40_normalized(), NoPumps),
            (grid3x3(), NoPumps),
            (pump_mesh(), PumpsNotInCycles),
            (pump_rings(), NonOverlappingCycles),
            (twin_triangles(TRIANGLES_C), NoPumps),
        ];
        for (k, (n, class)) in table.into_iter().enumerate() {
            assert_eq!(classify_network(&n.unwrap()), class, "entry {k}");
        }
    }

    #[test]
    fn pump_cycles23_cycles() {
        let s = analyze_cycles(&pump_cycles23().unwrap());
        assert_eq!(s.cycles.len(), 6);
    }

    #[test]
    fn names_resolve() {
        for name in NAMES {
            assert!(by_name(name).unwrap().is_ok(), "{name}");
        }
        assert!(by_name("nope").is_none());
    }
}
