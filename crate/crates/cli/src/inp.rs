//! EPANET INP subset reader.
//!
//! Read sections: `[OPTIONS]` (Units, Headloss), `[JUNCTIONS]`,
//! `[RESERVOIRS]`, `[TANKS]`, `[PIPES]`, `[PUMPS]`, `[CURVES]`, `[DEMANDS]`.
//! Everything else is skipped with a warning.
//!
//! Conversions:
//! - flows to m³/h, lengths and heads to m, diameters to m;
//! - every pipe becomes a Darcy-Weisbach pipe, `h = c·f|f|` with `f` in m³/h and
//!   `c = 8·φ·L / (g·π²·D⁵·3600²)`. The friction factor `φ` is
//!   `0.25 / log10(ε / 3.7D)²` (fully rough) for D-W roughness `ε`; for
//!   Hazen-Williams `C` it is the value that matches the H-W loss at 1 m/s,
//!   `φ = 2gD·10.67·A^1.852 / (C^1.852·D^4.87)`; for Chezy-Manning `n` it is
//!   `2gD·n² / (D/4)^(4/3)`;
//! - pump `HEAD` curves: one point `(Q, H)` gives `A − B·f²` with `A = 4H/3`,
//!   `B = H/(3Q²)` on `[Q/10, 2Q]`; three points are fit exactly by a quadratic.
//!   Pumps without a usable curve get the default curve below;
//! - the first reservoir (or, failing that, the first tank) is the reference
//!   node and takes the negated sum of demands; other reservoirs and tanks
//!   get zero injection.

use std::collections::{BTreeMap, HashMap};

use wdsflow_core::{Edge, EdgeKind, Network, Node, NodeKind, PumpCurve};

use crate::error::{CliError, Result};

/// Pump curve used when the file gives none.
pub const DEFAULT_PUMP: PumpCurve = PumpCurve {
    lambda: -2.735e-5,
    mu: 0.0129,
    nu: 55.83,
    f_min: 250.0,
    f_max: 1500.0,
};

const G: f64 = 9.81;

#[derive(Clone, Debug)]
pub struct InpNetwork {
    pub net: Network,
    /// Base injections (negated demands; the reference balances them).
    pub injections: Vec<f64>,
    pub reference_head: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Headloss {
    HazenWilliams,
    DarcyWeisbach,
    ChezyManning,
}

struct Units {
    flow: f64,
    length: f64,
    diameter: f64,
    /// D-W roughness unit, to m.
    roughness: f64,
}

fn units(name: &str) -> Option<Units> {
    let us = |flow| Units {
        flow,
        length: 0.3048,
        diameter: 0.0254,
        roughness: 0.3048e-3,
    };
    let si = |flow| Units {
        flow,
        length: 1.0,
        diameter: 1e-3,
        roughness: 1e-3,
    };
    Some(match name.to_ascii_uppercase().as_str() {
        "CFS" => us(101.940_648),
        "GPM" => us(0.227_124_7),
        "MGD" => us(157.725_491),
        "IMGD" => us(189.420_6),
        "AFD" => us(51.395_6),
        "LPS" => si(3.6),
        "LPM" => si(0.06),
        "MLD" => si(1000.0 / 24.0),
        "CMH" => si(1.0),
        "CMD" => si(1.0 / 24.0),
        _ => return None,
    })
}

fn friction(loss: Headloss, rough: f64, d: f64, u: &Units) -> f64 {
    match loss {
        Headloss::HazenWilliams => {
            let a = std::f64::consts::PI * d * d / 4.0;
            2.0 * G * d * 10.67 * a.powf(1.852) / (rough.powf(1.852) * d.powf(4.87))
        }
        Headloss::DarcyWeisbach => {
            let eps = rough * u.roughness;
            0.25 / (eps / (3.7 * d)).log10().powi(2)
        }
        Headloss::ChezyManning => 2.0 * G * d * rough * rough / (d / 4.0).powf(4.0 / 3.0),
    }
}

/// `c` for `h = c·f|f|` with `f` in m³/h.
pub fn darcy_c(phi: f64, length: f64, diameter: f64) -> f64 {
    8.0 * phi * length / (G * std::f64::consts::PI.powi(2) * diameter.powi(5) * 3600.0 * 3600.0)
}

/// Quadratic through three points, as `(a2, a1, a0)`.
fn fit3(p: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let [(x0, y0), (x1, y1), (x2, y2)] = *p else {
        return None;
    };
    let d = (x0 - x1) * (x0 - x2) * (x1 - x2);
    if d == 0.0 {
        return None;
    }
    let a2 = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
    let a1 = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
    let a0 = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / d;
    Some((a2, a1, a0))
}

struct Row<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

fn num(row: &Row, k: usize, what: &str) -> Result<f64> {
    let s = row.fields.get(k).ok_or_else(|| CliError::Line {
        line: row.line,
        msg: format!("missing {what}"),
    })?;
    s.parse().map_err(|_| CliError::Line {
        line: row.line,
        msg: format!("{what} '{s}' is not a number"),
    })
}

pub fn parse_inp(text: &str) -> Result<InpNetwork> {
    let mut sections: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            let name = line
                .trim_matches(|c| c == '[' || c == ']')
                .to_ascii_uppercase();
            const KNOWN: [&str; 8] = [
                "OPTIONS",
                "JUNCTIONS",
                "RESERVOIRS",
                "TANKS",
                "PIPES",
                "PUMPS",
                "CURVES",
                "DEMANDS",
            ];
            if name == "END" {
                break;
            }
            if !KNOWN.contains(&name.as_str()) {
                warnings.push(format!("line {}: section [{name}] ignored", i + 1));
            }
            current = Some(name);
            continue;
        }
        let Some(sec) = &current else {
            return Err(CliError::Line {
                line: i + 1,
                msg: "data before any section header".into(),
            });
        };
        sections.entry(sec.clone()).or_default().push(Row {
            line: i + 1,
            fields: line.split_whitespace().collect(),
        });
    }
    let rows = |s: &str| sections.get(s).map(Vec::as_slice).unwrap_or(&[]);

    let mut u = units("GPM").unwrap();
    let mut loss = Headloss::HazenWilliams;
    for r in rows("OPTIONS") {
        let key = r.fields[0].to_ascii_uppercase();
        let val = r.fields.get(1).copied().unwrap_or("");
        match key.as_str() {
            "UNITS" => {
                u = units(val).ok_or_else(|| CliError::Line {
                    line: r.line,
                    msg: format!("unknown flow units '{val}'"),
                })?
            }
            "HEADLOSS" => {
                loss = match val.to_ascii_uppercase().as_str() {
                    "H-W" => Headloss::HazenWilliams,
                    "D-W" => Headloss::DarcyWeisbach,
                    "C-M" => Headloss::ChezyManning,
                    _ => {
                        return Err(CliError::Line {
                            line: r.line,
                            msg: format!("unknown headloss '{val}'"),
                        })
                    }
                }
            }
            _ => {}
        }
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut demand: Vec<f64> = Vec::new();
    let mut heads: Vec<Option<f64>> = Vec::new();
    let mut add_node =
        |id: &str, kind, elevation, line: usize, nodes: &mut Vec<Node>| -> Result<usize> {
            if let Some(&first) = seen.get(id) {
                return Err(CliError::Line {
                    line,
                    msg: format!("duplicate node id '{id}' (first defined on line {first})"),
                });
            }
            seen.insert(id.to_string(), line);
            nodes.push(Node {
                id: id.to_string(),
                kind,
                elevation,
            });
            Ok(nodes.len() - 1)
        };
    for r in rows("JUNCTIONS") {
        let elev = num(r, 1, "elevation")? * u.length;
        add_node(r.fields[0], NodeKind::Junction, elev, r.line, &mut nodes)?;
        demand.push(if r.fields.len() > 2 {
            num(r, 2, "demand")? * u.flow
        } else {
            0.0
        });
        heads.push(None);
    }
    for r in rows("RESERVOIRS") {
        let head = num(r, 1, "head")? * u.length;
        add_node(r.fields[0], NodeKind::Reservoir, head, r.line, &mut nodes)?;
        demand.push(0.0);
        heads.push(Some(head));
    }
    for r in rows("TANKS") {
        let elev = num(r, 1, "elevation")? * u.length;
        let level = if r.fields.len() > 2 {
            num(r, 2, "initial level")? * u.length
        } else {
            0.0
        };
        add_node(r.fields[0], NodeKind::Tank, elev, r.line, &mut nodes)?;
        demand.push(0.0);
        heads.push(Some(elev + level));
    }
    let index: HashMap<String, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.clone(), i))
        .collect();
    let find = |id: &str, line: usize| -> Result<usize> {
        index
            .get(id)
            .copied()
            .ok_or_else(|| CliError::Link(format!("line {line}: unknown node '{id}'")))
    };

    let mut from_demands: BTreeMap<usize, f64> = BTreeMap::new();
    for r in rows("DEMANDS") {
        let v = find(r.fields[0], r.line)?;
        *from_demands.entry(v).or_default() += num(r, 1, "demand")? * u.flow;
    }
    for (v, d) in from_demands {
        demand[v] = d;
    }

    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows("CURVES") {
        let q = num(r, 1, "curve flow")? * u.flow;
        let h = num(r, 2, "curve head")? * u.length;
        curves
            .entry(r.fields[0].to_string())
            .or_default()
            .push((q, h));
    }

    let mut edges = Vec::new();
    let mut edge_ids: HashMap<String, usize> = HashMap::new();
    let mut check_edge = |id: &str, line: usize| -> Result<()> {
        if let Some(first) = edge_ids.insert(id.to_string(), line) {
            return Err(CliError::Line {
                line,
                msg: format!("duplicate link id '{id}' (first defined on line {first})"),
            });
        }
        Ok(())
    };
    for r in rows("PIPES") {
        if r.fields.len() < 6 {
            return Err(CliError::Line {
                line: r.line,
                msg: "pipe needs id, nodes, length, diameter, roughness".into(),
            });
        }
        check_edge(r.fields[0], r.line)?;
        let (t, h) = (find(r.fields[1], r.line)?, find(r.fields[2], r.line)?);
        let length = num(r, 3, "length")? * u.length;
        let diam = num(r, 4, "diameter")? * u.diameter;
        let rough = num(r, 5, "roughness")?;
        if let Some(status) = r.fields.get(7) {
            if status.eq_ignore_ascii_case("closed") {
                warnings.push(format!(
                    "line {}: closed pipe '{}' kept open",
                    r.line, r.fields[0]
                ));
            }
        }
        let c = darcy_c(friction(loss, rough, diam, &u), length, diam);
        if !(c > 0.0 && c.is_finite()) {
            return Err(CliError::Line {
                line: r.line,
                msg: format!("pipe '{}' gives loss coefficient {c}", r.fields[0]),
            });
        }
        edges.push(Edge {
            id: r.fields[0].to_string(),
            tail: t,
            head: h,
            kind: EdgeKind::Pipe { c, rho: 2.0 },
        });
    }
    for r in rows("PUMPS") {
        if r.fields.len() < 3 {
            return Err(CliError::Line {
                line: r.line,
                msg: "pump needs id and two nodes".into(),
            });
        }
        check_edge(r.fields[0], r.line)?;
        let (t, h) = (find(r.fields[1], r.line)?, find(r.fields[2], r.line)?);
        let mut curve = None;
        let mut speed = 1.0;
        let mut k = 3;
        while k + 1 < r.fields.len() {
            match r.fields[k].to_ascii_uppercase().as_str() {
                "HEAD" => curve = Some(r.fields[k + 1]),
                "SPEED" => speed = num(r, k + 1, "speed")?,
                _ => {}
            }
            k += 2;
        }
        let fitted = curve
            .and_then(|id| curves.get(id))
            .and_then(|pts| match pts.as_slice() {
                &[(q, hh)] => Some(PumpCurve {
                    lambda: -hh / (3.0 * q * q),
                    mu: 0.0,
                    nu: 4.0 * hh / 3.0,
                    f_min: 0.1 * q,
                    f_max: 2.0 * q,
                }),
                pts if pts.len() == 3 => fit3(pts).map(|(a2, a1, a0)| PumpCurve {
                    lambda: a2,
                    mu: a1,
                    nu: a0,
                    // keep clear of the curve's peak
                    f_min: pts[0].0.max(0.1 * pts[1].0).max(if a2 < 0.0 {
                        1.01 * a1 / (-2.0 * a2)
                    } else {
                        0.0
                    }),
                    f_max: pts[2].0,
                }),
                _ => None,
            });
        let mut pc = match fitted {
            Some(c) if c.validate().is_ok() => c,
            _ => {
                warnings.push(format!(
                    "line {}: pump '{}' uses the default curve",
                    r.line, r.fields[0]
                ));
                DEFAULT_PUMP
            }
        };
        pc.mu *= speed;
        pc.nu *= speed * speed;
        edges.push(Edge {
            id: r.fields[0].to_string(),
            tail: t,
            head: h,
            kind: EdgeKind::Pump(pc),
        });
    }

    let reference = nodes
        .iter()
        .position(|n| n.kind == NodeKind::Reservoir)
        .or_else(|| nodes.iter().position(|n| n.kind == NodeKind::Tank))
        .ok_or_else(|| CliError::Parse("no reservoir or tank to act as reference".into()))?;
    for (v, n) in nodes.iter().enumerate() {
        if v != reference && n.kind != NodeKind::Junction {
            warnings.push(format!(
                "'{}' treated as a junction with zero injection",
                n.id
            ));
        }
    }
    let mut injections: Vec<f64> = demand.iter().map(|d| -d).collect();
    injections[reference] = 0.0;
    injections[reference] = -injections.iter().sum::<f64>();
    let reference_head = heads[reference].unwrap_or(0.0);
    for w in &warnings {
        log::warn!("{w}");
    }
    let net = Network::new(nodes, edges, reference)?;
    Ok(InpNetwork {
        net,
        injections,
        reference_head,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[JUNCTIONS]
;id elev demand
 J1  10  5
[RESERVOIRS]
 R1  50
[PIPES]
 P1  R1  J1  1000  12  100
[OPTIONS]
 Units CMH
[END]
";

    #[test]
    fn minimal_network() {
        let n = parse_inp(MINIMAL).unwrap();
        assert_eq!(n.net.num_nodes(), 2);
        assert_eq!(n.net.num_edges(), 1);
        assert_eq!(n.injections, vec![-5.0, 5.0]);
        assert_eq!(n.net.node(n.net.reference()).id, "R1");
        assert_eq!(n.reference_head, 50.0);
        // 12 mm, 1000 m, C = 100, matched at 1 m/s.
        let (c, rho) = n.net.edge(0).pipe().unwrap();
        assert_eq!(rho, 2.0);
        let d: f64 = 0.012;
        let a = std::f64::consts::PI * d * d / 4.0;
        let q = a * 3600.0;
        let hw = 10.67 * 1000.0 * a.powf(1.852) / (100f64.powf(1.852) * d.powf(4.87));
        assert!((c * q * q - hw).abs() < 1e-9 * hw);
    }

    #[test]
    fn coordinates_ignored_with_warning() {
        let text = MINIMAL.replace("[END]", "[COORDINATES]\n J1 1 2\n R1 3 4\n[END]");
        let n = parse_inp(&text).unwrap();
        assert!(n.warnings.iter().any(|w| w.contains("[COORDINATES]")));
    }

    #[test]
    fn duplicate_node_names_both_lines() {
        let text = MINIMAL.replace(" J1  10  5\n", " J1  10  5\n J1  11  2\n");
        let err = parse_inp(&text).unwrap_err().to_string();
        assert!(
            err.contains("'J1'") && err.contains("line 3") && err.contains("line 4"),
            "{err}"
        );
    }

    #[test]
    fn unknown_node_is_link_error() {
        let text = MINIMAL.replace("R1  J1", "R1  J9");
        assert!(matches!(parse_inp(&text), Err(CliError::Link(_))));
    }

    #[test]
    fn bad_number_reports_line() {
        let text = MINIMAL.replace("1000", "long");
        match parse_inp(&text) {
            Err(CliError::Line { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn three_point_curve() {
        let pts = [(0.0, 10.0), (1.0, 9.0), (2.0, 6.0)];
        let (a2, a1, a0) = fit3(&pts).unwrap();
        for (x, y) in pts {
            assert!((a2 * x * x + a1 * x + a0 - y).abs() < 1e-12);
        }
    }
}
