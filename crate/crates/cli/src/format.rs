//! Native network file: TOML with a version key.
//!
//! ```toml
//! version = 1
//!
//! [reference]
//! node = "1"
//! pressure = 10.0
//!
//! [[nodes]]
//! id = "1"
//! elevation = 0.0        # optional, default 0
//! kind = "junction"      # optional: junction | reservoir | tank
//!
//! [[pipes]]
//! id = "p1"
//! tail = "1"
//! head = "2"
//! c = 1e-5
//! rho = 2.0              # optional, default 2
//!
//! [[pumps]]
//! id = "q1"
//! tail = "2"
//! head = "3"
//! lambda = -2.735e-5
//! mu = 0.0129
//! nu = 55.83
//! speed = 1.0            # optional; gain = lambda f^2 + mu s f + nu s^2
//! f_min = 250.0
//! f_max = 1500.0
//!
//! off_pumps = ["q1"]     # optional, top level
//!
//! [injections]           # node id -> m3/h, positive for supply; missing ids are 0
//! "1" = 500.0
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use wdsflow_core::{Edge, EdgeKind, Network, Node, NodeKind, PumpCurve, WfInput};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub off_pumps: Vec<String>,
    pub reference: Reference,
    pub nodes: Vec<NodeRec>,
    #[serde(default)]
    pub pipes: Vec<PipeRec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pumps: Vec<PumpRec>,
    #[serde(default)]
    pub injections: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub node: String,
    pub pressure: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindRec {
    #[default]
    Junction,
    Reservoir,
    Tank,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

fn two() -> f64 {
    2.0
}

fn is_two(v: &f64) -> bool {
    *v == 2.0
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRec {
    pub id: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub elevation: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub kind: KindRec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeRec {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub c: f64,
    #[serde(default = "two", skip_serializing_if = "is_two")]
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpRec {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub speed: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl PumpRec {
    /// Curve at the configured speed (affinity laws).
    pub fn curve(&self) -> PumpCurve {
        let s = self.speed;
        PumpCurve {
            lambda: self.lambda,
            mu: self.mu * s,
            nu: self.nu * s * s,
            f_min: self.f_min,
            f_max: self.f_max,
        }
    }
}

impl NativeFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: NativeFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported format version {}",
                file.version
            )));
        }
        Ok(file)
    }

    /// Canonical text: fixed key order, defaults omitted.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("native file serializes")
    }

    pub fn network(&self) -> Result<Network> {
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id.clone(),
                kind: match n.kind {
                    KindRec::Junction => NodeKind::Junction,
                    KindRec::Reservoir => NodeKind::Reservoir,
                    KindRec::Tank => NodeKind::Tank,
                },
                elevation: n.elevation,
            })
            .collect();
        let index: BTreeMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let find = |id: &str, what: &str| -> Result<usize> {
            index
                .get(id)
                .copied()
                .ok_or_else(|| CliError::Link(format!("{what} references unknown node '{id}'")))
        };
        let mut edges = Vec::new();
        for p in &self.pipes {
            let what = format!("pipe '{}'", p.id);
            edges.push(Edge {
                id: p.id.clone(),
                tail: find(&p.tail, &what)?,
                head: find(&p.head, &what)?,
                kind: EdgeKind::Pipe { c: p.c, rho: p.rho },
            });
        }
        for q in &self.pumps {
            let what = format!("pump '{}'", q.id);
            edges.push(Edge {
                id: q.id.clone(),
                tail: find(&q.tail, &what)?,
                head: find(&q.head, &what)?,
                kind: EdgeKind::Pump(q.curve()),
            });
        }
        let r = find(&self.reference.node, "reference")?;
        Ok(Network::new(nodes, edges, r)?)
    }

    pub fn input(&self, net: &Network) -> Result<WfInput> {
        let mut d = vec![0.0; net.num_nodes()];
        for (id, &v) in &self.injections {
            let i = net
                .node_index(id)
                .ok_or_else(|| CliError::Link(format!("injection at unknown node '{id}'")))?;
            d[i] = v;
        }
        let mut off = BTreeSet::new();
        for id in &self.off_pumps {
            let p = net
                .edge_index(id)
                .ok_or_else(|| CliError::Link(format!("off pump '{id}' not found")))?;
            off.insert(p);
        }
        Ok(WfInput::with_off_pumps(
            net,
            d,
            self.reference.pressure,
            off,
        )?)
    }

    pub fn load(&self) -> Result<(Network, WfInput)> {
        let net = self.network()?;
        let input = self.input(&net)?;
        Ok((net, input))
    }

    /// File for a network and instance; pumps are written at speed 1.
    pub fn from_parts(net: &Network, input: &WfInput) -> Self {
        let nodes = net
            .nodes()
            .iter()
            .map(|n| NodeRec {
                id: n.id.clone(),
                elevation: n.elevation,
                kind: match n.kind {
                    NodeKind::Junction => KindRec::Junction,
                    NodeKind::Reservoir => KindRec::Reservoir,
                    NodeKind::Tank => KindRec::Tank,
                },
            })
            .collect();
        let mut pipes = Vec::new();
        let mut pumps = Vec::new();
        for e in net.edges() {
            let (tail, head) = (net.node(e.tail).id.clone(), net.node(e.head).id.clone());
            match e.kind {
                EdgeKind::Pipe { c, rho } => pipes.push(PipeRec {
                    id: e.id.clone(),
                    tail,
                    head,
                    c,
                    rho,
                }),
                EdgeKind::Pump(ref q) => pumps.push(PumpRec {
                    id: e.id.clone(),
                    tail,
                    head,
                    lambda: q.lambda,
                    mu: q.mu,
                    nu: q.nu,
                    speed: 1.0,
                    f_min: q.f_min,
                    f_max: q.f_max,
                }),
            }
        }
        let injections = net
            .nodes()
            .iter()
            .zip(&input.injections)
            .filter(|(_, &v)| v != 0.0)
            .map(|(n, &v)| (n.id.clone(), v))
            .collect();
        NativeFile {
            version: FORMAT_VERSION,
            off_pumps: input
                .off_pumps
                .iter()
                .map(|&p| net.edge(p).id.clone())
                .collect(),
            reference: Reference {
                node: net.node(net.reference()).id.clone(),
                pressure: input.reference_pressure,
            },
            nodes,
            pipes,
            pumps,
            injections,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
version = 1
off_pumps = ["q"]

[reference]
node = "1"
pressure = 10.0

[[nodes]]
id = "1"

[[nodes]]
id = "2"
elevation = 3.5

[[nodes]]
id = "3"
kind = "tank"

[[pipes]]
id = "a"
tail = "1"
head = "2"
c = 1e-5

[[pipes]]
id = "b"
tail = "2"
head = "3"
c = 2e-5
rho = 1.852

[[pumps]]
id = "q"
tail = "1"
head = "3"
lambda = -2.735e-5
mu = 0.0129
nu = 55.83
speed = 0.5
f_min = 250.0
f_max = 1500.0

[injections]
"1" = 100.0
"3" = -100.0
"#;

    #[test]
    fn parse_and_load() {
        let f = NativeFile::parse(SAMPLE).unwrap();
        let (net, input) = f.load().unwrap();
        assert_eq!(net.num_nodes(), 3);
        assert_eq!(net.num_edges(), 3);
        assert_eq!(input.injections, vec![100.0, 0.0, -100.0]);
        assert!(input.off_pumps.contains(&2));
        let q = net.edge(2).pump().unwrap();
        assert_eq!(q.mu, 0.0129 * 0.5);
        assert_eq!(q.nu, 55.83 * 0.25);
        assert_eq!(net.node(1).elevation, 3.5);
    }

    #[test]
    fn canonical_round_trip() {
        let f = NativeFile::parse(SAMPLE).unwrap();
        let text = f.to_text();
        let again = NativeFile::parse(&text).unwrap();
        assert_eq!(again, f);
        assert_eq!(again.to_text(), text);
    }

    #[test]
    fn unknown_node_is_link_error() {
        let bad = SAMPLE.replace("head = \"2\"", "head = \"9\"");
        let err = NativeFile::parse(&bad).unwrap().network().unwrap_err();
        assert!(matches!(err, CliError::Link(_)), "{err}");
    }

    #[test]
    fn version_checked() {
        let bad = SAMPLE.replace("version = 1", "version = 7");
        assert!(matches!(NativeFile::parse(&bad), Err(CliError::Parse(_))));
    }
}
