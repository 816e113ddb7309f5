//! Network data model, incidence algebra and the WF input/solution records.
//!
//! Nodes and edges are addressed by dense indices; the string ids are kept for
//! I/O and diagnostics. Flows are in m³/hr and heads in meters throughout.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Result, WdsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Junction,
    Reservoir,
    Tank,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    /// Stored for output offsets only; solver math works on total head.
    pub elevation: f64,
}

impl Node {
    pub fn junction(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Junction,
            elevation: 0.0,
        }
    }
}

/// Quadratic pump curve `g(f) = λf² + μf + ν` on `[f_min, f_max]`.
///
/// Speed is assumed already folded into `mu` and `nu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PumpCurve {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl PumpCurve {
    pub fn validate(&self) -> Result<()> {
        let PumpCurve {
            lambda,
            mu,
            nu,
            f_min,
            f_max,
        } = *self;
        if ![lambda, mu, nu, f_min, f_max].iter().all(|v| v.is_finite()) {
            return Err(WdsError::Parameter(
                "pump curve has non-finite parameters".into(),
            ));
        }
        if lambda >= 0.0 {
            return Err(WdsError::Parameter(format!(
                "pump lambda must be negative, got {lambda}"
            )));
        }
        if mu < 0.0 || nu < 0.0 {
            return Err(WdsError::Parameter(format!(
                "pump mu and nu must be non-negative, got {mu}, {nu}"
            )));
        }
        if f_min < 0.0 || f_max < f_min {
            return Err(WdsError::Parameter(format!(
                "pump flow range [{f_min}, {f_max}] is invalid"
            )));
        }
        // The slope is affine in f, so checking the left end covers the range.
        if 2.0 * lambda * f_min + mu >= 0.0 {
            return Err(WdsError::Parameter(format!(
                "pump gain is not strictly decreasing on [{f_min}, {f_max}]: slope at f_min is {}",
                2.0 * lambda * f_min + mu
            )));
        }
        Ok(())
    }

    pub fn gain(&self, f: f64) -> f64 {
        (self.lambda * f + self.mu) * f + self.nu
    }

    pub fn slope(&self, f: f64) -> f64 {
        2.0 * self.lambda * f + self.mu
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeKind {
    /// Head drop `c·sign(f)·|f|^rho`. `c == 0` only occurs on internal lossless links.
    Pipe {
        c: f64,
        rho: f64,
    },
    Pump(PumpCurve),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn is_pump(&self) -> bool {
        matches!(self.kind, EdgeKind::Pump(_))
    }

    pub fn pump(&self) -> Option<&PumpCurve> {
        match &self.kind {
            EdgeKind::Pump(p) => Some(p),
            EdgeKind::Pipe { .. } => None,
        }
    }

    /// `(c, rho)` of a pipe.
    pub fn pipe(&self) -> Option<(f64, f64)> {
        match self.kind {
            EdgeKind::Pipe { c, rho } => Some((c, rho)),
            EdgeKind::Pump(_) => None,
        }
    }

    pub fn is_lossless(&self) -> bool {
        matches!(self.kind, EdgeKind::Pipe { c, .. } if c == 0.0)
    }

    pub fn other(&self, n: usize) -> usize {
        if self.tail == n {
            self.head
        } else {
            self.tail
        }
    }
}

/// Incidence of an edge on a node: edge index, neighbor, and +1 if the node is the tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Incident {
    pub edge: usize,
    pub other: usize,
    pub sign: i8,
}

/// Immutable, validated, connected directed multigraph.
#[derive(Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    reference: usize,
    adjacency: Vec<Vec<Incident>>,
    node_lookup: HashMap<String, usize>,
    edge_lookup: HashMap<String, usize>,
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("nodes", &self.nodes.len())
            .field("edges", &self.edges.len())
            .field("reference", &self.nodes[self.reference].id)
            .finish()
    }
}

impl Network {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, reference: usize) -> Result<Self> {
        Self::assemble(nodes, edges, reference, false)
    }

    /// Like `new` but admits `c = 0` pipes, used for split-node links.
    pub(crate) fn new_internal(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        reference: usize,
    ) -> Result<Self> {
        Self::assemble(nodes, edges, reference, true)
    }

    fn assemble(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        reference: usize,
        allow_lossless: bool,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(WdsError::InvalidNetwork("no nodes".into()));
        }
        if reference >= nodes.len() {
            return Err(WdsError::InvalidNetwork(format!(
                "reference index {reference} out of range"
            )));
        }
        let mut node_lookup = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_lookup.insert(n.id.clone(), i).is_some() {
                return Err(WdsError::InvalidNetwork(format!(
                    "duplicate node id '{}'",
                    n.id
                )));
            }
        }
        let mut edge_lookup = HashMap::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (p, e) in edges.iter().enumerate() {
            if e.tail >= nodes.len() || e.head >= nodes.len() {
                return Err(WdsError::InvalidNetwork(format!(
                    "edge '{}' references a missing node",
                    e.id
                )));
            }
            if e.tail == e.head {
                return Err(WdsError::InvalidNetwork(format!(
                    "edge '{}' is a self-loop",
                    e.id
                )));
            }
            if edge_lookup.insert(e.id.clone(), p).is_some() {
                return Err(WdsError::InvalidNetwork(format!(
                    "duplicate edge id '{}'",
                    e.id
                )));
            }
            match e.kind {
                EdgeKind::Pipe { c, rho } => {
                    let c_ok = c > 0.0 || (allow_lossless && c == 0.0);
                    if !c_ok || !c.is_finite() {
                        return Err(WdsError::Parameter(format!(
                            "pipe '{}' needs c > 0, got {c}",
                            e.id
                        )));
                    }
                    if !(rho > 0.0 && rho.is_finite()) {
                        return Err(WdsError::Parameter(format!(
                            "pipe '{}' needs rho > 0, got {rho}",
                            e.id
                        )));
                    }
                }
                EdgeKind::Pump(curve) => curve
                    .validate()
                    .map_err(|err| WdsError::Parameter(format!("pump '{}': {err}", e.id)))?,
            }
            adjacency[e.tail].push(Incident {
                edge: p,
                other: e.head,
                sign: 1,
            });
            adjacency[e.head].push(Incident {
                edge: p,
                other: e.tail,
                sign: -1,
            });
        }
        let net = Self {
            nodes,
            edges,
            reference,
            adjacency,
            node_lookup,
            edge_lookup,
        };
        let comps = net.components(|_| true);
        if comps.len() > 1 {
            let named = comps
                .iter()
                .map(|c| c.iter().map(|&n| net.nodes[n].id.clone()).collect())
                .collect();
            return Err(WdsError::Disconnected(named));
        }
        Ok(net)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, n: usize) -> &Node {
        &self.nodes[n]
    }

    pub fn edge(&self, p: usize) -> &Edge {
        &self.edges[p]
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn incident(&self, n: usize) -> &[Incident] {
        &self.adjacency[n]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_lookup.get(id).copied()
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edge_lookup.get(id).copied()
    }

    pub fn pumps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&p| self.edges[p].is_pump())
    }

    pub fn has_pumps(&self) -> bool {
        self.pumps().next().is_some()
    }

    /// Same network with a different reference node.
    pub fn with_reference(&self, reference: usize) -> Self {
        assert!(reference < self.nodes.len());
        Self {
            reference,
            ..self.clone()
        }
    }

    /// Connected components of the subgraph keeping edges where `keep` holds,
    /// each sorted, ordered by smallest node.
    pub fn components(&self, keep: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.nodes.len()];
        let mut out = Vec::new();
        for s in 0..self.nodes.len() {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![s];
            label[s] = id;
            let mut k = 0;
            while k < comp.len() {
                let n = comp[k];
                k += 1;
                for inc in &self.adjacency[n] {
                    if keep(inc.edge) && label[inc.other] == usize::MAX {
                        label[inc.other] = id;
                        comp.push(inc.other);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Dense `P × N` incidence: +1 at the tail, −1 at the head.
    pub fn incidence(&self) -> Vec<Vec<f64>> {
        self.edges
            .iter()
            .map(|e| {
                let mut row = vec![0.0; self.nodes.len()];
                row[e.tail] = 1.0;
                row[e.head] = -1.0;
                row
            })
            .collect()
    }

    /// Incidence with each row oriented along the sign of its flow; zero flows
    /// keep the nominal direction.
    pub fn flow_oriented_incidence(&self, f: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_len("flows", f.len(), self.edges.len())?;
        let mut a = self.incidence();
        for (row, &fp) in a.iter_mut().zip(f) {
            if fp < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
        }
        Ok(a)
    }

    /// `Aᵀf`: net outflow at each node.
    pub fn net_outflow(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (e, &fp) in self.edges.iter().zip(f) {
            out[e.tail] += fp;
            out[e.head] -= fp;
        }
        out
    }

    /// `Aᵀf − d`.
    pub fn mass_residual(&self, f: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        self.check_len("flows", f.len(), self.edges.len())?;
        self.check_len("injections", d.len(), self.nodes.len())?;
        let mut r = self.net_outflow(f);
        for (ri, di) in r.iter_mut().zip(d) {
            *ri -= di;
        }
        Ok(r)
    }

    /// `h_tail − h_head` for every edge.
    pub fn head_differences(&self, h: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|e| h[e.tail] - h[e.head]).collect()
    }

    pub(crate) fn check_len(&self, what: &'static str, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(WdsError::Dimension {
                what,
                expected,
                got,
            });
        }
        Ok(())
    }
}

/// Convenience builder addressing nodes by id.
#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    edges: Vec<(String, String, String, EdgeKind)>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, node: Node) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn junction(self, id: impl Into<String>) -> Self {
        self.node(Node::junction(id))
    }

    pub fn junctions(mut self, ids: impl IntoIterator<Item = impl Into<String>>) -> Self {
        for id in ids {
            self.nodes.push(Node::junction(id));
        }
        self
    }

    pub fn pipe(
        self,
        id: impl Into<String>,
        tail: impl Into<String>,
        head: impl Into<String>,
        c: f64,
    ) -> Self {
        self.pipe_rho(id, tail, head, c, 2.0)
    }

    pub fn pipe_rho(
        mut self,
        id: impl Into<String>,
        tail: impl Into<String>,
        head: impl Into<String>,
        c: f64,
        rho: f64,
    ) -> Self {
        self.edges.push((
            id.into(),
            tail.into(),
            head.into(),
            EdgeKind::Pipe { c, rho },
        ));
        self
    }

    pub fn pump(
        mut self,
        id: impl Into<String>,
        tail: impl Into<String>,
        head: impl Into<String>,
        curve: PumpCurve,
    ) -> Self {
        self.edges
            .push((id.into(), tail.into(), head.into(), EdgeKind::Pump(curve)));
        self
    }

    pub fn build(self, reference: &str) -> Result<Network> {
        let lookup: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let find = |id: &str, edge: &str| {
            lookup.get(id).copied().ok_or_else(|| {
                WdsError::InvalidNetwork(format!("edge '{edge}' references unknown node '{id}'"))
            })
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for (id, t, h, kind) in &self.edges {
            edges.push(Edge {
                id: id.clone(),
                tail: find(t, id)?,
                head: find(h, id)?,
                kind: *kind,
            });
        }
        let r = lookup.get(reference).copied().ok_or_else(|| {
            WdsError::InvalidNetwork(format!("reference node '{reference}' not found"))
        })?;
        Network::new(self.nodes, edges, r)
    }
}

/// Injections, reference head and pump statuses for one WF instance.
#[derive(Clone, Debug, PartialEq)]
pub struct WfInput {
    /// Per-node injection, positive for supply.
    pub injections: Vec<f64>,
    pub reference_pressure: f64,
    /// Edge indices of pumps that are switched off.
    pub off_pumps: BTreeSet<usize>,
}

/// Scale-aware tolerance for `Σd = 0`.
pub fn balance_tolerance(d: &[f64]) -> f64 {
    1e-8 * d.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

impl WfInput {
    pub fn new(net: &Network, injections: Vec<f64>, reference_pressure: f64) -> Result<Self> {
        Self::with_off_pumps(net, injections, reference_pressure, BTreeSet::new())
    }

    pub fn with_off_pumps(
        net: &Network,
        injections: Vec<f64>,
        reference_pressure: f64,
        off_pumps: BTreeSet<usize>,
    ) -> Result<Self> {
        net.check_len("injections", injections.len(), net.num_nodes())?;
        if injections.iter().any(|v| !v.is_finite()) || !reference_pressure.is_finite() {
            return Err(WdsError::InvalidInput(
                "non-finite injection or reference pressure".into(),
            ));
        }
        let total: f64 = injections.iter().sum();
        if total.abs() > balance_tolerance(&injections) {
            return Err(WdsError::InvalidInput(format!(
                "injections sum to {total:e}, not zero"
            )));
        }
        for &p in &off_pumps {
            if p >= net.num_edges() || !net.edge(p).is_pump() {
                return Err(WdsError::InvalidInput(format!(
                    "off-pump index {p} is not a pump"
                )));
            }
        }
        Ok(Self {
            injections,
            reference_pressure,
            off_pumps,
        })
    }

    pub fn is_on(&self, p: usize) -> bool {
        !self.off_pumps.contains(&p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionStatus {
    /// Passed validation against all WF equations.
    Verified,
    /// Returned with residuals above tolerance; see diagnostics.
    Candidate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WfSolution {
    pub flows: Vec<f64>,
    pub pressures: Vec<f64>,
    pub residual_mass: f64,
    /// Per-edge violation of the head-change law, meters.
    pub residual_edges: Vec<f64>,
    pub solver_tag: String,
    pub status: SolutionStatus,
    pub diagnostics: Vec<String>,
}

impl WfSolution {
    pub fn max_edge_residual(&self) -> f64 {
        self.residual_edges.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pressures with node elevations subtracted (pressure head above ground).
    pub fn pressure_heads(&self, net: &Network) -> Vec<f64> {
        self.pressures
            .iter()
            .zip(net.nodes())
            .map(|(h, n)| h - n.elevation)
            .collect()
    }
}
