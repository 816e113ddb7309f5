//! Spanning trees, fundamental cycles, blocks, flow fixing on bridges,
//! topology classification and node splitting / supernode contraction.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Result, WdsError};
use crate::network::{Edge, EdgeKind, Network, Node, NodeKind, WfInput};

/// Rooted spanning tree given by each node's parent edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanningTree {
    pub root: usize,
    pub parent_edge: Vec<Option<usize>>,
    /// Nodes in an order where parents precede children.
    pub order: Vec<usize>,
    pub in_tree: Vec<bool>,
}

/// Breadth-first tree from the reference node, scanning incident edges in
/// edge-index order.
pub fn bfs_tree(net: &Network) -> SpanningTree {
    let n = net.num_nodes();
    let root = net.reference();
    let mut parent_edge = vec![None; n];
    let mut seen = vec![false; n];
    let mut in_tree = vec![false; net.num_edges()];
    let mut order = vec![root];
    seen[root] = true;
    let mut k = 0;
    while k < order.len() {
        let u = order[k];
        k += 1;
        let mut inc: Vec<_> = net.incident(u).to_vec();
        inc.sort_by_key(|i| i.edge);
        for i in inc {
            if !seen[i.other] {
                seen[i.other] = true;
                parent_edge[i.other] = Some(i.edge);
                in_tree[i.edge] = true;
                order.push(i.other);
            }
        }
    }
    SpanningTree {
        root,
        parent_edge,
        order,
        in_tree,
    }
}

/// Spanning tree from Kruskal over `edge_order`, rooted at the reference.
/// Used to check that results do not depend on the tree.
pub fn tree_from_edge_order(net: &Network, edge_order: &[usize]) -> SpanningTree {
    let mut uf = UnionFind::new(net.num_nodes());
    let mut in_tree = vec![false; net.num_edges()];
    for &p in edge_order {
        let e = net.edge(p);
        if uf.union(e.tail, e.head) {
            in_tree[p] = true;
        }
    }
    rooted(net, in_tree)
}

fn rooted(net: &Network, in_tree: Vec<bool>) -> SpanningTree {
    let n = net.num_nodes();
    let root = net.reference();
    let mut parent_edge = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = vec![root];
    seen[root] = true;
    let mut k = 0;
    while k < order.len() {
        let u = order[k];
        k += 1;
        for i in net.incident(u) {
            if in_tree[i.edge] && !seen[i.other] {
                seen[i.other] = true;
                parent_edge[i.other] = Some(i.edge);
                order.push(i.other);
            }
        }
    }
    assert_eq!(order.len(), n, "edge set does not span the network");
    SpanningTree {
        root,
        parent_edge,
        order,
        in_tree,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalCycle {
    /// The off-tree edge closing the cycle; it carries +1 in the indicator.
    pub generator: usize,
    /// Per-edge orientation in {-1, 0, +1}; `Aᵀn = 0`.
    pub indicator: Vec<i8>,
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleStructure {
    pub tree: SpanningTree,
    pub cycles: Vec<FundamentalCycle>,
    pub cycle_edges: BTreeSet<usize>,
    pub bridges: BTreeSet<usize>,
    /// `overlap[i][j]` when cycles `i != j` share an edge.
    pub overlap: Vec<Vec<bool>>,
}

impl CycleStructure {
    pub fn has_overlaps(&self) -> bool {
        self.overlap.iter().flatten().any(|&b| b)
    }

    /// Indices of the cycles containing edge `p`.
    pub fn cycles_through(&self, p: usize) -> Vec<usize> {
        (0..self.cycles.len())
            .filter(|&l| self.cycles[l].indicator[p] != 0)
            .collect()
    }
}

pub fn analyze_cycles(net: &Network) -> CycleStructure {
    analyze_cycles_with(net, bfs_tree(net))
}

pub fn analyze_cycles_with(net: &Network, tree: SpanningTree) -> CycleStructure {
    let p_count = net.num_edges();
    let mut depth = vec![0usize; net.num_nodes()];
    for &u in &tree.order[1..] {
        let e = net.edge(tree.parent_edge[u].expect("non-root has parent"));
        depth[u] = depth[e.other(u)] + 1;
    }
    let parent = |u: usize| -> (usize, usize) {
        let p = tree.parent_edge[u].expect("non-root has parent");
        (p, net.edge(p).other(u))
    };
    let mut cycles = Vec::new();
    for g in 0..p_count {
        if tree.in_tree[g] {
            continue;
        }
        let e = net.edge(g);
        let mut ind = vec![0i8; p_count];
        ind[g] = 1;
        // Walk head -> tail through the tree. Moving from u to its parent v
        // along edge q traverses q forward when u is q's tail.
        let (mut a, mut b) = (e.head, e.tail);
        let mut tail_side = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                let (q, v) = parent(a);
                ind[q] = if net.edge(q).tail == a { 1 } else { -1 };
                a = v;
            } else {
                let (q, v) = parent(b);
                tail_side.push((q, b));
                b = v;
            }
        }
        // On the tail side we travel from the meeting point down to the tail.
        for (q, child) in tail_side {
            ind[q] = if net.edge(q).head == child { 1 } else { -1 };
        }
        let edges = (0..p_count).filter(|&q| ind[q] != 0).collect();
        cycles.push(FundamentalCycle {
            generator: g,
            indicator: ind,
            edges,
        });
    }
    let mut count = vec![0usize; p_count];
    for c in &cycles {
        for &q in &c.edges {
            count[q] += 1;
        }
    }
    let cycle_edges: BTreeSet<usize> = (0..p_count).filter(|&q| count[q] > 0).collect();
    let bridges = (0..p_count).filter(|&q| count[q] == 0).collect();
    let k = cycles.len();
    let mut overlap = vec![vec![false; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let shared = cycles[i].edges.iter().any(|&q| cycles[j].indicator[q] != 0);
            overlap[i][j] = shared;
            overlap[j][i] = shared;
        }
    }
    CycleStructure {
        tree,
        cycles,
        cycle_edges,
        bridges,
        overlap,
    }
}

/// Flow vector solving `Aᵀf = d` that is zero off the tree.
pub fn tree_flows(net: &Network, tree: &SpanningTree, d: &[f64]) -> Vec<f64> {
    let mut subtree = d.to_vec();
    let mut f = vec![0.0; net.num_edges()];
    for &u in tree.order.iter().rev() {
        let Some(p) = tree.parent_edge[u] else {
            continue;
        };
        let e = net.edge(p);
        // All of the subtree's net injection leaves through the parent edge.
        f[p] = if e.tail == u { subtree[u] } else { -subtree[u] };
        let v = e.other(u);
        subtree[v] += subtree[u];
    }
    f
}

/// Flows on bridges, which every solution of `Aᵀf = d` shares. Entries for
/// cycle edges are `None`.
pub fn fix_noncycle_flows(net: &Network, d: &[f64]) -> Result<Vec<Option<f64>>> {
    net.check_len("injections", d.len(), net.num_nodes())?;
    let cs = analyze_cycles(net);
    let f = tree_flows(net, &cs.tree, d);
    Ok((0..net.num_edges())
        .map(|p| cs.bridges.contains(&p).then_some(f[p]))
        .collect())
}

/// Biconnected blocks. Bridges form single-edge blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub blocks: Vec<Block>,
    pub block_of_edge: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub edges: Vec<usize>,
    pub nodes: Vec<usize>,
}

impl Block {
    pub fn is_bridge(&self) -> bool {
        self.edges.len() == 1
    }

    /// A cyclic block that is one simple cycle, i.e. overlaps no other cycle.
    pub fn is_simple_cycle(&self) -> bool {
        self.edges.len() >= 2 && self.edges.len() == self.nodes.len()
    }
}

impl Blocks {
    pub fn cyclic(&self) -> impl Iterator<Item = (usize, &Block)> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_bridge())
    }
}

/// Tarjan's edge-stack algorithm, iterative.
pub fn blocks(net: &Network) -> Blocks {
    let n = net.num_nodes();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    let mut estack: Vec<usize> = Vec::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    // Frame: node, edge used to enter it, next incidence to scan.
    let mut stack: Vec<(usize, Option<usize>, usize)> = Vec::new();
    for s in 0..n {
        if disc[s] != usize::MAX {
            continue;
        }
        disc[s] = timer;
        low[s] = timer;
        timer += 1;
        stack.push((s, None, 0));
        while let Some(top) = stack.last_mut() {
            let (v, pe) = (top.0, top.1);
            let inc = net.incident(v);
            if top.2 < inc.len() {
                let i = inc[top.2];
                top.2 += 1;
                if Some(i.edge) == pe {
                    continue;
                }
                let w = i.other;
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    estack.push(i.edge);
                    stack.push((w, Some(i.edge), 0));
                } else if disc[w] < disc[v] {
                    estack.push(i.edge);
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] >= disc[u] {
                        let tree_edge = pe.expect("child entered by an edge");
                        let mut comp = Vec::new();
                        while let Some(e) = estack.pop() {
                            comp.push(e);
                            if e == tree_edge {
                                break;
                            }
                        }
                        out.push(comp);
                    }
                }
            }
        }
    }
    for b in &mut out {
        b.sort_unstable();
    }
    out.sort();
    let mut block_of_edge = vec![usize::MAX; net.num_edges()];
    let blocks = out
        .into_iter()
        .enumerate()
        .map(|(k, edges)| {
            let mut nodes = BTreeSet::new();
            for &p in &edges {
                block_of_edge[p] = k;
                nodes.insert(net.edge(p).tail);
                nodes.insert(net.edge(p).head);
            }
            Block {
                edges,
                nodes: nodes.into_iter().collect(),
            }
        })
        .collect();
    Blocks {
        blocks,
        block_of_edge,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyClass {
    Tree,
    NoPumps,
    PumpsNotInCycles,
    NonOverlappingCycles,
    PumpsNotInOverlappingCycles,
    Unsupported,
}

impl TopologyClass {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyClass::Tree => "tree",
            TopologyClass::NoPumps => "no-pumps",
            TopologyClass::PumpsNotInCycles => "pumps-not-in-cycles",
            TopologyClass::NonOverlappingCycles => "non-overlapping-cycles",
            TopologyClass::PumpsNotInOverlappingCycles => "pumps-not-in-overlapping-cycles",
            TopologyClass::Unsupported => "unsupported",
        }
    }
}

/// Most specific class of a network whose pumps are all running.
pub fn classify_network(net: &Network) -> TopologyClass {
    if net.num_edges() + 1 == net.num_nodes() {
        return TopologyClass::Tree;
    }
    if !net.has_pumps() {
        return TopologyClass::NoPumps;
    }
    let b = blocks(net);
    let pump_blocks: Vec<&Block> = net.pumps().map(|p| &b.blocks[b.block_of_edge[p]]).collect();
    if pump_blocks.iter().all(|blk| blk.is_bridge()) {
        return TopologyClass::PumpsNotInCycles;
    }
    if b.cyclic().all(|(_, blk)| blk.is_simple_cycle()) {
        return TopologyClass::NonOverlappingCycles;
    }
    if pump_blocks
        .iter()
        .all(|blk| blk.is_bridge() || blk.is_simple_cycle())
    {
        return TopologyClass::PumpsNotInOverlappingCycles;
    }
    TopologyClass::Unsupported
}

/// Classifies after removing off pumps by contraction.
pub fn classify(net: &Network, input: &WfInput) -> Result<TopologyClass> {
    if input.off_pumps.is_empty() {
        return Ok(classify_network(net));
    }
    let reduced =
        crate::hydraulics::apply_off_pumps(net, input, crate::hydraulics::OffPumpMode::Contract)?;
    Ok(classify_network(&reduced.net))
}

/// Where a node of a split network came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOrigin {
    Original(usize),
    /// Copy of the given original node, joined to it by a lossless link.
    SplitClone(usize),
}

/// A network whose cycle nodes shared with other cyclic blocks have been split.
///
/// Original nodes and edges keep their indices; clones and lossless links are
/// appended.
#[derive(Clone, Debug)]
pub struct SplitNetwork {
    pub net: Network,
    pub node_origin: Vec<NodeOrigin>,
    /// `(original node, clone, lossless link edge)`.
    pub splits: Vec<(usize, usize, usize)>,
    pub original_edges: usize,
}

impl SplitNetwork {
    /// Maps a split-network injection vector back (clones get nothing).
    pub fn lift_injections(&self, d: &[f64]) -> Vec<f64> {
        let mut out = d.to_vec();
        out.resize(self.net.num_nodes(), 0.0);
        out
    }
}

fn check_cycle_sets(net: &Network, cycles: &[Vec<usize>]) -> Result<()> {
    let mut owner = vec![usize::MAX; net.num_edges()];
    for (k, c) in cycles.iter().enumerate() {
        for &p in c {
            if p >= net.num_edges() {
                return Err(WdsError::InvalidInput(format!(
                    "cycle {k} references edge {p}"
                )));
            }
            if owner[p] != usize::MAX {
                return Err(WdsError::InvalidInput(format!(
                    "cycles {} and {k} overlap on edge '{}'",
                    owner[p],
                    net.edge(p).id
                )));
            }
            owner[p] = k;
        }
        // A simple cycle: every node has degree two within it and it is connected.
        let mut deg = std::collections::BTreeMap::<usize, usize>::new();
        for &p in c {
            *deg.entry(net.edge(p).tail).or_default() += 1;
            *deg.entry(net.edge(p).head).or_default() += 1;
        }
        if c.len() < 2 || deg.values().any(|&d| d != 2) || deg.len() != c.len() {
            return Err(WdsError::InvalidInput(format!(
                "edge set {k} is not a simple cycle"
            )));
        }
    }
    Ok(())
}

/// Splits every node of the given cycles that also lies on another cyclic
/// block. The clone takes over all of the node's edges outside the cycle and
/// is tied to the node by a lossless link.
pub fn split_shared_nodes(net: &Network, cycles: &[Vec<usize>]) -> Result<SplitNetwork> {
    check_cycle_sets(net, cycles)?;
    let b = blocks(net);
    let mut nodes: Vec<Node> = net.nodes().to_vec();
    let mut edges: Vec<Edge> = net.edges().to_vec();
    let mut node_origin: Vec<NodeOrigin> = (0..net.num_nodes()).map(NodeOrigin::Original).collect();
    let mut splits = Vec::new();
    for c in cycles {
        let in_c: BTreeSet<usize> = c.iter().copied().collect();
        let mut c_nodes: Vec<usize> = c
            .iter()
            .flat_map(|&p| [edges[p].tail, edges[p].head])
            .collect();
        c_nodes.sort_unstable();
        c_nodes.dedup();
        for &v in &c_nodes {
            // Incidences are read from the current edge list, since earlier
            // splits may already have moved edges onto clones.
            let outside: Vec<usize> = (0..edges.len())
                .filter(|p| !in_c.contains(p) && (edges[*p].tail == v || edges[*p].head == v))
                .collect();
            let shares_cyclic_block = outside
                .iter()
                .any(|&p| p >= net.num_edges() || !b.blocks[b.block_of_edge[p]].is_bridge());
            if !shares_cyclic_block {
                continue;
            }
            let clone = nodes.len();
            let base = nodes[v].clone();
            nodes.push(Node {
                id: format!("{}'", base.id),
                kind: NodeKind::Junction,
                elevation: base.elevation,
            });
            node_origin.push(NodeOrigin::SplitClone(v));
            for &p in &outside {
                let e = &mut edges[p];
                if e.tail == v {
                    e.tail = clone;
                } else {
                    e.head = clone;
                }
            }
            let link = edges.len();
            edges.push(Edge {
                id: format!("{}~{}'", base.id, base.id),
                tail: clone,
                head: v,
                kind: EdgeKind::Pipe { c: 0.0, rho: 2.0 },
            });
            splits.push((v, clone, link));
        }
    }
    let split_net = Network::new_internal(nodes, edges, net.reference())?;
    Ok(SplitNetwork {
        net: split_net,
        node_origin,
        splits,
        original_edges: net.num_edges(),
    })
}

/// Result of replacing cycles by supernodes.
#[derive(Clone, Debug)]
pub struct Contraction {
    pub net: Network,
    /// Node of the input network -> node of the reduced network.
    pub node_map: Vec<usize>,
    /// Edge of the input network -> edge of the reduced network; `None` inside a cycle.
    pub edge_map: Vec<Option<usize>>,
    /// Reduced-network node for each contracted cycle.
    pub supernodes: Vec<usize>,
    /// Reduced edge -> input edge.
    pub edge_origin: Vec<usize>,
}

/// Contracts each cycle (given as edge sets) into a single node.
///
/// Nodes shared with other cyclic blocks are split first, so the result is a
/// `(SplitNetwork, Contraction)` pair where the contraction indexes into the
/// split network.
pub fn contract_supernodes(
    net: &Network,
    cycles: &[Vec<usize>],
) -> Result<(SplitNetwork, Contraction)> {
    let split = split_shared_nodes(net, cycles)?;
    let s = &split.net;
    let mut cycle_of_node = vec![usize::MAX; s.num_nodes()];
    let mut internal = vec![false; s.num_edges()];
    for (k, c) in cycles.iter().enumerate() {
        for &p in c {
            internal[p] = true;
            for v in [s.edge(p).tail, s.edge(p).head] {
                if cycle_of_node[v] != usize::MAX && cycle_of_node[v] != k {
                    return Err(WdsError::InvalidInput(
                        "cycles still share a node after splitting".into(),
                    ));
                }
                cycle_of_node[v] = k;
            }
        }
    }
    let mut node_map = vec![usize::MAX; s.num_nodes()];
    let mut nodes = Vec::new();
    for v in 0..s.num_nodes() {
        if cycle_of_node[v] == usize::MAX {
            node_map[v] = nodes.len();
            nodes.push(s.node(v).clone());
        }
    }
    let mut supernodes = Vec::with_capacity(cycles.len());
    for (k, c) in cycles.iter().enumerate() {
        let idx = nodes.len();
        let mut members: Vec<usize> = c.iter().map(|&p| s.edge(p).tail).collect();
        members.sort_unstable();
        nodes.push(Node {
            id: format!(
                "[{}]",
                members
                    .iter()
                    .map(|&v| s.node(v).id.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            kind: NodeKind::Junction,
            elevation: 0.0,
        });
        for v in 0..s.num_nodes() {
            if cycle_of_node[v] == k {
                node_map[v] = idx;
            }
        }
        supernodes.push(idx);
    }
    let mut edges = Vec::new();
    let mut edge_map = vec![None; s.num_edges()];
    let mut edge_origin = Vec::new();
    for p in 0..s.num_edges() {
        if internal[p] {
            continue;
        }
        let e = s.edge(p);
        let (t, h) = (node_map[e.tail], node_map[e.head]);
        if t == h {
            return Err(WdsError::InvalidInput(format!(
                "edge '{}' is a chord of a contracted cycle, so the cycle overlaps another",
                e.id
            )));
        }
        edge_map[p] = Some(edges.len());
        edge_origin.push(p);
        edges.push(Edge {
            id: e.id.clone(),
            tail: t,
            head: h,
            kind: e.kind,
        });
    }
    let reduced = Network::new_internal(nodes, edges, node_map[s.reference()])?;
    Ok((
        split,
        Contraction {
            net: reduced,
            node_map,
            edge_map,
            supernodes,
            edge_origin,
        },
    ))
}

/// Subnetwork on `nodes` using the listed `edges`, rooted at `reference`.
/// Returns the network and the new index of each listed node.
pub(crate) fn induced(
    net: &Network,
    nodes: &[usize],
    edges: &[usize],
    reference: usize,
) -> Result<(Network, Vec<usize>)> {
    let mut local = vec![usize::MAX; net.num_nodes()];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let ns = nodes.iter().map(|&v| net.node(v).clone()).collect();
    let es = edges
        .iter()
        .map(|&p| {
            let e = net.edge(p);
            Edge {
                id: e.id.clone(),
                tail: local[e.tail],
                head: local[e.head],
                kind: e.kind,
            }
        })
        .collect();
    let sub = Network::new_internal(ns, es, local[reference])?;
    Ok((sub, local))
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if already joined. The smaller
    /// root survives so labels are deterministic.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        true
    }
}

/// Breadth-first node order over edges where `keep` holds, from `start`.
pub(crate) fn bfs_order(
    net: &Network,
    start: usize,
    keep: impl Fn(usize) -> bool,
) -> Vec<(usize, Option<usize>)> {
    let mut seen = vec![false; net.num_nodes()];
    let mut out = vec![(start, None)];
    seen[start] = true;
    let mut q = VecDeque::from([start]);
    while let Some(u) = q.pop_front() {
        for i in net.incident(u) {
            if keep(i.edge) && !seen[i.other] {
                seen[i.other] = true;
                out.push((i.other, Some(i.edge)));
                q.push_back(i.other);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

    fn triangle_with_tail() -> Network {
        NetworkBuilder::new()
            .junctions(["1", "2", "3", "4"])
            .pipe("a", "1", "2", 1.0)
            .pipe("b", "2", "3", 1.0)
            .pipe("c", "3", "1", 1.0)
            .pipe("d", "3", "4", 1.0)
            .build("1")
            .unwrap()
    }

    fn assert_null_space(net: &Network, cs: &CycleStructure) {
        for c in &cs.cycles {
            let f: Vec<f64> = c.indicator.iter().map(|&v| v as f64).collect();
            assert!(net.net_outflow(&f).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn tree_has_no_cycles() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3"])
            .pipe("a", "1", "2", 1.0)
            .pipe("b", "1", "3", 1.0)
            .build("1")
            .unwrap();
        let cs = analyze_cycles(&net);
        assert!(cs.cycles.is_empty());
        assert_eq!(cs.bridges.len(), 2);
        assert_eq!(classify_network(&net), TopologyClass::Tree);
    }

    #[test]
    fn triangle_cycle_and_bridge() {
        let net = triangle_with_tail();
        let cs = analyze_cycles(&net);
        assert_eq!(cs.cycles.len(), 1);
        assert_eq!(cs.cycles[0].edges, vec![0, 1, 2]);
        assert_eq!(cs.bridges, BTreeSet::from([3]));
        assert_null_space(&net, &cs);
    }

    #[test]
    fn blocks_of_triangle_with_tail() {
        let b = blocks(&triangle_with_tail());
        assert_eq!(b.blocks.len(), 2);
        assert!(b.blocks[0].is_simple_cycle());
        assert!(b.blocks[1].is_bridge());
    }

    #[test]
    fn bridge_flows_fixed_by_tree() {
        let net = triangle_with_tail();
        let fixed = fix_noncycle_flows(&net, &[3.0, -1.0, 0.0, -2.0]).unwrap();
        assert_eq!(fixed, vec![None, None, None, Some(2.0)]);
    }

    #[test]
    fn contract_triangle_to_two_node_tree() {
        let net = triangle_with_tail();
        let (split, c) = contract_supernodes(&net, &[vec![0, 1, 2]]).unwrap();
        assert!(split.splits.is_empty());
        assert_eq!(c.net.num_nodes(), 2);
        assert_eq!(c.net.num_edges(), 1);
        assert_eq!(c.net.edge(0).id, "d");
        assert_eq!(c.node_map[3], 0);
        assert_eq!(c.node_map[0], c.supernodes[0]);
    }

    #[test]
    fn overlapping_cycles_rejected_for_contraction() {
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3", "4"])
            .pipe("a", "1", "2", 1.0)
            .pipe("b", "2", "3", 1.0)
            .pipe("c", "3", "1", 1.0)
            .pipe("d", "3", "4", 1.0)
            .pipe("e", "4", "1", 1.0)
            .build("1")
            .unwrap();
        assert!(contract_supernodes(&net, &[vec![0, 1, 2], vec![2, 3, 4]]).is_err());
    }

    #[test]
    fn node_on_two_cycles_is_split() {
        // Two triangles sharing node 1.
        let net = NetworkBuilder::new()
            .junctions(["1", "2", "3", "4", "5"])
            .pipe("a", "1", "2", 1.0)
            .pipe("b", "2", "3", 1.0)
            .pipe("c", "3", "1", 1.0)
            .pipe("d", "1", "4", 1.0)
            .pipe("e", "4", "5", 1.0)
            .pipe("f", "5", "1", 1.0)
            .build("2")
            .unwrap();
        let (split, c) = contract_supernodes(&net, &[vec![0, 1, 2]]).unwrap();
        assert_eq!(split.splits.len(), 1);
        let (orig, clone, link) = split.splits[0];
        assert_eq!(orig, 0);
        assert_eq!(split.net.node(clone).id, "1'");
        assert!(split.net.edge(link).is_lossless());
        // Reduced: supernode, 1', 4, 5 with the link as a bridge.
        assert_eq!(c.net.num_nodes(), 4);
        assert_eq!(c.net.num_edges(), 4);
    }
}
