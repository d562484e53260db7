use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::cable::CableParams;
use crate::error::{invalid, Result};
use crate::seed;

/// Terminal load hanging off a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Load {
    Open,
    Impedance(Complex64),
}

impl Load {
    pub fn resistive(ohms: f64) -> Self {
        Load::Impedance(Complex64::new(ohms, 0.0))
    }

    pub fn admittance(&self) -> Complex64 {
        match self {
            Load::Open => Complex64::new(0.0, 0.0),
            Load::Impedance(z) => z.inv(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub load: Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Metres.
    pub length: f64,
    pub cable: CableParams,
}

impl Edge {
    pub fn other(&self, n: usize) -> usize {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Tree-shaped network of cable segments. Node `i` always has `id == i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// Parameters of [`topo_random`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub n_nodes: usize,
    /// Side of the square deployment area, metres.
    pub area_side: f64,
    /// When set, the layout is rescaled after building the tree so the mean
    /// edge length hits this value.
    pub avg_edge_len: Option<f64>,
    /// Resistive load at every node, Ω.
    pub load_ohms: f64,
    pub cable: CableParams,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { n_nodes: 20, area_side: 1000.0, avg_edge_len: None, load_ohms: 2000.0, cable: CableParams::default() }
    }
}

impl Topology {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Checks ids, edge references, lengths, and that the graph is a spanning tree.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return invalid("topology has no nodes");
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return invalid(format!("node at position {i} has id {}", node.id));
            }
        }
        if self.edges.len() + 1 != n {
            return invalid(format!("{} edges cannot form a tree on {n} nodes", self.edges.len()));
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.a >= n || e.b >= n || e.a == e.b {
                return invalid(format!("edge {k} references invalid nodes {}–{}", e.a, e.b));
            }
            // zero-length segments are allowed: they model a direct connection
            if !(e.length >= 0.0 && e.length.is_finite()) {
                return invalid(format!("edge {k} has length {}", e.length));
            }
            if !e.cable.is_valid() {
                return invalid(format!("edge {k} has invalid cable parameters"));
            }
        }
        let seen = self.bfs_order(0).len();
        if seen != n {
            return invalid(format!("topology is disconnected ({seen} of {n} nodes reachable)"));
        }
        Ok(())
    }

    /// Incident edge indices per node.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.a].push(k);
            adj[e.b].push(k);
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.a == node || e.b == node).count()
    }

    /// Nodes in breadth-first order from `root`.
    pub fn bfs_order(&self, root: usize) -> Vec<usize> {
        self.rooted(root).order
    }

    /// Parent links and breadth-first order for the tree hung from `root`.
    pub fn rooted(&self, root: usize) -> RootedTree {
        let adj = self.adjacency();
        let n = self.nodes.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = vec![root];
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &k in &adj[v] {
                let w = self.edges[k].other(v);
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, k));
                    order.push(w);
                }
            }
        }
        RootedTree { root, parent, order }
    }

    /// Cable-path length from `from` to every node.
    pub fn backbone_distances(&self, from: usize) -> Vec<f64> {
        let t = self.rooted(from);
        let mut d = vec![0.0; self.nodes.len()];
        for &v in &t.order[1..] {
            let (p, k) = t.parent[v].unwrap();
            d[v] = d[p] + self.edges[k].length;
        }
        d
    }

    /// Node sequence of the unique tree path `a → b`.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let t = self.rooted(a);
        let mut p = vec![b];
        let mut v = b;
        while let Some((u, _)) = t.parent[v] {
            p.push(u);
            v = u;
        }
        p.reverse();
        p
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn euclidean(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (&self.nodes[a], &self.nodes[b]);
        ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
    }

    /// Degree-one nodes.
    pub fn leaves(&self) -> Vec<usize> {
        let adj = self.adjacency();
        (0..self.nodes.len()).filter(|&v| adj[v].len() == 1).collect()
    }

    /// Highest-degree node, lowest id on ties.
    pub fn hub(&self) -> usize {
        let adj = self.adjacency();
        (0..self.nodes.len()).max_by_key(|&v| (adj[v].len(), std::cmp::Reverse(v))).unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TopologyDoc::from(self)).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TopologyDoc = serde_json::from_str(text)?;
        let t = Topology::from(doc);
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct RootedTree {
    pub root: usize,
    /// `(parent node, edge index)` for every non-root node.
    pub parent: Vec<Option<(usize, usize)>>,
    pub order: Vec<usize>,
}

/// Random tree: nodes uniform in a square, wired by the Euclidean minimum
/// spanning tree.
pub fn topo_random(config: &TopologyConfig, seed: u64) -> Result<Topology> {
    let n = config.n_nodes;
    if n < 2 {
        return invalid("a random topology needs at least two nodes");
    }
    if !(config.area_side > 0.0) {
        return invalid("area_side must be positive");
    }
    let mut rng = seed::rng(seed);
    let mut pts: Vec<(f64, f64)> =
        (0..n).map(|_| (rng.random::<f64>() * config.area_side, rng.random::<f64>() * config.area_side)).collect();
    let mut edges = euclidean_mst(&pts);
    if let Some(target) = config.avg_edge_len {
        if !(target > 0.0) {
            return invalid("avg_edge_len must be positive");
        }
        let mean = edges.iter().map(|e| e.2).sum::<f64>() / edges.len() as f64;
        if mean > 0.0 {
            let s = target / mean;
            pts.iter_mut().for_each(|p| {
                p.0 *= s;
                p.1 *= s;
            });
            edges.iter_mut().for_each(|e| e.2 *= s);
        }
    }
    let load = Load::resistive(config.load_ohms);
    Ok(Topology {
        nodes: pts.iter().enumerate().map(|(id, &(x, y))| Node { id, x, y, load }).collect(),
        edges: edges.into_iter().map(|(a, b, length)| Edge { a, b, length, cable: config.cable }).collect(),
    })
}

/// Prim's algorithm on the complete Euclidean graph, O(n²).
pub fn euclidean_mst(pts: &[(f64, f64)]) -> Vec<(usize, usize, f64)> {
    let n = pts.len();
    let dist = |i: usize, j: usize| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 0 {
        return edges;
    }
    in_tree[0] = true;
    for j in 1..n {
        best[j] = dist(0, j);
    }
    for _ in 1..n {
        let mut v = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (v == usize::MAX || best[j] < best[v]) {
                v = j;
            }
        }
        in_tree[v] = true;
        edges.push((link[v], v, best[v]));
        for j in 0..n {
            if !in_tree[j] {
                let d = dist(v, j);
                if d < best[j] {
                    best[j] = d;
                    link[j] = v;
                }
            }
        }
    }
    edges
}

/// File layout `{nodes:[{id,x,y,load_re,load_im}], edges:[{a,b,length,cable}]}`.
/// Open loads carry `null` impedance parts.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub load_re: Option<f64>,
    pub load_im: Option<f64>,
}

impl From<&Topology> for TopologyDoc {
    fn from(t: &Topology) -> Self {
        Self {
            nodes: t
                .nodes
                .iter()
                .map(|n| {
                    let (re, im) = match n.load {
                        Load::Open => (None, None),
                        Load::Impedance(z) => (Some(z.re), Some(z.im)),
                    };
                    NodeDoc { id: n.id, x: n.x, y: n.y, load_re: re, load_im: im }
                })
                .collect(),
            edges: t.edges.clone(),
        }
    }
}

impl From<TopologyDoc> for Topology {
    fn from(doc: TopologyDoc) -> Self {
        let mut nodes: Vec<Node> = doc
            .nodes
            .into_iter()
            .map(|n| {
                let load = match (n.load_re, n.load_im) {
                    (None, None) => Load::Open,
                    (re, im) => Load::Impedance(Complex64::new(re.unwrap_or(0.0), im.unwrap_or(0.0))),
                };
                Node { id: n.id, x: n.x, y: n.y, load }
            })
            .collect();
        nodes.sort_by_key(|n| n.id);
        Topology { nodes, edges: doc.edges }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_give_one_edge_of_their_distance() {
        let t = topo_random(&TopologyConfig { n_nodes: 2, ..Default::default() }, 4).unwrap();
        assert_eq!(t.edges.len(), 1);
        assert!((t.edges[0].length - t.euclidean(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn random_topologies_are_spanning_trees_no_longer_than_a_star() {
        for seed in 0..20 {
            let n = 3 + seed as usize;
            let t = topo_random(&TopologyConfig { n_nodes: n, ..Default::default() }, seed).unwrap();
            t.validate().unwrap();
            assert_eq!(t.edges.len(), n - 1);
            let star: f64 = (1..n).map(|j| t.euclidean(0, j)).sum();
            assert!(t.total_length() <= star + 1e-9);
        }
    }

    #[test]
    fn rescaling_hits_mean_edge_length() {
        let cfg = TopologyConfig { n_nodes: 20, avg_edge_len: Some(700.0), ..Default::default() };
        let t = topo_random(&cfg, 1).unwrap();
        let mean = t.total_length() / 19.0;
        assert!((mean - 700.0).abs() < 1e-9);
        assert!((t.edges[0].length - t.euclidean(t.edges[0].a, t.edges[0].b)).abs() < 1e-6);
    }

    #[test]
    fn path_and_distances_are_consistent() {
        let t = topo_random(&TopologyConfig { n_nodes: 12, ..Default::default() }, 9).unwrap();
        let d = t.backbone_distances(3);
        let p = t.path(3, 7);
        assert_eq!((p[0], *p.last().unwrap()), (3, 7));
        let along: f64 = p
            .windows(2)
            .map(|w| t.edges.iter().find(|e| (e.a == w[0] && e.b == w[1]) || (e.a == w[1] && e.b == w[0])).unwrap().length)
            .sum();
        assert!((along - d[7]).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_keeps_open_loads() {
        let mut t = topo_random(&TopologyConfig { n_nodes: 4, ..Default::default() }, 2).unwrap();
        t.nodes[1].load = Load::Open;
        let back = Topology::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn cycles_are_rejected() {
        let mut t = topo_random(&TopologyConfig { n_nodes: 4, ..Default::default() }, 2).unwrap();
        let e = t.edges[0].clone();
        t.edges[1] = Edge { a: e.a, b: e.b, ..e };
        assert!(t.validate().is_err());
    }
}
