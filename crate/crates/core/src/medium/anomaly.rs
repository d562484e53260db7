use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::topology::{Edge, Load, Node, Topology};
use crate::error::{invalid, Result};
use crate::seed::Rng;

/// Grid anomaly injected into a healthy topology.
#[derive(Debug, Clone, PartialEq)]
pub enum Anomaly {
    /// The terminal impedance of `node` becomes `load`.
    LoadChange { node: usize, load: Load },
    /// A shunt impedance appears `position` metres from `edges[edge].a`.
    ConcentratedFault { edge: usize, position: f64, shunt: Load },
    /// Cable degradation over `[start, start + length]` metres from
    /// `edges[edge].a`: R and G (and L, C when `scale_lc`) scale by `factor`.
    DistributedFault { edge: usize, start: f64, length: f64, factor: f64, scale_lc: bool },
}

fn split_point(t: &Topology, edge: usize, position: f64) -> (f64, f64) {
    let e = &t.edges[edge];
    let (a, b) = (&t.nodes[e.a], &t.nodes[e.b]);
    let s = if e.length > 0.0 { position / e.length } else { 0.0 };
    (a.x + s * (b.x - a.x), a.y + s * (b.y - a.y))
}

/// Cuts `edge` at `position` metres from its `a` end, inserting a new node
/// with `load`. The original edge index keeps the `a`-side piece; the new
/// `b`-side piece is appended. Returns the new node id.
fn split_edge(t: &mut Topology, edge: usize, position: f64, load: Load) -> usize {
    let (x, y) = split_point(t, edge, position);
    let id = t.nodes.len();
    t.nodes.push(Node { id, x, y, load });
    let old = t.edges[edge].clone();
    t.edges[edge] = Edge { a: old.a, b: id, length: position, cable: old.cable };
    t.edges.push(Edge { a: id, b: old.b, length: old.length - position, cable: old.cable });
    id
}

/// Healthy topology plus one anomaly.
pub fn perturb(topology: &Topology, anomaly: &Anomaly) -> Result<Topology> {
    let mut t = topology.clone();
    match *anomaly {
        Anomaly::LoadChange { node, load } => {
            if node >= t.nodes.len() {
                return invalid(format!("load change on missing node {node}"));
            }
            t.nodes[node].load = load;
        }
        Anomaly::ConcentratedFault { edge, position, shunt } => {
            let len = t.edges.get(edge).map(|e| e.length).ok_or_else(|| crate::Error::InvalidArgument(format!("no edge {edge}")))?;
            if !(0.0..=len).contains(&position) {
                return invalid(format!("fault position {position} outside edge of length {len}"));
            }
            split_edge(&mut t, edge, position, shunt);
        }
        Anomaly::DistributedFault { edge, start, length, factor, scale_lc } => {
            let len = t.edges.get(edge).map(|e| e.length).ok_or_else(|| crate::Error::InvalidArgument(format!("no edge {edge}")))?;
            if !(start >= 0.0 && length > 0.0 && start + length <= len * (1.0 + 1e-12)) {
                return invalid(format!("degraded span {start}+{length} outside edge of length {len}"));
            }
            if !(factor > 0.0) {
                return invalid("degradation factor must be positive");
            }
            let end = (start + length).min(len);
            // carve [start, end] out as its own segment, then degrade it
            let mut target = edge;
            if end < len {
                split_edge(&mut t, edge, end, Load::Open);
            }
            if start > 0.0 {
                split_edge(&mut t, edge, start, Load::Open);
                target = t.edges.len() - 1;
            }
            let c = t.edges[target].cable.degraded(factor, scale_lc);
            t.edges[target].cable = c;
        }
    }
    Ok(t)
}

/// Sampling ranges for random anomalies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnomalyRanges {
    /// Log-uniform range of replacement load impedances, Ω.
    pub load_ohms: (f64, f64),
    /// Uniform range of fault shunt resistances, Ω.
    pub shunt_ohms: (f64, f64),
    /// Uniform range of the R/G scaling factor.
    pub degradation_factor: (f64, f64),
    /// Degraded span as a fraction of the edge length.
    pub span_fraction: (f64, f64),
    pub scale_lc: bool,
}

impl Default for AnomalyRanges {
    fn default() -> Self {
        Self {
            load_ohms: (10.0, 10e3),
            shunt_ohms: (10.0, 500.0),
            degradation_factor: (5.0, 50.0),
            span_fraction: (0.05, 0.2),
            scale_lc: false,
        }
    }
}

/// Which anomaly family to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    LoadChange,
    ConcentratedFault,
    DistributedFault,
}

pub fn log_uniform(rng: &mut Rng, range: (f64, f64)) -> f64 {
    (rng.random_range(range.0.ln()..=range.1.ln())).exp()
}

impl AnomalyRanges {
    /// Draws an anomaly of `kind` at a uniformly chosen node or edge.
    pub fn draw(&self, kind: AnomalyKind, topology: &Topology, rng: &mut Rng) -> Anomaly {
        match kind {
            AnomalyKind::LoadChange => Anomaly::LoadChange {
                node: rng.random_range(0..topology.nodes.len()),
                load: Load::resistive(log_uniform(rng, self.load_ohms)),
            },
            AnomalyKind::ConcentratedFault => {
                let edge = rng.random_range(0..topology.edges.len());
                let position = rng.random::<f64>() * topology.edges[edge].length;
                let shunt = Load::resistive(rng.random_range(self.shunt_ohms.0..=self.shunt_ohms.1));
                Anomaly::ConcentratedFault { edge, position, shunt }
            }
            AnomalyKind::DistributedFault => {
                let edge = rng.random_range(0..topology.edges.len());
                let len = topology.edges[edge].length;
                let length = len * rng.random_range(self.span_fraction.0..=self.span_fraction.1);
                let start = rng.random::<f64>() * (len - length);
                let factor = rng.random_range(self.degradation_factor.0..=self.degradation_factor.1);
                Anomaly::DistributedFault { edge, start, length, factor, scale_lc: self.scale_lc }
            }
        }
    }
}
