use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::medium::{capacity_flat, dbm_per_hz_to_watts, topo_random, CableParams, FrequencyGrid, TlSolver, Topology, TopologyConfig};

/// A tree of radio cells spread over a square service area.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub topology: Topology,
    /// Nodes per km².
    pub density: f64,
    /// Side of the square area, m.
    pub area_side: f64,
}

/// Parameters of [`Deployment::random`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeploymentConfig {
    pub n_nodes: usize,
    /// Nodes per km².
    pub density: f64,
    pub load_ohms: f64,
    pub cable: CableParams,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self { n_nodes: 150, density: 100.0, load_ohms: 2000.0, cable: CableParams::default() }
    }
}

impl Deployment {
    /// Wraps a topology laid out in a square of side `area_side`.
    pub fn new(topology: Topology, area_side: f64) -> Result<Self> {
        topology.validate()?;
        if !(area_side > 0.0) {
            return invalid("area_side must be positive");
        }
        let km = area_side / 1000.0;
        let density = topology.n_nodes() as f64 / (km * km);
        Ok(Self { topology, density, area_side })
    }

    /// Uniform nodes in a square sized so that `n_nodes / area = density`,
    /// wired by the minimum spanning tree.
    pub fn random(config: &DeploymentConfig, seed: u64) -> Result<Self> {
        if !(config.density > 0.0 && config.density.is_finite()) {
            return invalid(format!("density must be positive, got {}", config.density));
        }
        let area_side = 1000.0 * (config.n_nodes as f64 / config.density).sqrt();
        let topo = topo_random(
            &TopologyConfig {
                n_nodes: config.n_nodes,
                area_side,
                avg_edge_len: None,
                load_ohms: config.load_ohms,
                cable: config.cable,
            },
            seed,
        )?;
        Self::new(topo, area_side)
    }

    pub fn n_nodes(&self) -> usize {
        self.topology.n_nodes()
    }
}

/// Band and power spectral densities used for link capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub grid: FrequencyGrid,
    pub tx_psd_dbm_hz: f64,
    pub noise_psd_dbm_hz: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { grid: FrequencyGrid::broadband(128), tx_psd_dbm_hz: -70.0, noise_psd_dbm_hz: -110.0 }
    }
}

/// Pairwise capacities (bit/s) and cable-path distances (m), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    n: usize,
    capacity: Vec<f64>,
    backbone: Vec<f64>,
}

impl LinkTable {
    /// Builds a table from explicit matrices; used for hand-made instances.
    pub fn from_matrices(capacity: Vec<Vec<f64>>, backbone: Vec<Vec<f64>>) -> Result<Self> {
        let n = capacity.len();
        if backbone.len() != n || capacity.iter().chain(&backbone).any(|r| r.len() != n) {
            return invalid("capacity and distance matrices must be square and of equal size");
        }
        if capacity.iter().flatten().any(|&c| !(c >= 0.0)) {
            return invalid("capacities must be non-negative");
        }
        let mut t = Self { n, capacity: capacity.concat(), backbone: backbone.concat() };
        for i in 0..n {
            t.capacity[i * n + i] = 0.0;
            t.backbone[i * n + i] = 0.0;
        }
        Ok(t)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Capacity of the hop `i → j`.
    pub fn capacity(&self, i: usize, j: usize) -> f64 {
        self.capacity[i * self.n + j]
    }

    pub fn backbone_distance(&self, i: usize, j: usize) -> f64 {
        self.backbone[i * self.n + j]
    }

    pub fn capacity_row(&self, i: usize) -> &[f64] {
        &self.capacity[i * self.n..(i + 1) * self.n]
    }

    pub fn max_backbone_distance(&self) -> f64 {
        self.backbone.iter().copied().fold(0.0, f64::max)
    }
}

/// Capacity of every pair from the transmission-line transfer functions,
/// and the tree path length between every pair.
///
/// With an ideal source the voltage ratio is not reciprocal: `V_j/V_i`
/// and `V_i/V_j` differ whenever the impedances seen at `i` and `j` do. A
/// link is credited with the weaker of its two directions, so the table is
/// symmetric.
pub fn build_link_table(deployment: &Deployment, config: &LinkConfig) -> Result<LinkTable> {
    let topo = &deployment.topology;
    let solver = TlSolver::new(topo, &config.grid)?;
    let n = topo.n_nodes();
    let snr_scale = dbm_per_hz_to_watts(config.tx_psd_dbm_hz) / dbm_per_hz_to_watts(config.noise_psd_dbm_hz);
    let df = config.grid.spacing();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|tx| {
            let v = solver.voltages_from(tx);
            let cap = (0..n)
                .map(|rx| if rx == tx { 0.0 } else { capacity_flat(v[rx].iter().map(|h| h.norm_sqr()), df, snr_scale) })
                .collect();
            (cap, topo.backbone_distances(tx))
        })
        .collect();
    let (directed, backbone): (Vec<Vec<f64>>, Vec<_>) = rows.into_iter().unzip();
    let capacity = (0..n * n).map(|k| directed[k / n][k % n].min(directed[k % n][k / n])).collect();
    Ok(LinkTable { n, capacity, backbone: backbone.concat() })
}
