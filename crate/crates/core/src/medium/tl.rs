//! Transmission-line evaluation of tree networks.
//!
//! For a transmitter at node `tx` the tree is hung from `tx`. Walking leaves
//! to root, every branch is folded into the admittance it presents at its
//! attachment node. Walking root to leaves, each segment's ABCD matrix
//! `[[cosh γd, Zc sinh γd], [sinh γd / Zc, cosh γd]]`, loaded by the folded
//! admittance `Y` at its far end, gives `V_far / V_near = 1 / (A + B·Y)`.
//! The product of those ratios along the backbone is `H = V_rx / V_tx`.

use num_complex::Complex64;

use super::grid::{ChannelResponse, FrequencyGrid};
use super::topology::Topology;
use crate::error::{invalid, Result};

/// Reference impedance for reflection coefficients, Ω.
pub const DEFAULT_Z0: f64 = 50.0;

#[derive(Debug, Clone, Copy)]
struct SegmentAt {
    zc: Complex64,
    yc: Complex64,
    /// `tanh(γd)`
    tanh: Complex64,
    /// `e^{−γd}`
    em1: Complex64,
    /// `e^{−2γd}`
    em2: Complex64,
}

impl SegmentAt {
    fn new(zc: Complex64, gamma: Complex64, d: f64) -> Self {
        let em1 = (-gamma * d).exp();
        let em2 = em1 * em1;
        let one = Complex64::new(1.0, 0.0);
        Self { zc, yc: zc.inv(), tanh: (one - em2) / (one + em2), em1, em2 }
    }

    /// Admittance seen at the near end when the far end is loaded by `y`.
    fn input_admittance(&self, y: Complex64) -> Complex64 {
        self.yc * (y + self.yc * self.tanh) / (self.yc + y * self.tanh)
    }

    /// `V_far / V_near` when the far end is loaded by `y`.
    fn voltage_ratio(&self, y: Complex64) -> Complex64 {
        let k = self.zc * y;
        let one = Complex64::new(1.0, 0.0);
        2.0 * self.em1 / ((one + k) + (one - k) * self.em2)
    }
}

/// Per-frequency line constants of every segment of one topology, shared by
/// all transmitter positions.
pub struct TlSolver<'a> {
    topology: &'a Topology,
    grid: FrequencyGrid,
    segments: Vec<Vec<SegmentAt>>,
    loads: Vec<Complex64>,
}

impl<'a> TlSolver<'a> {
    pub fn new(topology: &'a Topology, grid: &FrequencyGrid) -> Result<Self> {
        topology.validate()?;
        grid.validate()?;
        let freqs = grid.freqs();
        let segments = topology
            .edges
            .iter()
            .map(|e| {
                freqs
                    .iter()
                    .map(|&f| {
                        let k = e.cable.constants(f);
                        SegmentAt::new(k.zc, k.gamma, e.length)
                    })
                    .collect()
            })
            .collect();
        let loads = topology.nodes.iter().map(|n| n.load.admittance()).collect();
        Ok(Self { topology, grid: *grid, segments, loads })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Folded admittance of every subtree hanging below each node (own load
    /// included) for the tree rooted at `root`, at bin `k`.
    fn subtree_admittance(&self, tree: &super::topology::RootedTree, k: usize) -> Vec<Complex64> {
        let mut y = self.loads.clone();
        for &v in tree.order.iter().rev() {
            if let Some((p, e)) = tree.parent[v] {
                let seen = self.segments[e][k].input_admittance(y[v]);
                y[p] += seen;
            }
        }
        y
    }

    /// `V_node / V_tx` for every node and bin, with an ideal source at `tx`.
    /// Indexed `[node][bin]`.
    pub fn voltages_from(&self, tx: usize) -> Vec<Vec<Complex64>> {
        let n = self.topology.n_nodes();
        let tree = self.topology.rooted(tx);
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.grid.n_bins]; n];
        for k in 0..self.grid.n_bins {
            let y = self.subtree_admittance(&tree, k);
            out[tx][k] = Complex64::new(1.0, 0.0);
            for &v in &tree.order[1..] {
                let (p, e) = tree.parent[v].unwrap();
                out[v][k] = out[p][k] * self.segments[e][k].voltage_ratio(y[v]);
            }
        }
        out
    }

    pub fn transfer(&self, tx: usize, rx: usize) -> Result<ChannelResponse> {
        let n = self.topology.n_nodes();
        if tx >= n || rx >= n || tx == rx {
            return invalid(format!("transfer needs two distinct nodes below {n}, got {tx} and {rx}"));
        }
        let tree = self.topology.rooted(tx);
        let path = self.topology.path(tx, rx);
        let mut h = Vec::with_capacity(self.grid.n_bins);
        for k in 0..self.grid.n_bins {
            let y = self.subtree_admittance(&tree, k);
            let mut v = Complex64::new(1.0, 0.0);
            for &node in &path[1..] {
                let (_, e) = tree.parent[node].unwrap();
                v *= self.segments[e][k].voltage_ratio(y[node]);
            }
            h.push(v);
        }
        Ok(ChannelResponse { grid: self.grid, h })
    }

    /// Admittance of the whole network seen at `node`, its own load included.
    pub fn input_admittance(&self, node: usize) -> Result<Vec<Complex64>> {
        if node >= self.topology.n_nodes() {
            return invalid(format!("node {node} does not exist"));
        }
        let tree = self.topology.rooted(node);
        Ok((0..self.grid.n_bins).map(|k| self.subtree_admittance(&tree, k)[node]).collect())
    }
}

/// Input admittance and reflection coefficient at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct LineState {
    pub y_in: Vec<Complex64>,
    pub rho_in: Vec<Complex64>,
    pub z0: f64,
}

/// `ρ = (Z − Z0)/(Z + Z0)` written in admittance form so open networks give `ρ = 1`.
pub fn reflection(y_in: Complex64, z0: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    (one - y_in * z0) / (one + y_in * z0)
}

pub fn tl_transfer(topology: &Topology, tx: usize, rx: usize, grid: &FrequencyGrid) -> Result<ChannelResponse> {
    TlSolver::new(topology, grid)?.transfer(tx, rx)
}

pub fn input_admittance(topology: &Topology, node: usize, grid: &FrequencyGrid, z0: f64) -> Result<LineState> {
    if !(z0 > 0.0) {
        return invalid("reference impedance must be positive");
    }
    let y_in = TlSolver::new(topology, grid)?.input_admittance(node)?;
    let rho_in = y_in.iter().map(|&y| reflection(y, z0)).collect();
    Ok(LineState { y_in, rho_in, z0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::cable::CableParams;
    use crate::medium::topology::{Edge, Load, Node};

    fn line(length: f64, cable: CableParams, near: Load, far: Load) -> Topology {
        Topology {
            nodes: vec![Node { id: 0, x: 0.0, y: 0.0, load: near }, Node { id: 1, x: length, y: 0.0, load: far }],
            edges: vec![Edge { a: 0, b: 1, length, cable }],
        }
    }

    #[test]
    fn zero_length_link_is_transparent() {
        let t = line(0.0, CableParams::default(), Load::resistive(2000.0), Load::resistive(30.0));
        let h = tl_transfer(&t, 0, 1, &FrequencyGrid::broadband(16)).unwrap();
        assert!(h.h.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn matched_line_attenuates_by_real_part_of_gamma() {
        // a frequency-independent matched load needs a distortionless line: R/L = G/C
        let cable = CableParams { r0: 0.05, l: 0.5e-6, c: 50e-12, g0: 5e-6, r_exp: 0.0, g_exp: 0.0 };
        let grid = FrequencyGrid::new(1e6, 30e6, 8).unwrap();
        let zc = cable.constants(1e6).zc;
        let d = 250.0;
        let t = line(d, cable, Load::Open, Load::Impedance(zc));
        let h = tl_transfer(&t, 0, 1, &grid).unwrap();
        for (k, v) in h.h.iter().enumerate() {
            let g = cable.constants(grid.freq(k)).gamma;
            assert!((v.norm() - (-g.re * d).exp()).abs() < 1e-10);
        }
        let st = input_admittance(&t, 0, &grid, zc.re).unwrap();
        for (y, r) in st.y_in.iter().zip(&st.rho_in) {
            assert!((y.inv() - zc).norm() < 1e-9);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn open_quarter_wave_stub_looks_like_a_short() {
        let cable = CableParams::lossless(0.5e-6, 50e-12);
        let d = 100.0;
        let f_q = cable.velocity() / (4.0 * d);
        let grid = FrequencyGrid::new(f_q * 0.5, f_q, 3).unwrap();
        let t = line(d, cable, Load::Open, Load::Open);
        let st = input_admittance(&t, 0, &grid, DEFAULT_Z0).unwrap();
        let z = st.y_in[2].inv();
        assert!(z.norm() < 1e-6, "|Zin| = {}", z.norm());
        // away from resonance the stub is reactive, not shorted
        assert!(st.y_in[1].inv().norm() > 10.0);
    }

    #[test]
    fn voltage_gain_can_exceed_one_on_a_resonant_stub() {
        // open far end near a quarter wavelength: classic voltage magnification
        let cable = CableParams::default();
        let d = 50.0;
        let f_q = cable.velocity() / (4.0 * d);
        let grid = FrequencyGrid::new(f_q * 0.99, f_q * 1.01, 5).unwrap();
        let t = line(d, cable, Load::Open, Load::Open);
        let h = tl_transfer(&t, 0, 1, &grid).unwrap();
        assert!(h.h.iter().any(|v| v.norm() > 1.0));
    }

    #[test]
    fn rejects_identical_endpoints() {
        let t = line(10.0, CableParams::default(), Load::Open, Load::Open);
        assert!(tl_transfer(&t, 1, 1, &FrequencyGrid::broadband(4)).is_err());
    }
}
