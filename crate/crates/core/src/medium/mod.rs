//! Physical substrate: cables, tree topologies, transmission-line channels,
//! echo-model channels, noise, capacity and grid anomalies.

pub mod anomaly;
pub mod cable;
pub mod capacity;
pub mod grid;
pub mod multipath;
pub mod noise;
pub mod tl;
pub mod topology;

pub use anomaly::{perturb, Anomaly, AnomalyKind, AnomalyRanges};
pub use cable::{CableParams, LineConstants};
pub use capacity::{allocation_capacity, capacity, capacity_flat, dbm_per_hz_to_watts, waterfill};
pub use grid::{ChannelResponse, FrequencyGrid};
pub use multipath::{random_multipath, topdown_channel, MultipathConfig, MultipathParams, Path};
pub use noise::{noise_synthesize, NoiseComponent, NoiseSpec};
pub use tl::{input_admittance, reflection, tl_transfer, LineState, TlSolver, DEFAULT_Z0};
pub use topology::{topo_random, Edge, Load, Node, Topology, TopologyConfig};
