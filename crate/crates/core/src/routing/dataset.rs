use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::link::{build_link_table, Deployment, DeploymentConfig, LinkConfig, LinkTable};
use super::optimal::{optimal_route, RouteOutcome, RoutingProblem, RoutingSolution};
use crate::error::{invalid, Result};
use crate::io::fmt17;
use crate::medium::CableParams;
use crate::seed;

pub const FEATURE_NAMES: [&str; 11] = [
    "source_x",
    "source_y",
    "dest_x",
    "dest_y",
    "n_nodes",
    "max_backbone_km",
    "min_capacity_mbps",
    "area_side_km",
    "density",
    "euclidean_km",
    "backbone_km",
];

/// Problem-level descriptors. Node positions are given as fractions of the
/// area side rather than as raw ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteFeatureVector {
    pub source_xy: (f64, f64),
    pub dest_xy: (f64, f64),
    pub n_nodes: usize,
    /// m.
    pub max_backbone_distance: f64,
    /// bit/s.
    pub min_capacity: f64,
    /// m.
    pub area_side: f64,
    /// Nodes per km².
    pub density: f64,
    /// m.
    pub euclidean_distance: f64,
    /// m.
    pub backbone_distance: f64,
}

impl RouteFeatureVector {
    /// Fixed-order numeric form, in the units named by [`FEATURE_NAMES`].
    pub fn to_vec(&self) -> [f64; 11] {
        [
            self.source_xy.0,
            self.source_xy.1,
            self.dest_xy.0,
            self.dest_xy.1,
            self.n_nodes as f64,
            self.max_backbone_distance / 1e3,
            self.min_capacity / 1e6,
            self.area_side / 1e3,
            self.density,
            self.euclidean_distance / 1e3,
            self.backbone_distance / 1e3,
        ]
    }
}

pub fn route_features(deployment: &Deployment, table: &LinkTable, problem: &RoutingProblem) -> RouteFeatureVector {
    let nodes = &deployment.topology.nodes;
    let side = deployment.area_side;
    let (s, d) = (&nodes[problem.source], &nodes[problem.dest]);
    RouteFeatureVector {
        source_xy: (s.x / side, s.y / side),
        dest_xy: (d.x / side, d.y / side),
        n_nodes: deployment.n_nodes(),
        max_backbone_distance: table.max_backbone_distance(),
        min_capacity: problem.min_capacity,
        area_side: side,
        density: deployment.density,
        euclidean_distance: deployment.topology.euclidean(problem.source, problem.dest),
        backbone_distance: table.backbone_distance(problem.source, problem.dest),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_topologies: usize,
    /// Inclusive node-count range.
    pub node_range: (usize, usize),
    /// Nodes per km², drawn uniformly.
    pub density_range: (f64, f64),
    pub problems_per_topology: usize,
    /// Hop capacity floor, bit/s, drawn uniformly per problem.
    pub min_capacity_range: (f64, f64),
    pub load_ohms: f64,
    pub cable: CableParams,
    pub link: LinkConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_topologies: 40,
            node_range: (100, 175),
            density_range: (50.0, 400.0),
            problems_per_topology: 50,
            min_capacity_range: (100e6, 100e6),
            load_ohms: 2000.0,
            cable: CableParams::default(),
            link: LinkConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_range.0 < 2 || self.node_range.0 > self.node_range.1 {
            return invalid(format!("node range {:?} must be non-empty with at least two nodes", self.node_range));
        }
        let (d0, d1) = self.density_range;
        if !(d0 > 0.0 && d0 <= d1 && d1.is_finite()) {
            return invalid("density range must be positive and ordered");
        }
        let (c0, c1) = self.min_capacity_range;
        if !(c0 >= 0.0 && c0 <= c1 && c1.is_finite()) {
            return invalid("min_capacity range must be non-negative and ordered");
        }
        if self.problems_per_topology == 0 {
            return invalid("problems_per_topology must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteSample {
    /// Index into [`RouteDataset::deployments`].
    pub topology: usize,
    pub problem: RoutingProblem,
    pub features: RouteFeatureVector,
    pub solution: RoutingSolution,
}

/// Labeled routing problems together with the networks they were drawn on.
#[derive(Debug, Clone)]
pub struct RouteDataset {
    pub deployments: Vec<Deployment>,
    pub tables: Vec<LinkTable>,
    pub samples: Vec<RouteSample>,
    /// Problems dropped because no feasible route existed.
    pub infeasible: usize,
}

/// Random deployments with node counts uniform in `node_range`, random
/// source/destination pairs on each, labeled by [`optimal_route`].
pub fn route_dataset(config: &DatasetConfig, seed: u64) -> Result<RouteDataset> {
    config.validate()?;
    let per: Vec<Result<(Deployment, LinkTable, Vec<RoutingProblem>)>> = (0..config.n_topologies)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive_indexed(seed, "route-topology", i as u64));
            let n_nodes = rng.random_range(config.node_range.0..=config.node_range.1);
            let (d0, d1) = config.density_range;
            let density = if d0 == d1 { d0 } else { rng.random_range(d0..d1) };
            let dep_cfg = DeploymentConfig { n_nodes, density, load_ohms: config.load_ohms, cable: config.cable };
            let deployment = Deployment::random(&dep_cfg, rng.random())?;
            let table = build_link_table(&deployment, &config.link)?;
            let (c0, c1) = config.min_capacity_range;
            let problems = (0..config.problems_per_topology)
                .map(|_| {
                    let source = rng.random_range(0..n_nodes);
                    let dest = (source + rng.random_range(1..n_nodes)) % n_nodes;
                    let min_capacity = if c0 == c1 { c0 } else { rng.random_range(c0..c1) };
                    RoutingProblem { source, dest, min_capacity }
                })
                .collect();
            Ok((deployment, table, problems))
        })
        .collect();
    let mut out = RouteDataset { deployments: Vec::new(), tables: Vec::new(), samples: Vec::new(), infeasible: 0 };
    for (t, item) in per.into_iter().enumerate() {
        let (deployment, table, problems) = item?;
        for problem in problems {
            match optimal_route(&table, &problem)? {
                RouteOutcome::Routed(solution) => {
                    let features = route_features(&deployment, &table, &problem);
                    out.samples.push(RouteSample { topology: t, problem, features, solution });
                }
                RouteOutcome::Infeasible => out.infeasible += 1,
            }
        }
        out.deployments.push(deployment);
        out.tables.push(table);
    }
    Ok(out)
}

impl RouteDataset {
    /// One row per problem: the feature columns, then `label_n_routers` and
    /// `label_path` (dash-joined node ids).
    pub fn to_csv(&self) -> String {
        let mut s = format!("topology,source,dest,{},label_n_routers,label_path\n", FEATURE_NAMES.join(","));
        for r in &self.samples {
            let f: Vec<String> = r.features.to_vec().iter().map(|&v| fmt17(v)).collect();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.topology,
                r.problem.source,
                r.problem.dest,
                f.join(","),
                r.solution.n_routers,
                r.solution.path_label()
            ));
        }
        s
    }

    /// Histogram of optimal router counts.
    pub fn router_histogram(&self) -> Vec<usize> {
        let max = self.samples.iter().map(|s| s.solution.n_routers).max().unwrap_or(0);
        let mut h = vec![0; max + 1];
        for s in &self.samples {
            h[s.solution.n_routers] += 1;
        }
        h
    }
}
