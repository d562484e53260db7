//! Learned relay selection.
//!
//! A route is grown one hop at a time. At the current node the candidates
//! are the unvisited nodes it reaches with a working link; they are binned
//! into eight 45° sectors around the bearing to the destination, sector 0
//! straight ahead. A classifier picks either the direct hop or one sector,
//! and the candidate in that sector with the largest two-leg bottleneck
//! `min(C(cur, v), C(v, dest))` becomes the next hop. A second classifier
//! estimates the router count from the problem descriptors alone; it sets
//! the hop budget.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dataset::{route_features, RouteDataset};
use super::link::{Deployment, LinkTable};
use super::optimal::{optimal_route, RoutingProblem, RoutingSolution};
use crate::error::{invalid, Result};
use crate::io::fmt17;
use crate::nn::{train, Activation, LabeledDataset, Loss, MlpModel, OptimizerKind, Scaler, TrainConfig};
use crate::seed;
use crate::tensor::Tensor2;

pub const N_SECTORS: usize = 8;
/// Class index of the direct hop; sector `k` is class `k + 1`.
pub const DIRECT: usize = 0;
const STEP_DIM: usize = 11 + 4 + 2 * N_SECTORS;
const RATIO_CLIP: f64 = 4.0;

/// Angular sector of `v` seen from `cur`, relative to the bearing to `dest`.
pub fn sector(deployment: &Deployment, cur: usize, v: usize, dest: usize) -> usize {
    let n = &deployment.topology.nodes;
    let bearing = (n[dest].y - n[cur].y).atan2(n[dest].x - n[cur].x);
    let angle = (n[v].y - n[cur].y).atan2(n[v].x - n[cur].x);
    let rel = (angle - bearing + PI / N_SECTORS as f64).rem_euclid(2.0 * PI);
    ((rel / (2.0 * PI / N_SECTORS as f64)) as usize).min(N_SECTORS - 1)
}

fn two_leg(table: &LinkTable, cur: usize, v: usize, dest: usize) -> f64 {
    table.capacity(cur, v).min(table.capacity(v, dest))
}

/// Best candidate and candidate count of every sector.
fn ring(deployment: &Deployment, table: &LinkTable, cur: usize, dest: usize, min_capacity: f64, visited: &[bool]) -> [(Option<usize>, usize); N_SECTORS] {
    let mut out = [(None, 0); N_SECTORS];
    for v in 0..table.n_nodes() {
        if v == dest || visited[v] || table.capacity(cur, v) < min_capacity {
            continue;
        }
        let slot = &mut out[sector(deployment, cur, v, dest)];
        slot.1 += 1;
        // ids ascend, so strict improvement keeps the lowest id on ties
        if slot.0.is_none_or(|b| two_leg(table, cur, v, dest) > two_leg(table, cur, b, dest)) {
            slot.0 = Some(v);
        }
    }
    out
}

fn log_ratio(c: f64, min_capacity: f64) -> f64 {
    if min_capacity <= 0.0 {
        return RATIO_CLIP;
    }
    (c / min_capacity).log2().clamp(-RATIO_CLIP, RATIO_CLIP)
}

struct StepContext<'a> {
    deployment: &'a Deployment,
    table: &'a LinkTable,
    problem: &'a RoutingProblem,
    base: [f64; 11],
}

impl StepContext<'_> {
    fn inputs(&self, cur: usize, hop: usize, visited: &[bool]) -> ([f64; STEP_DIM], [(Option<usize>, usize); N_SECTORS]) {
        let (d, m) = (self.problem.dest, self.problem.min_capacity);
        let r = ring(self.deployment, self.table, cur, d, m, visited);
        let node = &self.deployment.topology.nodes[cur];
        let mut x = [0.0; STEP_DIM];
        x[..11].copy_from_slice(&self.base);
        x[11] = node.x / self.deployment.area_side;
        x[12] = node.y / self.deployment.area_side;
        x[13] = hop as f64;
        x[14] = log_ratio(self.table.capacity(cur, d), m);
        for (k, (best, count)) in r.iter().enumerate() {
            x[15 + 2 * k] = best.map_or(-RATIO_CLIP - 1.0, |v| log_ratio(two_leg(self.table, cur, v, d), m));
            x[16 + 2 * k] = (*count as f64 / 10.0).min(1.0);
        }
        (x, r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouterConfig {
    pub hidden: Vec<usize>,
    /// Dropout on the network inputs during training.
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Router counts at or above this share the last class.
    pub max_router_class: usize,
    pub seed: u64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 64], dropout_rate: 0.5, epochs: 40, learning_rate: 2e-3, batch_size: 64, max_router_class: 4, seed: 0 }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_router_class == 0 {
            return invalid("max_router_class must be positive");
        }
        if self.hidden.contains(&0) || self.batch_size == 0 {
            return invalid("hidden widths and batch_size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning_rate must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return invalid("dropout_rate must lie in [0,1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnRouter {
    pub step_model: MlpModel,
    pub step_scaler: Scaler,
    pub count_model: MlpModel,
    pub count_scaler: Scaler,
    pub max_router_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterHistory {
    pub step_loss: Vec<f64>,
    pub count_loss: Vec<f64>,
}

fn classifier(input: usize, hidden: &[usize], classes: usize, seed: u64) -> Result<MlpModel> {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(classes);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::Softmax);
    MlpModel::new(&dims, &acts, seed)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-step training rows: the inputs seen at every node of every optimal
/// path, labeled with the class of the hop the optimum takes next.
pub fn step_examples(dataset: &RouteDataset) -> (Vec<[f64; STEP_DIM]>, Vec<usize>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &dataset.samples {
        let ctx = StepContext {
            deployment: &dataset.deployments[s.topology],
            table: &dataset.tables[s.topology],
            problem: &s.problem,
            base: s.features.to_vec(),
        };
        let mut visited = vec![false; ctx.table.n_nodes()];
        for (hop, w) in s.solution.path.windows(2).enumerate() {
            visited[w[0]] = true;
            let (x, _) = ctx.inputs(w[0], hop, &visited);
            let label = if w[1] == s.problem.dest { DIRECT } else { 1 + sector(ctx.deployment, w[0], w[1], s.problem.dest) };
            xs.push(x);
            ys.push(label);
        }
    }
    (xs, ys)
}

fn fit(rows: Tensor2, labels: &[usize], classes: usize, config: &RouterConfig, label: &str) -> Result<(MlpModel, Scaler, Vec<f64>)> {
    let scaler = Scaler::fit(&rows);
    let data = LabeledDataset::from_classes(scaler.transform(&rows), labels, classes)?;
    let mut model = classifier(rows.cols(), &config.hidden, classes, seed::derive(config.seed, &format!("{label}-init")))?;
    let tc = TrainConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        epochs: config.epochs,
        dropout_rate: config.dropout_rate,
        seed: seed::derive(config.seed, &format!("{label}-train")),
        loss: Loss::CrossEntropy,
        ..Default::default()
    };
    let history = train(&mut model, &data, &tc)?;
    Ok((model, scaler, history.loss))
}

pub fn nn_route_train(dataset: &RouteDataset, config: &RouterConfig) -> Result<(NnRouter, RouterHistory)> {
    if dataset.samples.is_empty() {
        return invalid("routing dataset has no feasible problems");
    }
    config.validate()?;
    let (xs, ys) = step_examples(dataset);
    let rows = Tensor2::from_vec(xs.len(), STEP_DIM, xs.concat())?;
    let (step_model, step_scaler, step_loss) = fit(rows, &ys, 1 + N_SECTORS, config, "step")?;

    let counts: Vec<usize> = dataset.samples.iter().map(|s| s.solution.n_routers.min(config.max_router_class)).collect();
    let base: Vec<f64> = dataset.samples.iter().flat_map(|s| s.features.to_vec()).collect();
    let rows = Tensor2::from_vec(dataset.samples.len(), 11, base)?;
    let (count_model, count_scaler, count_loss) = fit(rows, &counts, config.max_router_class + 1, config, "count")?;
    Ok((
        NnRouter { step_model, step_scaler, count_model, count_scaler, max_router_class: config.max_router_class },
        RouterHistory { step_loss, count_loss },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictedPath {
    /// Every hop meets the capacity floor.
    Valid(RoutingSolution),
    /// The path reached the destination through a hop below the floor.
    Invalid(Vec<usize>),
    /// The chosen sector held no candidate.
    EmptySector(Vec<usize>),
    /// The destination was not reached within the hop budget.
    BudgetExceeded(Vec<usize>),
}

impl PredictedPath {
    pub fn path(&self) -> &[usize] {
        match self {
            PredictedPath::Valid(s) => &s.path,
            PredictedPath::Invalid(p) | PredictedPath::EmptySector(p) | PredictedPath::BudgetExceeded(p) => p,
        }
    }

    pub fn solution(&self) -> Option<&RoutingSolution> {
        match self {
            PredictedPath::Valid(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePrediction {
    /// Router count estimated from the problem descriptors.
    pub n_routers: usize,
    pub path: PredictedPath,
}

impl NnRouter {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("router serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn classify(model: &MlpModel, scaler: &Scaler, x: &[f64]) -> Result<usize> {
        let mut row = x.to_vec();
        scaler.transform_row(&mut row);
        let p = model.predict(&Tensor2::from_vec(1, row.len(), row)?)?;
        Ok(argmax(p.row(0)))
    }

    /// Hop budget for a predicted router count `r`: twice the hop count plus two.
    pub fn hop_budget(n_routers: usize) -> usize {
        2 * (n_routers + 1) + 2
    }
}

/// Grows a path with the trained classifiers and checks every hop against
/// the link table. Nothing is repaired: a bad choice ends the walk and is
/// reported as such.
pub fn nn_route_predict(model: &NnRouter, deployment: &Deployment, table: &LinkTable, problem: &RoutingProblem) -> Result<RoutePrediction> {
    problem.validate(table.n_nodes())?;
    if deployment.n_nodes() != table.n_nodes() {
        return invalid("deployment and link table disagree on the node count");
    }
    let base = route_features(deployment, table, problem).to_vec();
    let n_routers = NnRouter::classify(&model.count_model, &model.count_scaler, &base)?;
    let budget = NnRouter::hop_budget(n_routers);
    let ctx = StepContext { deployment, table, problem, base };
    let mut visited = vec![false; table.n_nodes()];
    let mut path = vec![problem.source];
    let mut cur = problem.source;
    for hop in 0..budget {
        visited[cur] = true;
        let (x, ring) = ctx.inputs(cur, hop, &visited);
        let class = NnRouter::classify(&model.step_model, &model.step_scaler, &x)?;
        if class == DIRECT {
            path.push(problem.dest);
            let ok = path.windows(2).all(|w| table.capacity(w[0], w[1]) >= problem.min_capacity);
            let path = if ok { PredictedPath::Valid(RoutingSolution::from_path(table, path)) } else { PredictedPath::Invalid(path) };
            return Ok(RoutePrediction { n_routers, path });
        }
        match ring[class - 1].0 {
            Some(v) => {
                path.push(v);
                cur = v;
            }
            None => return Ok(RoutePrediction { n_routers, path: PredictedPath::EmptySector(path) }),
        }
    }
    Ok(RoutePrediction { n_routers, path: PredictedPath::BudgetExceeded(path) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub problems: usize,
    /// Predicted path identical to the optimum.
    pub matched: usize,
    /// Predicted router count identical to the optimum.
    pub count_matched: usize,
    pub invalid: usize,
}

impl MatchReport {
    pub fn fraction(&self) -> f64 {
        if self.problems == 0 {
            0.0
        } else {
            self.matched as f64 / self.problems as f64
        }
    }

    pub fn count_fraction(&self) -> f64 {
        if self.problems == 0 {
            0.0
        } else {
            self.count_matched as f64 / self.problems as f64
        }
    }
}

/// Exact-path agreement with the labels, grouped by node-count bucket of
/// width `bucket` (key = bucket lower edge).
pub fn evaluate_match(model: &NnRouter, dataset: &RouteDataset, bucket: usize) -> Result<Vec<(usize, MatchReport)>> {
    let bucket = bucket.max(1);
    let mut groups: std::collections::BTreeMap<usize, MatchReport> = Default::default();
    for s in &dataset.samples {
        let dep = &dataset.deployments[s.topology];
        let p = nn_route_predict(model, dep, &dataset.tables[s.topology], &s.problem)?;
        let g = groups.entry(dep.n_nodes() / bucket * bucket).or_insert(MatchReport { problems: 0, matched: 0, count_matched: 0, invalid: 0 });
        g.problems += 1;
        g.matched += usize::from(p.path.path() == s.solution.path.as_slice());
        g.count_matched += usize::from(p.n_routers == s.solution.n_routers.min(model.max_router_class));
        g.invalid += usize::from(p.path.solution().is_none());
    }
    Ok(groups.into_iter().collect())
}

/// Sums the buckets of [`evaluate_match`].
pub fn total_match(groups: &[(usize, MatchReport)]) -> MatchReport {
    groups.iter().fold(MatchReport { problems: 0, matched: 0, count_matched: 0, invalid: 0 }, |a, (_, g)| MatchReport {
        problems: a.problems + g.problems,
        matched: a.matched + g.matched,
        count_matched: a.count_matched + g.count_matched,
        invalid: a.invalid + g.invalid,
    })
}

/// `n_nodes_bucket,training_set_size,match_fraction` rows.
pub fn match_csv(groups: &[(usize, MatchReport)], training_set_size: usize) -> String {
    let mut s = String::from("n_nodes_bucket,training_set_size,match_fraction\n");
    for (b, g) in groups {
        s.push_str(&format!("{b},{training_set_size},{}\n", fmt17(g.fraction())));
    }
    s
}

/// Anything that proposes a path for a routing problem.
pub trait Router {
    /// `None` when no path is proposed.
    fn route(&self, deployment: &Deployment, table: &LinkTable, problem: &RoutingProblem) -> Result<Option<Vec<usize>>>;
}

impl Router for NnRouter {
    fn route(&self, deployment: &Deployment, table: &LinkTable, problem: &RoutingProblem) -> Result<Option<Vec<usize>>> {
        Ok(nn_route_predict(self, deployment, table, problem)?.path.solution().map(|s| s.path.clone()))
    }
}

/// Wraps [`optimal_route`].
pub struct OracleRouter;

impl Router for OracleRouter {
    fn route(&self, _: &Deployment, table: &LinkTable, problem: &RoutingProblem) -> Result<Option<Vec<usize>>> {
        Ok(optimal_route(table, problem)?.solution().map(|s| s.path.clone()))
    }
}

/// Always the direct link.
pub struct DirectRouter;

impl Router for DirectRouter {
    fn route(&self, _: &Deployment, _: &LinkTable, problem: &RoutingProblem) -> Result<Option<Vec<usize>>> {
        Ok(Some(vec![problem.source, problem.dest]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub density: f64,
    pub problems: usize,
    /// Mean credited capacity of the router under test over the mean direct capacity.
    pub ml_gain: f64,
    /// Same ratio for the optimal routes.
    pub optimal_gain: f64,
}

/// Capacity gain over direct links, per deployment density.
///
/// A proposed path is credited with its bottleneck when it is a simple path
/// whose hops all meet the floor and it uses no more routers than the
/// optimum; otherwise the pair keeps its direct link. Under this rule the
/// router under test can never beat the optimum on any problem. Infeasible
/// problems are skipped.
pub fn eval_capacity_gain(router: &dyn Router, cases: &[(Deployment, LinkTable)], problems: &[Vec<RoutingProblem>]) -> Result<Vec<GainPoint>> {
    if cases.len() != problems.len() {
        return invalid("one problem list per deployment is required");
    }
    // density → (count, direct, ml, optimal)
    let mut acc: Vec<(f64, usize, f64, f64, f64)> = Vec::new();
    for ((dep, table), list) in cases.iter().zip(problems) {
        for p in list {
            let Some(opt) = optimal_route(table, p)?.solution().cloned() else { continue };
            let direct = table.capacity(p.source, p.dest);
            let credited = match router.route(dep, table, p)? {
                Some(path) if credit_ok(table, p, &path, opt.n_routers) => RoutingSolution::from_path(table, path).bottleneck_capacity,
                _ => direct,
            };
            let slot = match acc.iter().position(|a| a.0 == dep.density) {
                Some(i) => i,
                None => {
                    acc.push((dep.density, 0, 0.0, 0.0, 0.0));
                    acc.len() - 1
                }
            };
            let a = &mut acc[slot];
            a.1 += 1;
            a.2 += direct;
            a.3 += credited;
            a.4 += opt.bottleneck_capacity;
        }
    }
    acc.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(acc
        .into_iter()
        .filter(|a| a.1 > 0 && a.2 > 0.0)
        .map(|(density, problems, direct, ml, opt)| GainPoint { density, problems, ml_gain: ml / direct, optimal_gain: opt / direct })
        .collect())
}

fn credit_ok(table: &LinkTable, p: &RoutingProblem, path: &[usize], optimal_routers: usize) -> bool {
    let n = table.n_nodes();
    if path.len() < 2 || path[0] != p.source || *path.last().unwrap() != p.dest || path.len() - 2 > optimal_routers {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in path {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    path.windows(2).all(|w| table.capacity(w[0], w[1]) >= p.min_capacity)
}

/// `density,problems,ml_gain,optimal_gain` rows.
pub fn gain_csv(points: &[GainPoint]) -> String {
    let mut s = String::from("density,problems,ml_gain,optimal_gain\n");
    for g in points {
        s.push_str(&format!("{},{},{},{}\n", fmt17(g.density), g.problems, fmt17(g.ml_gain), fmt17(g.optimal_gain)));
    }
    s
}
