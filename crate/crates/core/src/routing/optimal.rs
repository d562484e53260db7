use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::link::LinkTable;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutingProblem {
    pub source: usize,
    pub dest: usize,
    /// Capacity a hop needs to count as a working link, bit/s.
    pub min_capacity: f64,
}

impl RoutingProblem {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if self.source >= n_nodes || self.dest >= n_nodes {
            return invalid(format!("route {}→{} outside {n_nodes} nodes", self.source, self.dest));
        }
        if self.source == self.dest {
            return invalid("source and destination must differ");
        }
        if !(self.min_capacity >= 0.0) {
            return invalid("min_capacity must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSolution {
    pub path: Vec<usize>,
    /// Intermediate relays, `path.len() − 2`.
    pub n_routers: usize,
    /// Smallest hop capacity along the path, bit/s.
    pub bottleneck_capacity: f64,
}

impl RoutingSolution {
    pub fn from_path(table: &LinkTable, path: Vec<usize>) -> Self {
        let bottleneck = path.windows(2).map(|w| table.capacity(w[0], w[1])).fold(f64::INFINITY, f64::min);
        Self { n_routers: path.len().saturating_sub(2), bottleneck_capacity: bottleneck, path }
    }

    /// Dash-joined node ids.
    pub fn path_label(&self) -> String {
        self.path.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouteOutcome {
    Routed(RoutingSolution),
    /// No sequence of working hops connects the endpoints.
    Infeasible,
}

impl RouteOutcome {
    pub fn solution(&self) -> Option<&RoutingSolution> {
        match self {
            RouteOutcome::Routed(s) => Some(s),
            RouteOutcome::Infeasible => None,
        }
    }
}

fn hop_counts(table: &LinkTable, from: usize, min_capacity: f64, reverse: bool) -> Vec<usize> {
    let n = table.n_nodes();
    let mut dist = vec![usize::MAX; n];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for w in 0..n {
            let c = if reverse { table.capacity(w, v) } else { table.capacity(v, w) };
            if w != v && dist[w] == usize::MAX && c >= min_capacity {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Fewest routers, then the largest bottleneck, then the lexicographically
/// smallest node sequence.
///
/// Breadth-first search from both ends isolates the nodes that lie on some
/// minimum-hop path. On that layered graph the best achievable bottleneck
/// from every node to the destination follows by dynamic programming, and
/// walking forward while always taking the lowest admissible id yields the
/// lexicographic winner among the paths that attain it.
pub fn optimal_route(table: &LinkTable, problem: &RoutingProblem) -> Result<RouteOutcome> {
    let n = table.n_nodes();
    problem.validate(n)?;
    let (s, d, t) = (problem.source, problem.dest, problem.min_capacity);
    let from_s = hop_counts(table, s, t, false);
    if from_s[d] == usize::MAX {
        return Ok(RouteOutcome::Infeasible);
    }
    let hops = from_s[d];
    let to_d = hop_counts(table, d, t, true);
    let on_path = |v: usize| from_s[v] != usize::MAX && to_d[v] != usize::MAX && from_s[v] + to_d[v] == hops;
    let step = |v: usize, w: usize| on_path(w) && from_s[w] == from_s[v] + 1 && table.capacity(v, w) >= t;

    let mut layers: Vec<Vec<usize>> = vec![Vec::new(); hops + 1];
    for v in (0..n).filter(|&v| on_path(v)) {
        layers[from_s[v]].push(v);
    }
    let mut best = vec![f64::NEG_INFINITY; n];
    best[d] = f64::INFINITY;
    for layer in layers[..hops].iter().rev() {
        for &v in layer {
            best[v] = layers[from_s[v] + 1]
                .iter()
                .filter(|&&w| step(v, w))
                .map(|&w| table.capacity(v, w).min(best[w]))
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let target = best[s];
    let mut path = vec![s];
    let mut v = s;
    while v != d {
        // layers are built in increasing id order
        v = *layers[from_s[v] + 1]
            .iter()
            .find(|&&w| step(v, w) && table.capacity(v, w) >= target && best[w] >= target)
            .expect("a successor attaining the bottleneck exists");
        path.push(v);
    }
    Ok(RouteOutcome::Routed(RoutingSolution::from_path(table, path)))
}

/// Every simple path `source → dest` whose hops all meet the capacity floor.
/// Exponential; intended for small instances only.
pub fn enumerate_routes(table: &LinkTable, problem: &RoutingProblem) -> Result<Vec<Vec<usize>>> {
    let n = table.n_nodes();
    problem.validate(n)?;
    let mut out = Vec::new();
    let mut path = vec![problem.source];
    let mut used = vec![false; n];
    used[problem.source] = true;
    fn walk(table: &LinkTable, p: &RoutingProblem, path: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == p.dest {
            out.push(path.clone());
            return;
        }
        for w in 0..table.n_nodes() {
            if !used[w] && table.capacity(v, w) >= p.min_capacity {
                used[w] = true;
                path.push(w);
                walk(table, p, path, used, out);
                path.pop();
                used[w] = false;
            }
        }
    }
    walk(table, problem, &mut path, &mut used, &mut out);
    Ok(out)
}
