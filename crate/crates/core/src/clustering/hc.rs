use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::{sq_dist, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

/// Merge `k` joins clusters `a < b`; leaves are `0..n_leaves` and the cluster
/// formed by merge `k` is `n_leaves + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub n_leaves: usize,
}

/// Agglomerative clustering with Lance–Williams distance updates. Among equal
/// distances the pair with the smallest (first, second) active position merges.
pub fn hc_agglomerative(data: &Tensor2, linkage: Linkage) -> Result<Dendrogram> {
    let n = data.rows();
    if n < 2 {
        return invalid("need at least two points");
    }
    let mut d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| sq_dist(data.row(i), data.row(j)).sqrt()).collect()).collect();
    // active slot -> (cluster id, size)
    let mut active: Vec<Option<(usize, usize)>> = (0..n).map(|i| Some((i, 1))).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if active[i].is_none() {
                continue;
            }
            for j in i + 1..n {
                if active[j].is_some() && d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (i, j, dist) = best;
        let (ci, si) = active[i].unwrap();
        let (cj, sj) = active[j].unwrap();
        merges.push(Merge { a: ci.min(cj), b: ci.max(cj), distance: dist });
        for k in 0..n {
            if k == i || k == j || active[k].is_none() {
                continue;
            }
            let v = match linkage {
                Linkage::Single => d[i][k].min(d[j][k]),
                Linkage::Complete => d[i][k].max(d[j][k]),
                Linkage::Average => (si as f64 * d[i][k] + sj as f64 * d[j][k]) / (si + sj) as f64,
            };
            d[i][k] = v;
            d[k][i] = v;
        }
        active[i] = Some((n + step, si + sj));
        active[j] = None;
    }
    Ok(Dendrogram { merges, n_leaves: n })
}

impl Dendrogram {
    /// Flat labels after undoing the last `k − 1` merges. Labels are numbered
    /// by the lowest leaf they contain.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return invalid(format!("cannot cut {n} leaves into {k} clusters"));
        }
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (s, m) in self.merges.iter().take(n - k).enumerate() {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[ra] = n + s;
            parent[rb] = n + s;
        }
        let mut label_of_root = std::collections::HashMap::new();
        Ok((0..n)
            .map(|i| {
                let r = find(&mut parent, i);
                let next = label_of_root.len();
                *label_of_root.entry(r).or_insert(next)
            })
            .collect())
    }
}
