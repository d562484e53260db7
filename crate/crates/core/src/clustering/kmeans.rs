use rand::Rng as _;

use crate::error::{invalid, Result};
use crate::seed;
use crate::tensor::{sq_dist, Tensor2};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Tensor2,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub model: KMeansModel,
    pub assignments: Vec<usize>,
    /// Inertia after every assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

/// Index of the nearest row of `centroids`; ties go to the lower index.
pub fn nearest(centroids: &Tensor2, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter_rows().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus(data: &Tensor2, k: usize, rng: &mut seed::Rng) -> Tensor2 {
    let n = data.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = data.iter_rows().map(|r| sq_dist(r, data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            // all remaining points coincide with a centre
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, r) in data.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, data.row(next)));
        }
    }
    data.select_rows(&chosen)
}

/// k-means++ seeding followed by Lloyd iterations until the assignments stop
/// changing or `max_iters` is reached. An emptied cluster is re-seeded at the
/// point farthest from its current centroid.
pub fn kmeans(data: &Tensor2, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    let (n, dim) = data.shape();
    if k == 0 || k > n {
        return invalid(format!("k = {k} must lie in 1..={n}"));
    }
    let mut rng = seed::rng(seed);
    let mut centroids = plus_plus(data, k, &mut rng);
    let mut assign = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, r) in data.iter_rows().enumerate() {
            let (c, d) = nearest(&centroids, r);
            dists[i] = d;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        history.push(dists.iter().sum());
        if !changed || iterations == max_iters {
            break;
        }
        iterations += 1;
        let mut sums = Tensor2::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, r) in data.iter_rows().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums.row_mut(assign[i]).iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / cnt;
                }
            } else {
                let far = (0..n).max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a))).unwrap();
                centroids.row_mut(c).copy_from_slice(data.row(far));
                dists[far] = 0.0;
            }
        }
    }
    let inertia = *history.last().unwrap();
    Ok(KMeansResult { model: KMeansModel { centroids, inertia }, assignments: assign, inertia_history: history, iterations })
}
