//! Unsupervised learning: k-means, self-organizing maps, agglomerative
//! clustering and PCA, plus cluster-quality scores.

mod hc;
mod kmeans;
mod noise;
mod pca;
mod som;

pub use hc::{hc_agglomerative, Dendrogram, Linkage, Merge};
pub use kmeans::{kmeans, nearest, KMeansModel, KMeansResult};
pub use noise::{noise_cluster, planted_noise_classes, NoiseClusterConfig, NoiseClusterResult};
pub use pca::{pca_fit, PcaModel};
pub use som::{som_assign, som_train, SomGrid};

use std::collections::BTreeMap;

use crate::io::csv_row;
use crate::tensor::{sq_dist, Tensor2};

/// Fraction of samples whose cluster's majority class equals their own.
pub fn purity(assignments: &[usize], labels: &[usize]) -> f64 {
    let mut table: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&c, &l) in assignments.iter().zip(labels) {
        *table.entry(c).or_default().entry(l).or_default() += 1;
    }
    let hits: usize = table.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    hits as f64 / assignments.len() as f64
}

fn centroids(data: &Tensor2, assignments: &[usize]) -> BTreeMap<usize, (Vec<f64>, usize)> {
    let mut acc: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for (r, &c) in data.iter_rows().zip(assignments) {
        let e = acc.entry(c).or_insert_with(|| (vec![0.0; data.cols()], 0));
        e.0.iter_mut().zip(r).for_each(|(s, v)| *s += v);
        e.1 += 1;
    }
    for (sum, n) in acc.values_mut() {
        sum.iter_mut().for_each(|s| *s /= *n as f64);
    }
    acc
}

/// Davies–Bouldin index over the non-empty clusters (lower is better);
/// infinite when fewer than two clusters are occupied.
pub fn davies_bouldin(data: &Tensor2, assignments: &[usize]) -> f64 {
    let cents = centroids(data, assignments);
    if cents.len() < 2 {
        return f64::INFINITY;
    }
    let mut scatter: BTreeMap<usize, f64> = BTreeMap::new();
    for (r, c) in data.iter_rows().zip(assignments) {
        *scatter.entry(*c).or_default() += sq_dist(r, &cents[c].0).sqrt();
    }
    let ids: Vec<usize> = cents.keys().copied().collect();
    let s: Vec<f64> = ids.iter().map(|c| scatter[c] / cents[c].1 as f64).collect();
    let mut total = 0.0;
    for (a, ca) in ids.iter().enumerate() {
        let worst = ids
            .iter()
            .enumerate()
            .filter(|(b, _)| *b != a)
            .map(|(b, cb)| (s[a] + s[b]) / sq_dist(&cents[ca].0, &cents[cb].0).sqrt())
            .fold(0.0, f64::max);
        total += worst;
    }
    total / ids.len() as f64
}

/// Grid shapes `(width, height)` scanned when choosing a map size.
pub const SOM_GRID_CANDIDATES: [(usize, usize); 5] = [(2, 1), (3, 1), (2, 2), (3, 2), (3, 3)];

#[derive(Debug, Clone, PartialEq)]
pub struct SomSelection {
    pub grid: SomGrid,
    pub assignments: Vec<usize>,
    /// `(width, height, davies_bouldin)` for every candidate, scan order.
    pub scores: Vec<(usize, usize, f64)>,
}

/// Trains every candidate shape and keeps the lowest Davies–Bouldin index
/// (first candidate on ties).
pub fn select_som(data: &Tensor2, epochs: usize, seed: u64) -> crate::Result<SomSelection> {
    let mut best: Option<(f64, SomGrid, Vec<usize>)> = None;
    let mut scores = Vec::new();
    for (w, h) in SOM_GRID_CANDIDATES {
        let g = som_train(data, w, h, epochs, crate::seed::derive(seed, &format!("som-{w}x{h}")))?;
        let a = som_assign(&g, data);
        let db = davies_bouldin(data, &a);
        scores.push((w, h, db));
        if best.as_ref().is_none_or(|b| db < b.0) {
            best = Some((db, g, a));
        }
    }
    let (_, grid, assignments) = best.unwrap();
    Ok(SomSelection { grid, assignments, scores })
}

/// `slot_index,cluster_id` rows.
pub fn assignments_csv(assignments: &[usize]) -> String {
    let mut out = String::from("slot_index,cluster_id\n");
    for (i, c) in assignments.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    out
}

/// Per-cluster count followed by the mean and standard deviation of each
/// feature, one row per occupied cluster.
pub fn cluster_summary_csv(data: &Tensor2, assignments: &[usize], names: &[&str]) -> String {
    let cents = centroids(data, assignments);
    let mut out = String::from("cluster_id,count");
    for n in names {
        out.push_str(&format!(",{n}_mean,{n}_std"));
    }
    out.push('\n');
    for (c, (mean, count)) in &cents {
        let mut var = vec![0.0; data.cols()];
        for (r, a) in data.iter_rows().zip(assignments) {
            if a == c {
                var.iter_mut().zip(r.iter().zip(mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2));
            }
        }
        let cells: Vec<f64> = mean
            .iter()
            .zip(&var)
            .flat_map(|(m, v)| [*m, (v / (*count as f64 - 1.0).max(1.0)).sqrt()])
            .collect();
        out.push_str(&format!("{c},{count},{}\n", csv_row(&cells)));
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    /// Isotropic Gaussian blobs with `per` points each, labels in blob order.
    pub fn blobs(centres: &[(f64, f64)], per: usize, sigma: f64, s: u64) -> (Tensor2, Vec<usize>) {
        let mut r = seed::rng(s);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (k, &(cx, cy)) in centres.iter().enumerate() {
            for _ in 0..per {
                data.push(cx + sigma * r.sample::<f64, _>(StandardNormal));
                data.push(cy + sigma * r.sample::<f64, _>(StandardNormal));
                labels.push(k);
            }
        }
        (Tensor2::from_vec(labels.len(), 2, data).unwrap(), labels)
    }

    #[test]
    fn purity_counts_majorities() {
        assert_eq!(purity(&[0, 0, 1, 1], &[5, 5, 6, 5]), 0.75);
        assert_eq!(purity(&[3, 3, 3], &[1, 1, 1]), 1.0);
    }

    #[test]
    fn davies_bouldin_prefers_the_planted_partition() {
        let (x, y) = blobs(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 30, 0.5, 1);
        let wrong: Vec<usize> = (0..90).map(|i| i % 3).collect();
        assert!(davies_bouldin(&x, &y) < davies_bouldin(&x, &wrong));
        assert_eq!(davies_bouldin(&x, &[0; 90]), f64::INFINITY);
    }

    #[test]
    fn som_selection_finds_three_blobs() {
        let (x, y) = blobs(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 30, 0.5, 2);
        let sel = select_som(&x, 30, 4).unwrap();
        assert_eq!(sel.scores.len(), SOM_GRID_CANDIDATES.len());
        assert!(purity(&sel.assignments, &y) >= 0.99);
    }

    #[test]
    fn csv_exports() {
        let x = Tensor2::from_rows(&[[1.0, 2.0], [3.0, 4.0], [10.0, 0.0]]).unwrap();
        let a = [0, 0, 1];
        assert_eq!(assignments_csv(&a), "slot_index,cluster_id\n0,0\n1,0\n2,1\n");
        let s = cluster_summary_csv(&x, &a, &["u", "v"]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "cluster_id,count,u_mean,u_std,v_mean,v_std");
        let cells: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells, vec![0.0, 2.0, 2.0, 2f64.sqrt(), 3.0, 2f64.sqrt()]);
    }
}
