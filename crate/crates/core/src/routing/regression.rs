use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::fmt17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitySample {
    /// Nodes per km².
    pub density: f64,
    /// Cable-path distance between the endpoints, m.
    pub distance: f64,
    /// bit/s.
    pub capacity: f64,
}

/// Local-mean capacity over a rectangular (density, distance) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySurface {
    pub density_range: (f64, f64),
    pub distance_range: (f64, f64),
    pub density_bins: usize,
    pub distance_bins: usize,
    /// Row-major `[density][distance]`; `None` where no sample fell.
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
    pub count: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    pub capacity: f64,
    /// The query fell outside the sampled support; the value is borrowed
    /// from the nearest populated cell.
    pub extrapolated: bool,
}

fn bin(v: f64, range: (f64, f64), bins: usize) -> Option<usize> {
    if !(v >= range.0 && v <= range.1) {
        return None;
    }
    let w = (range.1 - range.0) / bins as f64;
    if w == 0.0 {
        return Some(0);
    }
    Some((((v - range.0) / w) as usize).min(bins - 1))
}

/// Bins the samples on a `density_bins × distance_bins` grid spanning their
/// bounding box and keeps the mean and standard deviation of each cell.
pub fn capacity_regression(samples: &[CapacitySample], density_bins: usize, distance_bins: usize) -> Result<CapacitySurface> {
    if samples.len() < 50 {
        return invalid(format!("capacity regression needs at least 50 samples, got {}", samples.len()));
    }
    if density_bins == 0 || distance_bins == 0 {
        return invalid("regression grid needs at least one bin per axis");
    }
    if samples.iter().any(|s| !(s.density.is_finite() && s.distance.is_finite() && s.capacity.is_finite())) {
        return invalid("capacity samples must be finite");
    }
    let span = |f: fn(&CapacitySample) -> f64| {
        samples.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let density_range = span(|s| s.density);
    let distance_range = span(|s| s.distance);
    let cells = density_bins * distance_bins;
    let mut sum = vec![0.0; cells];
    let mut sum2 = vec![0.0; cells];
    let mut count = vec![0usize; cells];
    for s in samples {
        let i = bin(s.density, density_range, density_bins).unwrap();
        let j = bin(s.distance, distance_range, distance_bins).unwrap();
        let c = i * distance_bins + j;
        sum[c] += s.capacity;
        sum2[c] += s.capacity * s.capacity;
        count[c] += 1;
    }
    let mean: Vec<Option<f64>> = (0..cells).map(|c| (count[c] > 0).then(|| sum[c] / count[c] as f64)).collect();
    let std = (0..cells)
        .map(|c| {
            mean[c].map(|m| {
                let k = count[c] as f64;
                (sum2[c] / k - m * m).max(0.0).sqrt()
            })
        })
        .collect();
    Ok(CapacitySurface { density_range, distance_range, density_bins, distance_bins, mean, std, count })
}

impl CapacitySurface {
    fn centre(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) / self.density_bins as f64, (j as f64 + 0.5) / self.distance_bins as f64)
    }

    fn unit(v: f64, range: (f64, f64)) -> f64 {
        if range.1 > range.0 {
            (v - range.0) / (range.1 - range.0)
        } else {
            0.5
        }
    }

    pub fn query(&self, density: f64, distance: f64) -> CapacityEstimate {
        let cell = bin(density, self.density_range, self.density_bins)
            .zip(bin(distance, self.distance_range, self.distance_bins))
            .map(|(i, j)| i * self.distance_bins + j);
        if let Some(m) = cell.and_then(|c| self.mean[c]) {
            return CapacityEstimate { capacity: m, extrapolated: false };
        }
        let q = (Self::unit(density, self.density_range), Self::unit(distance, self.distance_range));
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..self.density_bins {
            for j in 0..self.distance_bins {
                if let Some(m) = self.mean[i * self.distance_bins + j] {
                    let c = self.centre(i, j);
                    let d = (c.0 - q.0).powi(2) + (c.1 - q.1).powi(2);
                    if d < best.0 {
                        best = (d, m);
                    }
                }
            }
        }
        CapacityEstimate { capacity: best.1, extrapolated: true }
    }

    /// One row per cell: `density,distance,mean_capacity,std_capacity,count`
    /// at the cell centre. Empty cells leave the statistics blank.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("density,distance,mean_capacity,std_capacity,count\n");
        for i in 0..self.density_bins {
            for j in 0..self.distance_bins {
                let (u, v) = self.centre(i, j);
                let d = self.density_range.0 + u * (self.density_range.1 - self.density_range.0);
                let r = self.distance_range.0 + v * (self.distance_range.1 - self.distance_range.0);
                let c = i * self.distance_bins + j;
                let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
                s.push_str(&format!("{},{},{},{},{}\n", fmt17(d), fmt17(r), opt(self.mean[c]), opt(self.std[c]), self.count[c]));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn grid_samples(f: impl Fn(f64, f64) -> f64) -> Vec<CapacitySample> {
        let mut rng = seed::rng(3);
        (0..400)
            .map(|_| {
                let density = rng.random_range(10.0..200.0);
                let distance = rng.random_range(0.0..2000.0);
                CapacitySample { density, distance, capacity: f(density, distance) }
            })
            .collect()
    }

    #[test]
    fn constant_samples_give_a_constant_surface() {
        let s = capacity_regression(&grid_samples(|_, _| 7e8), 5, 5).unwrap();
        assert!(s.mean.iter().flatten().all(|&m| m == 7e8));
        assert_eq!(s.query(100.0, 1000.0).capacity, 7e8);
    }

    #[test]
    fn queries_at_sample_points_stay_within_local_spread() {
        let samples = grid_samples(|d, r| 1e9 - 2e5 * r - 1e6 * d);
        let s = capacity_regression(&samples, 6, 6).unwrap();
        for p in samples.iter().step_by(37) {
            let e = s.query(p.density, p.distance);
            let i = bin(p.density, s.density_range, 6).unwrap();
            let j = bin(p.distance, s.distance_range, 6).unwrap();
            let sd = s.std[i * 6 + j].unwrap();
            assert!(!e.extrapolated);
            assert!((e.capacity - p.capacity).abs() <= 2.0 * sd + 1e-6, "{e:?} vs {p:?} sd {sd}");
        }
    }

    #[test]
    fn dense_cells_recover_the_local_level_within_one_std() {
        let mut rng = seed::rng(8);
        let noise = rand_distr::Normal::new(0.0, 2e7).unwrap();
        let level = |d: f64, r: f64| if r < 1000.0 { 6e8 } else if d < 100.0 { 4e8 } else { 2e8 };
        let samples: Vec<_> = (0..2000)
            .map(|_| {
                let density = rng.random_range(10.0..190.0);
                let distance = rng.random_range(0.0..2000.0);
                let capacity = level(density, distance) + rand_distr::Distribution::sample(&noise, &mut rng);
                CapacitySample { density, distance, capacity }
            })
            .collect();
        let s = capacity_regression(&samples, 4, 4).unwrap();
        for p in samples.iter().step_by(41) {
            let i = bin(p.density, s.density_range, 4).unwrap();
            let j = bin(p.distance, s.distance_range, 4).unwrap();
            let sd = s.std[i * 4 + j].unwrap();
            assert!((s.query(p.density, p.distance).capacity - level(p.density, p.distance)).abs() <= sd);
        }
    }

    #[test]
    fn unsupported_corner_is_flagged() {
        // low densities never reach long distances
        let samples: Vec<_> = grid_samples(|_, _| 1.0)
            .into_iter()
            .filter(|s| !(s.density < 60.0 && s.distance > 1200.0))
            .collect();
        let s = capacity_regression(&samples, 5, 5).unwrap();
        assert!(s.query(15.0, 1900.0).extrapolated);
        assert!(!s.query(150.0, 1900.0).extrapolated);
        assert!(s.query(1e4, 10.0).extrapolated);
    }

    #[test]
    fn needs_fifty_samples() {
        let few = vec![CapacitySample { density: 1.0, distance: 1.0, capacity: 1.0 }; 49];
        assert!(capacity_regression(&few, 2, 2).is_err());
    }
}
