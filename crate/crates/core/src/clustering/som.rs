use rand::seq::SliceRandom;

use crate::error::{invalid, Result};
use crate::seed;
use crate::tensor::Tensor2;

use super::kmeans::nearest;

/// Rectangular self-organizing map; unit `(i, j)` is row `i·width + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SomGrid {
    pub width: usize,
    pub height: usize,
    pub prototypes: Tensor2,
    pub trained_epochs: usize,
}

impl SomGrid {
    pub fn units(&self) -> usize {
        self.width * self.height
    }

    fn coords(&self, u: usize) -> (f64, f64) {
        ((u / self.width) as f64, (u % self.width) as f64)
    }
}

/// Online SOM training. Prototypes start at distinct random samples; each
/// epoch visits the samples in a fresh random order. The learning rate falls
/// linearly from 0.5 to 0.01 and the Gaussian neighbourhood radius from
/// `max(width, height)/2` to 0.5 over the run.
pub fn som_train(data: &Tensor2, width: usize, height: usize, epochs: usize, seed: u64) -> Result<SomGrid> {
    let units = width * height;
    if units < 1 || (units < 2 && data.rows() > 1) {
        return invalid("a map needs at least two units");
    }
    if data.rows() == 0 {
        return invalid("no training samples");
    }
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..data.rows()).collect();
    order.shuffle(&mut rng);
    let init: Vec<usize> = (0..units).map(|u| order[u % order.len()]).collect();
    let mut grid = SomGrid { width, height, prototypes: data.select_rows(&init), trained_epochs: 0 };
    let r0 = width.max(height) as f64 / 2.0;
    for e in 0..epochs {
        let frac = if epochs > 1 { e as f64 / (epochs - 1) as f64 } else { 1.0 };
        let alpha = 0.5 + (0.01 - 0.5) * frac;
        let radius = (r0 + (0.5 - r0) * frac).max(0.5);
        order.shuffle(&mut rng);
        for &i in &order {
            let x = data.row(i);
            let (bmu, _) = nearest(&grid.prototypes, x);
            let (bi, bj) = grid.coords(bmu);
            for u in 0..units {
                let (ui, uj) = grid.coords(u);
                let d2 = (ui - bi).powi(2) + (uj - bj).powi(2);
                let h = (-d2 / (2.0 * radius * radius)).exp();
                for (w, v) in grid.prototypes.row_mut(u).iter_mut().zip(x) {
                    *w += alpha * h * (v - *w);
                }
            }
        }
        grid.trained_epochs += 1;
    }
    Ok(grid)
}

/// Best-matching unit of every sample; ties go to the lower unit index.
pub fn som_assign(grid: &SomGrid, data: &Tensor2) -> Vec<usize> {
    data.iter_rows().map(|r| nearest(&grid.prototypes, r).0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::purity;
    use crate::clustering::tests::blobs;

    #[test]
    fn single_unit_converges_to_single_sample() {
        let x = Tensor2::from_rows(&[[3.0, -1.0]]).unwrap();
        let g = som_train(&x, 1, 1, 500, 0).unwrap();
        assert!(g.prototypes.row(0).iter().zip(x.row(0)).all(|(a, b)| (a - b).abs() < 1e-3));
    }

    #[test]
    fn separates_two_blobs() {
        let (x, y) = blobs(&[(0.0, 0.0), (8.0, 8.0)], 40, 0.5, 1);
        let g = som_train(&x, 2, 1, 30, 2).unwrap();
        assert_eq!(purity(&som_assign(&g, &x), &y), 1.0);
    }

    #[test]
    fn preserves_order_along_a_line() {
        let x = Tensor2::from_vec(200, 1, (0..200).map(|i| i as f64 / 20.0).collect()).unwrap();
        let g = som_train(&x, 5, 1, 60, 3).unwrap();
        let p = g.prototypes.column(0);
        let inc = p.windows(2).all(|w| w[1] > w[0]);
        let dec = p.windows(2).all(|w| w[1] < w[0]);
        assert!(inc || dec, "{p:?}");
    }

    #[test]
    fn assignment_rules() {
        let g = SomGrid { width: 2, height: 1, prototypes: Tensor2::from_rows(&[[0.0], [2.0]]).unwrap(), trained_epochs: 0 };
        let x = Tensor2::from_rows(&[[2.0], [1.0], [-5.0]]).unwrap();
        assert_eq!(som_assign(&g, &x), vec![1, 0, 0]);
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, _) = blobs(&[(0.0, 0.0), (3.0, 3.0), (6.0, 0.0)], 20, 1.0, 5);
        assert_eq!(som_train(&x, 3, 2, 10, 9).unwrap(), som_train(&x, 3, 2, 10, 9).unwrap());
    }
}
