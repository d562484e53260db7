use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// D×M, columns are unit eigenvectors of the sample covariance.
    pub components: Tensor2,
    /// Descending, length M.
    pub eigenvalues: Vec<f64>,
}

/// Top-`m` principal directions of the `1/(N−1)` sample covariance. Each
/// component's largest-magnitude entry is made positive so the result does
/// not depend on the eigensolver's sign choice.
pub fn pca_fit(data: &Tensor2, m: usize) -> Result<PcaModel> {
    let (n, d) = data.shape();
    if m == 0 || m > d {
        return invalid(format!("cannot keep {m} of {d} components"));
    }
    if n < 2 {
        return invalid("need at least two samples");
    }
    let mean = data.column_means();
    let centred = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Tensor2::zeros(d, m);
    let mut eigenvalues = Vec::with_capacity(m);
    for (c, &k) in order.iter().take(m).enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            components.row_mut(r)[c] = sign * v[r];
        }
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel { mean, components, eigenvalues })
}

impl PcaModel {
    /// Scores `(x − mean)·W`.
    pub fn transform(&self, data: &Tensor2) -> Result<Tensor2> {
        let mut c = data.clone();
        for i in 0..c.rows() {
            for (v, m) in c.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        c.matmul(&self.components)
    }

    /// `mean + scores·Wᵀ`.
    pub fn reconstruct(&self, scores: &Tensor2) -> Result<Tensor2> {
        let mut r = scores.matmul_t(&self.components)?;
        for i in 0..r.rows() {
            for (v, m) in r.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn correlated(n: usize, d: usize, s: u64) -> Tensor2 {
        let mut r = seed::rng(s);
        let mix: Vec<f64> = (0..d * d).map(|_| r.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..n * d).map(|_| r.sample(StandardNormal)).collect();
        let z = Tensor2::from_vec(n, d, z).unwrap();
        let mut x = z.matmul(&Tensor2::from_vec(d, d, mix).unwrap()).unwrap();
        for i in 0..n {
            x.row_mut(i)[0] += 3.0;
        }
        x
    }

    #[test]
    fn line_through_origin_reconstructs_exactly() {
        let x = Tensor2::from_vec(5, 2, (0..5).flat_map(|i| [i as f64, 2.0 * i as f64]).collect()).unwrap();
        let p = pca_fit(&x, 1).unwrap();
        let rec = p.reconstruct(&p.transform(&x).unwrap()).unwrap();
        assert!(rec.data().iter().zip(x.data()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn reconstruction_error_equals_discarded_mass() {
        let x = correlated(200, 6, 1);
        let full = pca_fit(&x, 6).unwrap();
        for m in 1..6 {
            let p = pca_fit(&x, m).unwrap();
            let rec = p.reconstruct(&p.transform(&x).unwrap()).unwrap();
            let err: f64 = rec.data().iter().zip(x.data()).map(|(a, b)| (a - b).powi(2)).sum();
            let expect = full.eigenvalues[m..].iter().sum::<f64>() * 199.0;
            assert!((err - expect).abs() <= 1e-6 * expect, "{err} vs {expect}");
        }
    }

    #[test]
    fn components_are_orthonormal_and_scores_uncorrelated() {
        let x = correlated(300, 5, 2);
        let p = pca_fit(&x, 4).unwrap();
        let g = p.components.t_matmul(&p.components).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let s = p.transform(&x).unwrap();
        let cov = s.t_matmul(&s).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(cov[(i, j)].abs() / 299.0 <= 1e-8 * p.eigenvalues[0]);
                }
            }
        }
    }

    #[test]
    fn mean_maps_to_zero_scores() {
        let x = correlated(50, 3, 3);
        let p = pca_fit(&x, 2).unwrap();
        let m = Tensor2::from_rows(&[p.mean.clone()]).unwrap();
        assert!(p.transform(&m).unwrap().data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rank_deficient_data_pads_with_zero_eigenvalues() {
        let x = Tensor2::from_vec(4, 3, (0..4).flat_map(|i| [i as f64, 0.0, 0.0]).collect()).unwrap();
        let p = pca_fit(&x, 3).unwrap();
        assert_eq!(&p.eigenvalues[1..], &[0.0, 0.0]);
        let g = p.components.t_matmul(&p.components).unwrap();
        assert!((g[(2, 2)] - 1.0).abs() < 1e-12);
    }
}
