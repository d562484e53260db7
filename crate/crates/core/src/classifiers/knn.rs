use crate::error::{invalid, Result};
use crate::tensor::{sq_dist, Tensor2};

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub points: Tensor2,
    pub labels: Vec<usize>,
    pub k: usize,
}

impl KnnModel {
    pub fn new(points: Tensor2, labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 || k % 2 == 0 {
            return invalid(format!("k must be odd, got {k}"));
        }
        if k > points.rows() || labels.len() != points.rows() {
            return invalid(format!("k = {k} exceeds {} points or labels mismatch", points.rows()));
        }
        Ok(Self { points, labels, k })
    }

    /// Majority label of the `k` nearest points. Equal distances rank the
    /// lower point index first; a tied vote goes to the tied class whose
    /// member ranks nearest.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut d: Vec<(f64, usize)> = self.points.iter_rows().map(|r| sq_dist(r, x)).zip(0..).collect();
        let k = self.k;
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut near = d[..k].to_vec();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: Vec<(usize, usize, usize)> = Vec::new(); // (label, count, first rank)
        for (rank, &(_, i)) in near.iter().enumerate() {
            let l = self.labels[i];
            match votes.iter_mut().find(|v| v.0 == l) {
                Some(v) => v.1 += 1,
                None => votes.push((l, 1, rank)),
            }
        }
        votes.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2))).unwrap().0
    }
}
