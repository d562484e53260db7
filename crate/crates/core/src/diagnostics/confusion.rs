use serde::{Deserialize, Serialize};

use super::AnomalyClass;
use crate::error::{invalid, Result};

/// Counts indexed `[true][predicted]` over a fixed class list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<AnomalyClass>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_pairs(classes: &[AnomalyClass], pairs: &[(AnomalyClass, AnomalyClass)]) -> Result<Self> {
        let k = classes.len();
        let mut counts = vec![vec![0; k]; k];
        for &(t, p) in pairs {
            let (Some(i), Some(j)) = (classes.iter().position(|c| *c == t), classes.iter().position(|c| *c == p)) else {
                return invalid(format!("label pair ({}, {}) outside the class list", t.index(), p.index()));
            };
            counts[i][j] += 1;
        }
        Ok(Self { classes: classes.to_vec(), counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let hit: usize = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        hit as f64 / self.total().max(1) as f64
    }

    /// Recall of each class; 0 for classes with no samples.
    pub fn per_class_accuracy(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: usize = row.iter().sum();
                if n == 0 {
                    0.0
                } else {
                    row[i] as f64 / n as f64
                }
            })
            .collect()
    }

    /// Folds the matrix onto `positive` versus everything else. Row and
    /// column 0 hold the negative group.
    pub fn collapse_binary(&self, positive: &[AnomalyClass]) -> [[usize; 2]; 2] {
        let mut out = [[0; 2]; 2];
        for (i, ci) in self.classes.iter().enumerate() {
            for (j, cj) in self.classes.iter().enumerate() {
                out[positive.contains(ci) as usize][positive.contains(cj) as usize] += self.counts[i][j];
            }
        }
        out
    }

    /// Unperturbed versus any anomaly.
    pub fn detection(&self) -> BinaryConfusion {
        let anomalies: Vec<AnomalyClass> = self.classes.iter().copied().filter(|c| *c != AnomalyClass::Unperturbed).collect();
        BinaryConfusion(self.collapse_binary(&anomalies))
    }

    /// Header `true\pred,<class ids>` then one row per true class.
    pub fn to_csv(&self) -> String {
        let ids: Vec<String> = self.classes.iter().map(|c| c.index().to_string()).collect();
        let mut s = format!("true\\pred,{}\n", ids.join(","));
        for (id, row) in ids.iter().zip(&self.counts) {
            let r: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{id},{}\n", r.join(",")));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryConfusion(pub [[usize; 2]; 2]);

impl BinaryConfusion {
    pub fn accuracy(&self) -> f64 {
        let m = self.0;
        let total = m[0][0] + m[0][1] + m[1][0] + m[1][1];
        (m[0][0] + m[1][1]) as f64 / total.max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AnomalyClass::*;

    #[test]
    fn counts_and_collapse() {
        let classes = AnomalyClass::ALL;
        let pairs = [
            (Unperturbed, Unperturbed),
            (Unperturbed, DistributedFault),
            (LoadImpedanceChange, ConcentratedFault),
            (ConcentratedFault, ConcentratedFault),
            (DistributedFault, Unperturbed),
        ];
        let m = ConfusionMatrix::from_pairs(&classes, &pairs).unwrap();
        assert_eq!(m.total(), 5);
        assert!((m.accuracy() - 0.4).abs() < 1e-12);
        assert_eq!(m.per_class_accuracy(), vec![0.5, 0.0, 1.0, 0.0]);
        let b = m.detection();
        assert_eq!(b.0, [[1, 1], [1, 2]]);
        assert!((b.accuracy() - 0.6).abs() < 1e-12);
        assert_eq!(m.to_csv().lines().nth(1).unwrap(), "1,1,0,0,1");
    }

    #[test]
    fn rejects_labels_outside_the_list() {
        assert!(ConfusionMatrix::from_pairs(&[Unperturbed, ConcentratedFault], &[(Unperturbed, DistributedFault)]).is_err());
    }
}
