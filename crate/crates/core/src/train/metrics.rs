use serde::Serialize;

use crate::error::{Error, Result};

/// Counts indexed `[truth][prediction]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim("predictions", truth.len(), predicted.len()));
        }
        if truth.is_empty() {
            return Err(Error::validation("no predictions to score"));
        }
        let mut counts = vec![vec![0u64; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::validation(format!("label pair ({t}, {p}) out of range for {classes} classes")));
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Observed agreement `P0`.
    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }

    /// Chance agreement `Pe` from the row and column marginals.
    pub fn chance_agreement(&self) -> f64 {
        let n = self.total() as f64;
        (0..self.counts.len())
            .map(|k| {
                let row: u64 = self.counts[k].iter().sum();
                let col: u64 = self.counts.iter().map(|r| r[k]).sum();
                (row as f64 / n) * (col as f64 / n)
            })
            .sum()
    }

    pub fn kappa(&self) -> f64 {
        kappa_from_agreement(self.accuracy(), self.chance_agreement())
    }
}

/// `(P0 - Pe) / (1 - Pe)`, with perfect agreement scoring exactly 1.
pub fn kappa_from_agreement(p0: f64, pe: f64) -> f64 {
    if p0 == 1.0 {
        1.0
    } else {
        (p0 - pe) / (1.0 - pe)
    }
}

pub fn cohen_kappa(truth: &[usize], predicted: &[usize], classes: usize) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(truth, predicted, classes)?.kappa())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_pairs() {
        assert!((kappa_from_agreement(0.8411, 0.25) - 0.7881).abs() < 1e-4);
        assert!((kappa_from_agreement(0.8665, 0.5) - 0.7330).abs() < 1e-4);
    }

    #[test]
    fn perfect_and_chance() {
        let y = [0, 1, 2, 3, 0, 1];
        assert_eq!(cohen_kappa(&y, &y, 4).unwrap(), 1.0);
        let constant = [0; 6];
        let truth = [0, 0, 0, 1, 1, 1];
        let cm = ConfusionMatrix::from_predictions(&truth, &constant, 2).unwrap();
        assert_eq!(cm.accuracy(), 0.5);
        assert_eq!(cm.kappa(), 0.0);
    }

    #[test]
    fn hand_computed_marginals() {
        // counts [[2,1],[1,2]]: P0 = 4/6, Pe = 0.5
        let cm = ConfusionMatrix::from_predictions(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 0, 1, 1], 2).unwrap();
        assert_eq!(cm.counts(), &[vec![2, 1], vec![1, 2]]);
        assert!((cm.kappa() - (4.0 / 6.0 - 0.5) / 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_input() {
        assert!(cohen_kappa(&[0, 1], &[0], 2).is_err());
        assert!(cohen_kappa(&[0, 2], &[0, 1], 2).is_err());
        assert!(cohen_kappa(&[], &[], 2).is_err());
    }
}
