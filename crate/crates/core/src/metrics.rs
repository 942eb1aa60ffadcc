//! Confusion matrices and the accuracy metrics derived from them.
//!
//! Every metric is computed as an exact rational first and only converted to
//! `f64` at the edge, so worked examples compare with `==`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;

use crate::{Error, Result};

pub type Fraction = Ratio<u128>;

pub fn fraction_to_f64(r: &Fraction) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::dim("confusion matrix", (n, bad.len()), (n, n)));
        }
        Ok(ConfusionMatrix {
            n_classes: n,
            counts: rows.concat(),
        })
    }

    /// Builds a matrix from parallel truth/prediction slices.
    pub fn from_predictions(n_classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Length {
                op: "confusion matrix predictions",
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::new(n_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.n_classes || predicted >= self.n_classes {
            return Err(Error::Validation(format!(
                "class pair ({truth}, {predicted}) out of range for {} classes",
                self.n_classes
            )));
        }
        self.counts[truth * self.n_classes + predicted] += 1;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.n_classes.max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.n_classes).map(|p| self.get(c, p)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.n_classes).map(|t| self.get(t, c)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    /// Elementwise sum.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes != self.n_classes {
            return Err(Error::dim(
                "confusion matrix merge",
                (self.n_classes, self.n_classes),
                (other.n_classes, other.n_classes),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Applies the class relabeling `perm` to rows and columns together.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = ConfusionMatrix::new(self.n_classes);
        for t in 0..self.n_classes {
            for p in 0..self.n_classes {
                out.counts[perm[t] * self.n_classes + perm[p]] = self.get(t, p);
            }
        }
        out
    }

    fn present_classes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_classes).filter(|&c| self.row_sum(c) > 0)
    }
}

/// Overall accuracy, `trace / total`.
pub fn weighted_accuracy(cm: &ConfusionMatrix) -> Result<Fraction> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset("confusion matrix"));
    }
    Ok(Fraction::new(cm.trace().into(), total.into()))
}

/// Mean per-class recall over classes with at least one true instance.
pub fn unweighted_accuracy(cm: &ConfusionMatrix) -> Result<Fraction> {
    let recalls: Vec<Fraction> = cm
        .present_classes()
        .map(|c| Fraction::new(cm.get(c, c).into(), cm.row_sum(c).into()))
        .collect();
    if recalls.is_empty() {
        return Err(Error::EmptyDataset("confusion matrix"));
    }
    let n = recalls.len() as u128;
    Ok(recalls.into_iter().sum::<Fraction>() / n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FMeasure {
    /// F1 for every class; zero when the class is neither true nor predicted.
    pub per_class: Vec<Fraction>,
    /// Mean F1 over classes present in the truth.
    pub macro_f1: Fraction,
}

/// Per-class F1 `2·tp / (row + col)` (equal to `2PR/(P+R)`, zero when
/// `P + R = 0`) and the macro mean over classes present in the truth.
pub fn f_measure(cm: &ConfusionMatrix) -> Result<FMeasure> {
    if cm.total() == 0 {
        return Err(Error::EmptyDataset("confusion matrix"));
    }
    let per_class: Vec<Fraction> = (0..cm.n_classes())
        .map(|c| {
            let denom = u128::from(cm.row_sum(c) + cm.col_sum(c));
            if denom == 0 {
                Fraction::from_integer(0)
            } else {
                Fraction::new(2 * u128::from(cm.get(c, c)), denom)
            }
        })
        .collect();
    let present: Vec<usize> = cm.present_classes().collect();
    let macro_f1 = present.iter().map(|&c| per_class[c]).sum::<Fraction>() / present.len() as u128;
    Ok(FMeasure { per_class, macro_f1 })
}

/// All metrics as floats, for reports.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricSummary {
    pub wa: f64,
    pub ua: f64,
    pub per_class_f1: Vec<f64>,
    pub macro_f1: f64,
}

impl MetricSummary {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let f = f_measure(cm)?;
        Ok(MetricSummary {
            wa: fraction_to_f64(&weighted_accuracy(cm)?),
            ua: fraction_to_f64(&unweighted_accuracy(cm)?),
            per_class_f1: f.per_class.iter().map(fraction_to_f64).collect(),
            macro_f1: fraction_to_f64(&f.macro_f1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        let rows: Vec<Vec<u64>> = rows.iter().map(|r| r.to_vec()).collect();
        ConfusionMatrix::from_rows(&rows).unwrap()
    }

    fn frac(n: u128, d: u128) -> Fraction {
        Fraction::new(n, d)
    }

    #[test]
    fn weighted_accuracy_examples() {
        assert_eq!(
            weighted_accuracy(&cm(&[&[90, 10], &[5, 5]])).unwrap(),
            frac(95, 110)
        );
        assert_eq!(weighted_accuracy(&cm(&[&[9, 1], &[4, 6]])).unwrap(), frac(3, 4));
        assert_eq!(weighted_accuracy(&cm(&[&[3, 0], &[0, 8]])).unwrap(), frac(1, 1));
        assert!(weighted_accuracy(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn unweighted_accuracy_examples() {
        assert_eq!(
            unweighted_accuracy(&cm(&[&[90, 10], &[5, 5]])).unwrap(),
            frac(7, 10)
        );
        assert_eq!(
            unweighted_accuracy(&cm(&[&[10, 0], &[10, 0]])).unwrap(),
            frac(1, 2)
        );
        // A class with no true instances is left out of the mean.
        assert_eq!(
            unweighted_accuracy(&cm(&[&[4, 0, 0], &[0, 0, 0], &[1, 0, 1]])).unwrap(),
            frac(3, 4)
        );
        assert!(unweighted_accuracy(&ConfusionMatrix::new(2)).is_err());
    }

    #[test]
    fn balanced_rows_make_wa_equal_ua() {
        let m = cm(&[&[7, 2, 1], &[3, 5, 2], &[0, 1, 9]]);
        assert_eq!(weighted_accuracy(&m).unwrap(), unweighted_accuracy(&m).unwrap());
    }

    #[test]
    fn f_measure_examples() {
        let f = f_measure(&cm(&[&[5, 5], &[0, 10]])).unwrap();
        assert_eq!(f.per_class, vec![frac(2, 3), frac(4, 5)]);
        assert_eq!(f.macro_f1, frac(11, 15));
        assert!((fraction_to_f64(&f.macro_f1) - 0.7333).abs() < 1e-4);
        let diag = f_measure(&cm(&[&[4, 0], &[0, 6]])).unwrap();
        assert!(diag.per_class.iter().all(|v| *v == frac(1, 1)));
        // Class 2 is neither true nor predicted: F1 zero, excluded from the mean.
        let absent = f_measure(&cm(&[&[4, 0, 0], &[0, 6, 0], &[0, 0, 0]])).unwrap();
        assert_eq!(absent.per_class[2], frac(0, 1));
        assert_eq!(absent.macro_f1, frac(1, 1));
    }

    #[test]
    fn merge_sums_counts() {
        let mut a = cm(&[&[1, 2], &[3, 4]]);
        a.merge(&cm(&[&[10, 0], &[0, 10]])).unwrap();
        assert_eq!(a.rows(), vec![vec![11, 2], vec![3, 14]]);
        assert!(a.merge(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn summed_matrix_equals_pooled_predictions() {
        let truth = [0, 1, 2, 2, 1, 0, 0, 2];
        let pred = [0, 2, 2, 1, 1, 0, 1, 2];
        let pooled = ConfusionMatrix::from_predictions(3, &truth, &pred).unwrap();
        let mut summed = ConfusionMatrix::from_predictions(3, &truth[..3], &pred[..3]).unwrap();
        summed
            .merge(&ConfusionMatrix::from_predictions(3, &truth[3..], &pred[3..]).unwrap())
            .unwrap();
        assert_eq!(pooled, summed);
    }

    #[test]
    fn record_rejects_out_of_range() {
        let mut m = ConfusionMatrix::new(2);
        assert!(m.record(2, 0).is_err());
        assert!(ConfusionMatrix::from_rows(&[vec![1, 2], vec![3]]).is_err());
    }
}
