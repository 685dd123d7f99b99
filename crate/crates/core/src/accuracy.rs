//! Confusion matrices and the producer's/user's/overall accuracy and kappa metrics.
//!
//! Orientation: rows are the reference (ground-truth) class, columns the
//! classified class. Row sums are reference totals, column sums classified
//! totals. The transposed convention is also common; do not mix them.

use crate::error::{Error, Result};
use crate::raster::ClassLegend;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: ClassLegend,
    /// Row-major K x K.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    /// Wraps explicit counts given as `rows[reference][classified]` in legend order.
    pub fn from_counts(classes: ClassLegend, rows: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Validation(format!("confusion matrix must be {k}x{k}")));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn classes(&self) -> &ClassLegend {
        &self.classes
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    /// Count of samples with reference position `r` and classified position `c`.
    pub fn count(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.k() + c]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k()).map(<[u64]>::to_vec).collect()
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.count(i, i)).sum()
    }

    /// Reference total per class.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.k()).map(|r| r.iter().sum()).collect()
    }

    /// Classified total per class.
    pub fn col_sums(&self) -> Vec<u64> {
        let k = self.k();
        (0..k).map(|c| (0..k).map(|r| self.count(r, c)).sum()).collect()
    }

    fn position(&self, class_id: u8) -> Result<usize> {
        self.classes
            .index_of(class_id)
            .ok_or_else(|| Error::Validation(format!("class {class_id} is not in the matrix")))
    }

    fn nonempty(&self) -> Result<f64> {
        match self.grand_total() {
            0 => Err(Error::Metric("confusion matrix is empty".into())),
            n => Ok(n as f64),
        }
    }

    /// Diagonal over grand total.
    pub fn overall_accuracy(&self) -> Result<f64> {
        let n = self.nonempty()?;
        Ok(self.trace() as f64 / n)
    }

    /// Correct over reference total for `class_id` (omission complement).
    pub fn producers_accuracy(&self, class_id: u8) -> Result<f64> {
        let p = self.position(class_id)?;
        match self.row_sums()[p] {
            0 => Err(Error::Metric(format!("class {class_id} has no reference samples"))),
            n => Ok(self.count(p, p) as f64 / n as f64),
        }
    }

    /// Correct over classified total for `class_id` (commission complement).
    pub fn users_accuracy(&self, class_id: u8) -> Result<f64> {
        let p = self.position(class_id)?;
        match self.col_sums()[p] {
            0 => Err(Error::Metric(format!("class {class_id} was never predicted"))),
            n => Ok(self.count(p, p) as f64 / n as f64),
        }
    }

    /// Cohen's kappa, `(p_o - p_e) / (1 - p_e)`.
    pub fn kappa(&self) -> Result<f64> {
        let n = self.nonempty()?;
        let p_o = self.trace() as f64 / n;
        let chance: u128 = self
            .row_sums()
            .iter()
            .zip(self.col_sums())
            .map(|(&r, c)| r as u128 * c as u128)
            .sum();
        let n2 = (self.grand_total() as u128).pow(2);
        if chance == n2 {
            return Err(Error::Metric("kappa undefined: chance agreement is 1".into()));
        }
        let p_e = chance as f64 / n2 as f64;
        Ok((p_o - p_e) / (1.0 - p_e))
    }

    /// Per-class rows in legend order, as shown in an accuracy table.
    pub fn class_summaries(&self) -> Vec<ClassAccuracy> {
        let rows = self.row_sums();
        let cols = self.col_sums();
        self.classes
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| ClassAccuracy {
                class_id: e.id,
                name: e.name.clone(),
                reference_total: rows[i],
                classified_total: cols[i],
                correct: self.count(i, i),
            })
            .collect()
    }
}

/// One class's line of an accuracy table, as exact counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAccuracy {
    pub class_id: u8,
    pub name: String,
    pub reference_total: u64,
    pub classified_total: u64,
    pub correct: u64,
}

impl ClassAccuracy {
    pub fn producer_pct(&self) -> Option<u64> {
        percent_half_up(self.correct, self.reference_total)
    }

    pub fn user_pct(&self) -> Option<u64> {
        percent_half_up(self.correct, self.classified_total)
    }
}

/// `100 * num / den` rounded half up to an integer, in exact integer arithmetic.
pub fn percent_half_up(num: u64, den: u64) -> Option<u64> {
    if den == 0 {
        return None;
    }
    let (num, den) = (num as u128, den as u128);
    Some(((200 * num + den) / (2 * den)) as u64)
}

/// Tallies paired reference and predicted labels.
pub fn confusion_matrix(reference: &[u8], predicted: &[u8], legend: &ClassLegend) -> Result<ConfusionMatrix> {
    if reference.len() != predicted.len() {
        return Err(Error::Validation(format!(
            "{} reference labels but {} predictions",
            reference.len(),
            predicted.len()
        )));
    }
    let k = legend.len();
    let table = legend.position_table();
    let mut counts = vec![0u64; k * k];
    for (i, (&r, &p)) in reference.iter().zip(predicted).enumerate() {
        let (Some(ri), Some(pi)) = (table[r as usize], table[p as usize]) else {
            return Err(Error::Validation(format!(
                "pair {i} ({r}, {p}) uses a class outside the legend"
            )));
        };
        counts[ri * k + pi] += 1;
    }
    Ok(ConfusionMatrix {
        classes: legend.clone(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> ClassLegend {
        ClassLegend::new(vec![(1, "A".into()), (2, "B".into())]).unwrap()
    }

    #[test]
    fn perfect_single_class() {
        let l = ClassLegend::canonical();
        let cm = confusion_matrix(&[3; 10], &[3; 10], &l).unwrap();
        assert_eq!(cm.count(2, 2), 10);
        assert_eq!(cm.grand_total(), 10);
        assert_eq!(cm.overall_accuracy().unwrap(), 1.0);
        assert_eq!(cm.producers_accuracy(3).unwrap(), 1.0);
        assert_eq!(cm.users_accuracy(3).unwrap(), 1.0);
        assert!(matches!(cm.producers_accuracy(1), Err(Error::Metric(_))));
        assert!(matches!(cm.users_accuracy(1), Err(Error::Metric(_))));
        // all mass in one cell: p_e = 1
        assert!(matches!(cm.kappa(), Err(Error::Metric(_))));
    }

    #[test]
    fn empty_lists_accepted_but_metrics_fail() {
        let cm = confusion_matrix(&[], &[], &two()).unwrap();
        assert_eq!(cm.grand_total(), 0);
        assert!(matches!(cm.overall_accuracy(), Err(Error::Metric(_))));
        assert!(matches!(cm.kappa(), Err(Error::Metric(_))));
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            confusion_matrix(&[1], &[1, 2], &two()),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            confusion_matrix(&[1], &[7], &two()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn off_diagonal_only() {
        let cm = confusion_matrix(&[1], &[2], &two()).unwrap();
        assert_eq!(cm.overall_accuracy().unwrap(), 0.0);
    }

    #[test]
    fn kappa_perfect_and_chance() {
        let cm = ConfusionMatrix::from_counts(two(), vec![vec![5, 0], vec![0, 5]]).unwrap();
        assert_eq!(cm.kappa().unwrap(), 1.0);
        // rows proportional to column marginals (0.25, 0.75)
        let cm = ConfusionMatrix::from_counts(two(), vec![vec![1, 3], vec![2, 6]]).unwrap();
        assert!(cm.kappa().unwrap().abs() < 1e-15);
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent_half_up(98, 101), Some(97));
        assert_eq!(percent_half_up(1, 200), Some(1)); // 0.5 -> 1
        assert_eq!(percent_half_up(1, 400), Some(0)); // 0.25
        assert_eq!(percent_half_up(579, 600), Some(97)); // 96.5
        assert_eq!(percent_half_up(1, 0), None);
    }
}
