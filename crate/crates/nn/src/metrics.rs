use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Classification metrics. `confusion[t][p]` counts items of true class `t`
/// predicted as `p`; precision, recall and F1 are macro averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub averaging: String,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    #[serde(rename = "macroF1")]
    pub macro_f1: f64,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `num / den`, or zero when `den` is zero.
fn exact(num: u64, den: u64) -> BigRational {
    if den == 0 {
        BigRational::zero()
    } else {
        BigRational::new(num.into(), den.into())
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("metric fractions lie in [0, 1]")
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl MetricsReport {
    /// Per-class and macro values are computed as exact fractions of the
    /// counts and rounded to `f64` once, so hand-computed fractions such as
    /// 5/6 match to the last bit.
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let k = confusion.len();
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let mut sums = [BigRational::zero(), BigRational::zero(), BigRational::zero()];
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
                let support: u64 = confusion[c].iter().sum();
                // F1 = 2PR/(P+R) = 2tp/(predicted + support)
                let fracs = [exact(tp, predicted), exact(tp, support), exact(2 * tp, predicted + support)];
                for (s, f) in sums.iter_mut().zip(&fracs) {
                    *s += f;
                }
                let [precision, recall, f1] = fracs.map(|f| to_f64(&f));
                ClassMetrics { precision, recall, f1, support }
            })
            .collect();
        let [macro_precision, macro_recall, macro_f1] =
            sums.map(|s| if k == 0 { 0.0 } else { to_f64(&(s / BigInt::from(k))) });
        MetricsReport {
            averaging: "macro".into(),
            accuracy: ratio(trace, total),
            macro_precision,
            macro_recall,
            macro_f1,
            per_class,
            confusion,
        }
    }

    /// From `(true, predicted)` label pairs over `k` classes.
    pub fn from_predictions(k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut confusion = vec![vec![0u64; k]; k];
        for (t, p) in pairs {
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}
