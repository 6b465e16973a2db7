//! Agreement between a reference partition and an estimate.

use serde::{Deserialize, Serialize};

use crate::error::{CodError, Result};
use crate::partition::Partition;

/// Adjusted Rand index together with a flag for the 0/0 case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AriScore {
    pub value: f64,
    /// The chance-corrected denominator vanished (both partitions trivial);
    /// `value` is then 1 for equal partitions and 0 otherwise.
    pub degenerate: bool,
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

fn check_lengths(truth: &Partition, est: &Partition) -> Result<()> {
    if truth.len() != est.len() {
        return Err(CodError::arg(format!(
            "partition lengths differ: {} vs {}",
            truth.len(),
            est.len()
        )));
    }
    Ok(())
}

/// Adjusted Rand index from the contingency table of the two partitions.
pub fn ari_score(truth: &Partition, est: &Partition) -> Result<AriScore> {
    check_lengths(truth, est)?;
    let (kt, ke) = (truth.k(), est.k());
    let mut table = vec![0usize; kt * ke];
    for (&a, &b) in truth.labels().iter().zip(est.labels()) {
        table[a * ke + b] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let rows: f64 = truth.sizes().into_iter().map(choose2).sum();
    let cols: f64 = est.sizes().into_iter().map(choose2).sum();
    let total = choose2(truth.len());
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max_index = 0.5 * (rows + cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        let value = if truth == est { 1.0 } else { 0.0 };
        return Ok(AriScore {
            value,
            degenerate: true,
        });
    }
    Ok(AriScore {
        value: (index - expected) / denom,
        degenerate: false,
    })
}

/// Adjusted Rand index value; see [`ari_score`] for the degenerate flag.
pub fn ari(truth: &Partition, est: &Partition) -> Result<f64> {
    ari_score(truth, est).map(|s| s.value)
}

/// Pair-counting sensitivity and specificity.
///
/// A ratio with a zero denominator is reported as 1.0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub sensitivity: f64,
    pub specificity: f64,
    pub sensitivity_undefined: bool,
    pub specificity_undefined: bool,
    pub true_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
    pub false_pos: u64,
}

pub fn sensitivity_specificity(truth: &Partition, est: &Partition) -> Result<PairAgreement> {
    check_lengths(truth, est)?;
    let m = truth.len();
    if m < 2 {
        return Err(CodError::arg("pair metrics need at least 2 elements"));
    }
    let (mut tp, mut fnn, mut tn, mut fp) = (0u64, 0u64, 0u64, 0u64);
    for j in 0..m {
        for k in j + 1..m {
            match (truth.same_cluster(j, k), est.same_cluster(j, k)) {
                (true, true) => tp += 1,
                (true, false) => fnn += 1,
                (false, false) => tn += 1,
                (false, true) => fp += 1,
            }
        }
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            (1.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (sensitivity, sensitivity_undefined) = ratio(tp, tp + fnn);
    let (specificity, specificity_undefined) = ratio(tn, tn + fp);
    Ok(PairAgreement {
        sensitivity,
        specificity,
        sensitivity_undefined,
        specificity_undefined,
        true_pos: tp,
        false_neg: fnn,
        true_neg: tn,
        false_pos: fp,
    })
}
