use serde::{Deserialize, Serialize};

use crate::descriptive::sample_variance;
use crate::error::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    pub k_items: usize,
    pub alpha: f64,
}

/// Cronbach's alpha over a participants × items matrix (one row per participant).
pub fn cronbach_alpha<R: AsRef<[f64]>>(rows: &[R]) -> Result<ReliabilityResult, StatsError> {
    let n = rows.len();
    let k = rows.first().map_or(0, |r| r.as_ref().len());
    if k < 2 {
        return Err(StatsError::TooFewItems(k));
    }
    if n < 2 {
        return Err(StatsError::DegenerateMatrix(format!(
            "need at least 2 participants, got {n}"
        )));
    }
    if let Some(i) = rows.iter().position(|r| r.as_ref().len() != k) {
        return Err(StatsError::DegenerateMatrix(format!(
            "row {} has {} items, expected {k}",
            i + 1,
            rows[i].as_ref().len()
        )));
    }

    let item_variance_sum: f64 = (0..k)
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r.as_ref()[j]).collect();
            sample_variance(&column)
        })
        .sum();
    let totals: Vec<f64> = rows.iter().map(|r| r.as_ref().iter().sum()).collect();
    let total_variance = sample_variance(&totals);
    if total_variance == 0.0 {
        return Err(StatsError::DegenerateMatrix(
            "total scores have zero variance".into(),
        ));
    }

    let k_f = k as f64;
    Ok(ReliabilityResult {
        k_items: k,
        alpha: k_f / (k_f - 1.0) * (1.0 - item_variance_sum / total_variance),
    })
}
