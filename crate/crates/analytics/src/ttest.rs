//! Paired-sample t-test with exact two-tailed p-values.

use serde::{Deserialize, Serialize};

use crate::descriptive::{mean, sample_sd};
use crate::error::StatsError;
use crate::special::regularized_incomplete_beta;

/// Result of a paired t-test of `post` against `pre`.
///
/// Two standardized effect sizes are reported:
/// `d_z` divides the mean difference by the SD of the differences, while
/// `d_av` divides it by the average of the pre and post SDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub n: usize,
    pub mean_pre: f64,
    pub mean_post: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    pub df: u32,
    pub p_two_tailed: f64,
    pub d_z: f64,
    pub d_av: f64,
}

pub fn paired_t(pre: &[f64], post: &[f64]) -> Result<PairedTestResult, StatsError> {
    if pre.len() != post.len() {
        return Err(StatsError::LengthMismatch {
            pre: pre.len(),
            post: post.len(),
        });
    }
    let n = pre.len();
    if n < 2 {
        return Err(StatsError::TooFew(n));
    }

    let diffs: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    let mean_diff = mean(&diffs);
    let sd_diff = sample_sd(&diffs);
    if sd_diff == 0.0 || !sd_diff.is_finite() {
        return Err(StatsError::ZeroVariance);
    }

    let t = mean_diff / (sd_diff / (n as f64).sqrt());
    let df = (n - 1) as u32;
    let p_two_tailed = t_to_p(t, df)?;
    let sd_avg = (sample_sd(pre) + sample_sd(post)) / 2.0;

    Ok(PairedTestResult {
        n,
        mean_pre: mean(pre),
        mean_post: mean(post),
        mean_diff,
        sd_diff,
        t,
        df,
        p_two_tailed,
        d_z: mean_diff / sd_diff,
        d_av: mean_diff / sd_avg,
    })
}

/// Two-tailed p-value of a Student-t statistic.
///
/// Uses 2·(1 − F(|t|; ν)) = I_x(ν/2, 1/2) with x = ν / (ν + t²).
pub fn t_to_p(t: f64, df: u32) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::InvalidDf(df));
    }
    if !t.is_finite() {
        return Err(StatsError::NonFinite);
    }
    let nu = f64::from(df);
    let x = nu / (nu + t * t);
    regularized_incomplete_beta(nu / 2.0, 0.5, x).ok_or(StatsError::NoConvergence)
}
