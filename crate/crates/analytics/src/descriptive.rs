use serde::{Deserialize, Serialize};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (n − 1 denominator), two-pass.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub n: usize,
    pub mean: f64,
    /// `None` for a single observation.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Descriptives {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            n: values.len(),
            mean: mean(values),
            sd: (values.len() > 1).then(|| sample_sd(values)),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Boxplot summary using linearly interpolated quantiles (R type 7).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_of_small_sample() {
        // mean 2.5, squared deviations 2.25+0.25+0.25+2.25 = 5, /3
        assert!((sample_variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn five_number_interpolates() {
        let f = FiveNumber::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let f = FiveNumber::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((f.q1, f.median, f.q3), (1.75, 2.5, 3.25));
        assert!(FiveNumber::of(&[]).is_none());
    }

    #[test]
    fn descriptives_single_value_has_no_sd() {
        let d = Descriptives::of(&[3.0]).unwrap();
        assert_eq!(d.sd, None);
        assert_eq!(d.mean, 3.0);
    }
}
