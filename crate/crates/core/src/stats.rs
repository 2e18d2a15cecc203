//! Small summary-statistics helpers for the probe harness and experiments.

/// Sample mean, standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
}

/// Two-pass summary of a sample; a single observation has zero spread.
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    assert!(n > 0, "cannot summarize an empty sample");
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary { n, mean, std_dev: 0.0, std_err: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let std_dev = var.sqrt();
    Summary { n, mean, std_dev, std_err: std_dev / (n as f64).sqrt() }
}

/// Median of a sample (averaging the middle pair on even sizes).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// One-sided 95% normal quantile used by the ordering acceptance checks.
pub const Z_95: f64 = 1.645;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_known_sample() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.std_err - s.std_dev / 2.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_has_no_spread() {
        let s = summarize(&[7.0]);
        assert_eq!(s.mean, 7.0);
        assert_eq!(s.std_err, 0.0);
    }

    #[test]
    fn median_handles_both_parities() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
