//! Confidence intervals for error counts.

/// 1.96, the two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes out of `n` trials.
pub fn wilson(errors: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Mean and 95% half-width of a sample.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, f64::INFINITY);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_reference_values() {
        // 10 of 100 at 95%: [0.0552, 0.1744]
        let (lo, hi) = wilson(10, 100, Z95);
        assert!((lo - 0.05522).abs() < 1e-4, "{lo}");
        assert!((hi - 0.17437).abs() < 1e-4, "{hi}");
        let (lo, hi) = wilson(0, 1000, Z95);
        assert!(lo < 1e-15, "{lo}");
        assert!(hi > 0.0 && hi < 0.005);
        assert_eq!(wilson(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn wilson_contains_estimate() {
        for (e, n) in [(1, 3), (50, 60), (7, 1_000_000)] {
            let (lo, hi) = wilson(e, n, Z95);
            let p = e as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn mean_ci_basic() {
        let (m, h) = mean_ci(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - Z95 * (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
