//! Small statistics helpers shared by the typicality experiments and the
//! Monte Carlo simulator.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_053_6;
/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_9;

/// Wilson score interval for a binomial proportion.
///
/// Returns `(low, high)` clamped to `[0, 1]`. With zero trials the interval
/// is the uninformative `(0, 1)`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_matches_hand_computed_case() {
        // 8 successes in 40 trials at z = 1.96 (textbook arithmetic):
        // center = (0.2 + z^2/80) / (1 + z^2/40), half-width from the
        // standard formula.
        let (lo, hi) = wilson_interval(8, 40, 1.96);
        assert_abs_diff_eq!(lo, 0.104_998_649_731_668_73, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.347_576_073_818_566_76, epsilon = 1e-12);
    }

    #[test]
    fn wilson_is_clamped_and_ordered() {
        let (lo, hi) = wilson_interval(0, 10, Z99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1.0);
        let (lo, hi) = wilson_interval(10, 10, Z99);
        assert!(lo > 0.0 && lo < 1.0);
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(0, 0, Z95);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn wilson_interval_covers_the_point_estimate() {
        for (s, t) in [(1u64, 7u64), (3, 9), (50, 100), (999, 1000)] {
            let (lo, hi) = wilson_interval(s, t, Z95);
            let p = s as f64 / t as f64;
            assert!(lo <= p && p <= hi, "interval [{lo}, {hi}] misses p = {p}");
        }
    }
}
