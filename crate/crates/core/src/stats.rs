//! Binomial probabilities and proportion confidence intervals.

/// `z` for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`, clamped to `[0, 1]`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    // The closed form is exactly 0 (resp. 1) at the extremes; avoid rounding residue.
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Probability mass function of `Binomial(n, prob)` as a vector indexed by successes.
///
/// Terms come from the ratio recurrence outward from the mode, then get
/// normalized, so no factorials or gamma functions are evaluated.
pub fn binomial_pmf(n: u64, prob: f64) -> Vec<f64> {
    let len = n as usize + 1;
    let mut pmf = vec![0.0; len];
    if prob <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if prob >= 1.0 {
        pmf[n as usize] = 1.0;
        return pmf;
    }
    let mode = (((n + 1) as f64 * prob).floor() as usize).min(n as usize);
    let odds = prob / (1.0 - prob);
    pmf[mode] = 1.0;
    // P(j+1)/P(j) = (n-j)/(j+1) * odds
    for j in mode..n as usize {
        pmf[j + 1] = pmf[j] * (n as f64 - j as f64) / (j as f64 + 1.0) * odds;
    }
    for j in (0..mode).rev() {
        pmf[j] = pmf[j + 1] * (j as f64 + 1.0) / (n as f64 - j as f64) / odds;
    }
    // Sum small terms first.
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| pmf[a].total_cmp(&pmf[b]));
    let total: f64 = order.iter().map(|&j| pmf[j]).sum();
    for v in &mut pmf {
        *v /= total;
    }
    pmf
}

/// `P(X >= k)` for `X ~ Binomial(n, prob)`, summing whichever tail is smaller.
pub fn binomial_upper_tail(n: u64, prob: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let pmf = binomial_pmf(n, prob);
    let upper: f64 = pmf[k as usize..].iter().rev().sum();
    if upper <= 0.5 {
        upper
    } else {
        1.0 - pmf[..k as usize].iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_zero_of_hundred() {
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036995).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn wilson_all_successes_reaches_one() {
        let (lo, hi) = wilson_interval(10, 10, Z95);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.65 && lo < 0.75);
    }

    #[test]
    fn pmf_matches_closed_form() {
        let pmf = binomial_pmf(5, 0.3);
        let exact = [0.16807, 0.36015, 0.3087, 0.1323, 0.02835, 0.00243];
        for (a, b) in pmf.iter().zip(exact) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn tails() {
        assert_eq!(binomial_upper_tail(4, 0.5, 0), 1.0);
        assert_eq!(binomial_upper_tail(4, 0.5, 5), 0.0);
        assert!((binomial_upper_tail(4, 0.5, 3) - 5.0 / 16.0).abs() < 1e-15);
        assert!((binomial_upper_tail(4, 0.5, 1) - 15.0 / 16.0).abs() < 1e-15);
    }
}
