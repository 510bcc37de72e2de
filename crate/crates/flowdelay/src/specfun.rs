//! Special functions backing the delay model: log-factorials, Poisson mass
//! and distribution functions, and the exponential integral Ei.
//!
//! Everything here is evaluated in a way that stays finite for populations up
//! to `n = 10^6` and means up to `b = 10^5`: probabilities are computed in log
//! space and exponentiated last, and Ei has a scaled variant `e^(-x)·Ei(x)`
//! so callers can cancel the `e^x` growth analytically instead of overflowing.
//!
//! The Ei evaluation follows the classical two-regime scheme (Abramowitz &
//! Stegun 5.1.10 for the ascending series, 5.1.51 for the asymptotic
//! expansion), switching regimes at x = 40 where both are comfortably inside
//! their accuracy floors.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// The Euler–Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.5772156649015328606;

/// Ei(1). Shows up as an integration constant whenever Ei is anchored at
/// x = 1 rather than at 0.
pub const EI_ONE: f64 = 1.8951178163559367555;

/// Ascending series below, asymptotic expansion above. At the boundary the
/// series needs ~110 terms and the asymptotic floor is near 7e-17 relative,
/// so both sides meet any permitted tolerance.
const EI_SERIES_CUTOFF: f64 = 40.0;

/// Compensated (Kahan–Neumaier) accumulator.
///
/// Long alternating or wide-dynamic-range sums lose digits under plain `+=`;
/// this keeps the running error in a correction term and folds it in at the
/// end. `value()` is exact to ~1 ulp for the sums done in this crate.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    #[must_use]
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    #[must_use]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Convergence controls for the iterative evaluations in this module.
#[derive(Debug, Clone, Copy)]
pub struct Accuracy {
    /// Relative tolerance on the result. Must lie in (0, 1e-3).
    pub rel_tol: f64,
    /// Iteration budget before giving up. Must be at least 10.
    pub max_iter: usize,
}

impl Default for Accuracy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_iter: 10_000,
        }
    }
}

impl Accuracy {
    pub fn new(rel_tol: f64, max_iter: usize) -> Result<Self> {
        let acc = Self { rel_tol, max_iter };
        acc.validate()?;
        Ok(acc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-3) {
            return Err(Error::InvalidInput {
                field: "rel_tol",
                reason: format!("must lie in (0, 1e-3), got {}", self.rel_tol),
            });
        }
        if self.max_iter < 10 {
            return Err(Error::InvalidInput {
                field: "max_iter",
                reason: format!("must be at least 10, got {}", self.max_iter),
            });
        }
        Ok(())
    }
}

const LOG_FACTORIAL_TABLE_LEN: usize = 2048;

fn log_factorial_table() -> &'static [f64; LOG_FACTORIAL_TABLE_LEN] {
    static TABLE: OnceLock<[f64; LOG_FACTORIAL_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0_f64; LOG_FACTORIAL_TABLE_LEN];
        let mut acc = KahanSum::new();
        for (n, slot) in table.iter_mut().enumerate().skip(1) {
            acc.add((n as f64).ln());
            *slot = acc.value();
        }
        table
    })
}

/// ln(n!), exact 0 for n ∈ {0, 1}, relative error ≤ 1e-14 elsewhere.
///
/// Small arguments come from a cumulative compensated table; beyond its reach
/// the Stirling series with three correction terms is already accurate to far
/// below a ulp of the result.
#[must_use]
pub fn log_factorial(n: u64) -> f64 {
    if (n as usize) < LOG_FACTORIAL_TABLE_LEN {
        return log_factorial_table()[n as usize];
    }
    let x = n as f64;
    let x2 = x * x;
    x * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + (1.0 / 12.0) / x
        - (1.0 / 360.0) / (x * x2)
        + (1.0 / 1260.0) / (x * x2 * x2)
}

/// Poisson mass function Pr{N = n} for mean `b > 0`.
///
/// Evaluated as `exp(n ln b - b - ln n!)` so that extreme (n, b) underflow to
/// zero instead of overflowing or producing NaN.
#[must_use]
pub fn poisson_pmf(n: u64, b: f64) -> f64 {
    assert!(
        b > 0.0 && b.is_finite(),
        "poisson_pmf: mean must be positive and finite, got {b}"
    );
    let log_p = n as f64 * b.ln() - b - log_factorial(n);
    log_p.exp().min(1.0)
}

/// Poisson distribution function Pr{N ≤ c} for mean `b > 0`, i.e. the
/// regularized upper incomplete gamma function Q(c + 1, b).
///
/// A direct compensated sum of the mass function. Once the index is past
/// twice the mean, the remaining terms are bounded by a geometric series; the
/// sum stops early when that bound can no longer move the result.
#[must_use]
pub fn poisson_cdf(c: u64, b: f64) -> f64 {
    assert!(
        b > 0.0 && b.is_finite(),
        "poisson_cdf: mean must be positive and finite, got {b}"
    );
    let mut acc = KahanSum::new();
    for k in 0..=c {
        let term = poisson_pmf(k, b);
        acc.add(term);
        let index = k as f64;
        if index + 2.0 > 2.0 * b {
            // Remaining mass through k = c is below pmf(k+1, b) / (1 - ratio).
            let ratio = b / (index + 2.0);
            let remaining = poisson_pmf(k + 1, b) / (1.0 - ratio);
            if remaining < 1e-17 * acc.value() {
                break;
            }
        }
    }
    acc.value().min(1.0)
}

/// The exponential integral Ei(x) for x > 0.
///
/// Relative error is within `acc.rel_tol` across [1e-6, 700], except in a
/// small neighborhood of the real zero of Ei (x ≈ 0.3725) where cancellation
/// between `ln x` and the series caps accuracy at ~1 ulp absolute; no fixed
/// precision arithmetic can promise relative error across a zero crossing.
/// Above x ≈ 709 the true value exceeds the f64 range and the result is
/// `inf`; use [`exp_integral_ei_scaled`] there.
///
/// # Examples
///
/// ```
/// use flowdelay::specfun::{exp_integral_ei, Accuracy};
///
/// let ei = exp_integral_ei(1.0, &Accuracy::default()).unwrap();
/// assert!((ei - 1.8951178163559368).abs() < 1e-13);
/// ```
pub fn exp_integral_ei(x: f64, acc: &Accuracy) -> Result<f64> {
    acc.validate()?;
    assert!(
        x > 0.0 && x.is_finite(),
        "exp_integral_ei: x must be positive and finite, got {x}"
    );
    if x <= EI_SERIES_CUTOFF {
        Ok(EULER_GAMMA + x.ln() + ei_power_series(x, acc)?)
    } else {
        Ok(x.exp() / x * ei_asymptotic_factor(x, acc)?)
    }
}

/// `e^(-x) · Ei(x)` without forming either factor.
///
/// For x beyond a few hundred, Ei(x) grows like `e^x / x` and overflows f64
/// while this product stays near `1/x`. The delay model multiplies Ei by a
/// Poisson normalization `e^(-b)` anyway, so it consumes this form directly.
pub fn exp_integral_ei_scaled(x: f64, acc: &Accuracy) -> Result<f64> {
    acc.validate()?;
    assert!(
        x > 0.0 && x.is_finite(),
        "exp_integral_ei_scaled: x must be positive and finite, got {x}"
    );
    if x <= EI_SERIES_CUTOFF {
        Ok((EULER_GAMMA + x.ln() + ei_power_series(x, acc)?) * (-x).exp())
    } else {
        Ok(ei_asymptotic_factor(x, acc)? / x)
    }
}

/// Ascending series Σ_{k≥1} x^k / (k · k!), all terms positive.
fn ei_power_series(x: f64, acc: &Accuracy) -> Result<f64> {
    let mut pow_term = 1.0; // x^k / k!
    let mut sum = KahanSum::new();
    for k in 1..=acc.max_iter {
        pow_term *= x / k as f64;
        let term = pow_term / k as f64;
        sum.add(term);
        if term <= acc.rel_tol * sum.value() {
            return Ok(sum.value());
        }
    }
    Err(Error::NonConvergence {
        context: format!("Ei ascending series at x = {x}"),
        budget: acc.max_iter,
    })
}

/// Asymptotic factor S(x) = Σ_k k!/x^k, so that Ei(x) ≈ e^x/x · S(x).
///
/// The series diverges eventually; terms shrink until k ≈ x and the smallest
/// term bounds the attainable error. For x ≥ 40 that floor is below 7e-17
/// relative, under any tolerance [`Accuracy`] admits.
fn ei_asymptotic_factor(x: f64, acc: &Accuracy) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = KahanSum::new();
    sum.add(term);
    for k in 1..=acc.max_iter {
        let next = term * k as f64 / x;
        if next >= term {
            // Divergence onset: the floor of the expansion is reached.
            if term <= acc.rel_tol * sum.value() {
                return Ok(sum.value());
            }
            return Err(Error::NonConvergence {
                context: format!(
                    "Ei asymptotic expansion at x = {x}: floor {term:.3e} above tolerance"
                ),
                budget: k,
            });
        }
        term = next;
        sum.add(term);
        if term <= acc.rel_tol * sum.value() {
            return Ok(sum.value());
        }
    }
    Err(Error::NonConvergence {
        context: format!("Ei asymptotic expansion at x = {x}"),
        budget: acc.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Reference digits computed with mpmath at 60 significant digits.
    const LN_FACTORIAL_10: f64 = 15.104412573075515295;
    const LN_FACTORIAL_170: f64 = 706.57306224578734711;
    const LN_FACTORIAL_5000: f64 = 37591.143508876766569;
    const PMF_3_HALF: f64 = 0.012636055410679862992;
    const PMF_50_50: f64 = 0.056325006325190825412;
    const CDF_10_10: f64 = 0.5830397501929855073;
    const CDF_100_100: f64 = 0.52656219852999847038;

    const EI_REFERENCE: &[(f64, f64)] = &[
        (1e-6, -13.238293893062491243),
        (0.01, -4.0179294654266693868),
        (0.1, -1.622812813969276675),
        (0.5, 0.45421990486317357992),
        (1.0, 1.8951178163559367555),
        (2.0, 4.9542343560018901634),
        (5.0, 40.185275355803177455),
        (10.0, 2492.2289762418777591),
        (20.0, 25615652.66405658882),
        (30.0, 368973209407.27419706),
        (35.0, 46690550144661.595445),
        (40.0, 6039718263611241.5784),
        (45.0, 794391603570445377.15),
        (50.0, 1.0585636897131690963e20),
        (100.0, 2.7155527448538798219e41),
        (300.0, 6.496482508088665789e127),
        (500.0, 2.8128213978862943375e214),
        (700.0, 1.4509787360525608526e301),
    ];

    fn rel_err(got: f64, want: f64) -> f64 {
        (got - want).abs() / want.abs()
    }

    #[test]
    fn kahan_recovers_cancelled_small_term() {
        let mut acc = KahanSum::new();
        for x in [1e16, 1.0, -1e16] {
            acc.add(x);
        }
        assert_eq!(acc.value(), 1.0, "naive summation would return 0 here");
    }

    #[test]
    fn kahan_beats_naive_on_long_constant_sum() {
        let mut acc = KahanSum::new();
        let mut naive = 0.0_f64;
        for _ in 0..1_000_000 {
            acc.add(0.1);
            naive += 0.1;
        }
        let exact = 100_000.0;
        assert!((acc.value() - exact).abs() <= (naive - exact).abs());
        assert!((acc.value() - exact).abs() < 1e-8);
    }

    #[test]
    fn log_factorial_base_cases_are_exact() {
        assert_eq!(log_factorial(0), 0.0);
        assert_eq!(log_factorial(1), 0.0);
    }

    #[test]
    fn log_factorial_matches_references() {
        assert!(rel_err(log_factorial(10), LN_FACTORIAL_10) < 1e-14);
        assert!(rel_err(log_factorial(170), LN_FACTORIAL_170) < 1e-14);
        // 5000 exercises the Stirling branch.
        assert!(rel_err(log_factorial(5000), LN_FACTORIAL_5000) < 1e-14);
    }

    #[test]
    fn log_factorial_recurrence_holds_across_table_boundary() {
        // ln((n+1)!) - ln(n!) = ln(n+1), including the table-to-Stirling seam.
        for n in [5_u64, 100, 1000, 2046, 2047, 2048, 5000, 100_000] {
            let lhs = log_factorial(n + 1) - log_factorial(n);
            let rhs = ((n + 1) as f64).ln();
            assert!(
                rel_err(lhs, rhs) < 1e-10,
                "recurrence broke at n = {n}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn pmf_at_zero_count_is_exp_neg_b() {
        for b in [0.5, 1.0, 10.0, 100.0] {
            assert!(rel_err(poisson_pmf(0, b), (-b).exp()) < 1e-15);
        }
    }

    #[test]
    fn pmf_matches_references() {
        assert!(rel_err(poisson_pmf(3, 0.5), PMF_3_HALF) < 1e-13);
        assert!(rel_err(poisson_pmf(50, 50.0), PMF_50_50) < 1e-12);
    }

    #[test]
    fn pmf_extreme_arguments_stay_in_unit_interval() {
        let p = poisson_pmf(1_000_000, 1e5);
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        let q = poisson_pmf(100_000, 1e5);
        assert!(q.is_finite() && (0.0..=1.0).contains(&q));
        assert!(q > 0.0, "mass at the mode must not underflow");
    }

    #[test]
    fn pmf_sums_to_one() {
        for b in [0.5_f64, 1.0, 10.0, 100.0] {
            let horizon = (b + 20.0 * b.sqrt() + 20.0).ceil() as u64;
            let mut acc = KahanSum::new();
            for n in 0..=horizon {
                acc.add(poisson_pmf(n, b));
            }
            assert!(
                (acc.value() - 1.0).abs() < 1e-10,
                "mass at b = {b} sums to {}",
                acc.value()
            );
        }
    }

    /// Adaptive Simpson quadrature, used only to provide an oracle for the
    /// cdf that does not share any code with the implementation.
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let coarse = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
        let left = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
        let right = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
        let fine = left + right;
        if depth == 0 || (fine - coarse).abs() < 15.0 * tol {
            fine + (fine - coarse) / 15.0
        } else {
            simpson(f, a, m, 0.5 * tol, depth - 1) + simpson(f, m, b, 0.5 * tol, depth - 1)
        }
    }

    #[test]
    fn cdf_matches_incomplete_gamma_quadrature() {
        // Pr{N <= c} equals the regularized upper incomplete gamma
        // Q(c+1, b) = integral_b^inf t^c e^-t dt / c!.
        for (c, b) in [(10_u64, 10.0_f64), (3, 1.0), (20, 15.0)] {
            let integrand = |t: f64| (c as f64 * t.ln() - t - log_factorial(c)).exp();
            let upper = b + 40.0 * b.sqrt() + 40.0;
            let oracle = simpson(&integrand, b, upper, 1e-13, 40);
            let got = poisson_cdf(c, b);
            assert!(
                (got - oracle).abs() < 1e-10,
                "cdf({c}, {b}) = {got} vs quadrature {oracle}"
            );
        }
        assert!(rel_err(poisson_cdf(10, 10.0), CDF_10_10) < 1e-12);
        assert!(rel_err(poisson_cdf(100, 100.0), CDF_100_100) < 1e-12);
    }

    #[test]
    fn cdf_saturates_far_above_the_mean() {
        for (c, b) in [(40_u64, 1.0_f64), (220, 10.0), (2020, 100.0)] {
            assert!((poisson_cdf(c, b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_complements_tail_mass() {
        for (c, b) in [(2_u64, 2.0_f64), (10, 10.0), (100, 100.0)] {
            let mut tail = KahanSum::new();
            let horizon = (b + 25.0 * b.sqrt() + 25.0).ceil() as u64;
            for k in (c + 1)..=horizon {
                tail.add(poisson_pmf(k, b));
            }
            let total = poisson_cdf(c, b) + tail.value();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ei_matches_reference_table() {
        let acc = Accuracy::default();
        for &(x, want) in EI_REFERENCE {
            let got = exp_integral_ei(x, &acc).unwrap();
            assert!(
                rel_err(got, want) < 1e-13,
                "Ei({x}) = {got:e}, want {want:e}, rel err {:.2e}",
                rel_err(got, want)
            );
        }
    }

    #[test]
    fn ei_constant_at_one_is_consistent() {
        // Guards the frozen EI_ONE digits against transcription slips; the
        // series itself lands within a few ulps of the true value.
        let got = exp_integral_ei(1.0, &Accuracy::default()).unwrap();
        assert!(rel_err(got, EI_ONE) < 1e-13);
    }

    #[test]
    fn ei_scaled_agrees_with_plain_ei() {
        let acc = Accuracy::default();
        for x in [0.1, 1.0, 10.0, 39.0, 41.0, 50.0, 100.0, 500.0] {
            let scaled = exp_integral_ei_scaled(x, &acc).unwrap();
            let plain = exp_integral_ei(x, &acc).unwrap();
            assert!(rel_err(scaled, plain * (-x).exp()) < 1e-12);
        }
        // Beyond the f64 range of Ei itself the scaled form must stay finite.
        let far = exp_integral_ei_scaled(5000.0, &acc).unwrap();
        assert!(far.is_finite() && far > 0.0);
        assert!(rel_err(far, 1.0 / 5000.0) < 1e-3);
    }

    #[test]
    fn ei_ascending_series_identity() {
        // Ei(x) - gamma - ln x must reproduce the series sum_k x^k/(k k!),
        // summed here naively and independently of the implementation.
        let acc = Accuracy::default();
        let mut x = 0.01;
        while x <= 30.0 {
            let mut series = 0.0_f64;
            let mut pow = 1.0_f64;
            for k in 1..400 {
                pow *= x / k as f64;
                series += pow / k as f64;
            }
            let lhs = exp_integral_ei(x, &acc).unwrap() - EULER_GAMMA - x.ln();
            assert!(
                rel_err(lhs, series) < 1e-12,
                "series identity failed at x = {x}: {lhs} vs {series}"
            );
            x *= 1.9;
        }
    }

    #[test]
    fn ei_regimes_agree_in_overlap_band() {
        let acc = Accuracy::default();
        for x in 35..=45 {
            let x = x as f64;
            let series = EULER_GAMMA + x.ln() + ei_power_series(x, &acc).unwrap();
            let asymptotic = x.exp() / x * ei_asymptotic_factor(x, &acc).unwrap();
            assert!(
                rel_err(series, asymptotic) < 10.0 * acc.rel_tol,
                "regimes disagree at x = {x}: {series:e} vs {asymptotic:e}"
            );
        }
    }

    #[test]
    fn ei_asymptotic_sanity_at_100() {
        // Ei(x) ~ e^x/x for large x; at x = 100 the correction is about 1%.
        let ei = exp_integral_ei(100.0, &Accuracy::default()).unwrap();
        assert!((ei * 100.0 * (-100.0_f64).exp() - 1.0).abs() <= 0.02);
    }

    #[test]
    fn ei_reports_non_convergence_on_tiny_budget() {
        let acc = Accuracy {
            rel_tol: 1e-13,
            max_iter: 10,
        };
        let err = exp_integral_ei(30.0, &acc).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "got {err:?}");
        let err = exp_integral_ei(50.0, &acc).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "got {err:?}");
    }

    #[test]
    fn accuracy_rejects_out_of_range_controls() {
        assert!(Accuracy::new(0.0, 100).is_err());
        assert!(Accuracy::new(-1e-9, 100).is_err());
        assert!(Accuracy::new(1e-2, 100).is_err());
        assert!(Accuracy::new(1e-13, 5).is_err());
        assert!(Accuracy::new(1e-13, 10).is_ok());
    }

    proptest! {
        #[test]
        fn pmf_stays_in_unit_interval(n in 0_u64..10_000, b in 1e-6_f64..1e4) {
            let p = poisson_pmf(n, b);
            prop_assert!(p.is_finite());
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn cdf_is_monotone_in_count(c in 0_u64..500, b in 1e-3_f64..500.0) {
            prop_assert!(poisson_cdf(c + 1, b) >= poisson_cdf(c, b) - 1e-15);
        }

        #[test]
        fn ei_is_strictly_increasing(a in 1e-6_f64..699.0, delta in 1e-3_f64..1.0) {
            let acc = Accuracy::default();
            let lo = exp_integral_ei(a, &acc).unwrap();
            let hi = exp_integral_ei(a + delta, &acc).unwrap();
            prop_assert!(hi > lo, "Ei({a}) = {lo} !< Ei({}) = {hi}", a + delta);
        }
    }
}
