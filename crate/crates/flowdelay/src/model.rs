//! Expected per-packet delay for a capacity-limited flow table serving a
//! Poisson number of users.
//!
//! With `n` users in the cell and `capacity` cached rules, a packet misses
//! the table with probability `1 - capacity/n` (for `n > capacity`) and then
//! pays the controller round trip `d_ctrl`. Averaging over
//! `N ~ Poisson(b)`, `b = lambda_u * area`, gives
//!
//! ```text
//! E[delay]/d_ctrl = (1 - Pr{N <= C}) - C * T(b, C),
//! T(b, C) = sum_{k > C} pmf(k, b) / k.
//! ```
//!
//! The reciprocal tail `T` is evaluated two independent ways: term-by-term
//! summation with a rigorous truncation bound, and a closed form
//!
//! ```text
//! T(b, C) = [Ei(b) - gamma - ln b - sum_{k=1..C} b^k/(k*k!)] * e^(-b)
//! ```
//!
//! obtained by integrating the tail's defining differential relation and
//! fixing the constant from `T(0, C) = 0`. The constant is where a published
//! derivation of this model goes wrong: applying L'Hospital's rule at b = 0
//! suggests the anchored bracket `Ei(b) - Ei(1) - ln b - sum - 1`, which does
//! not vanish at b = 0 and inflates the delay by `C*(Ei(1)+1-gamma)*e^(-b)`,
//! enough to push it past 1 (an impossible normalized delay) for small b.
//! [`ConstantMode`] keeps both variants: `Corrected` is the default
//! everywhere, `PaperLiteral` exists so the discrepancy can be audited; see
//! `examples/constant_modes.rs` and the `validate` subcommand.

use crate::error::{Error, Result};
use crate::specfun::{
    exp_integral_ei_scaled, poisson_cdf, poisson_pmf, Accuracy, KahanSum, EI_ONE, EULER_GAMMA,
};
use serde::{Deserialize, Serialize};

/// Flag the closed form as unusable when fewer than ten significant digits
/// survive the bracket subtraction.
const CANCELLATION_GUARD: f64 = 1e-10;

/// Cell and flow-table parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// User density, users per square meter.
    pub lambda_u: f64,
    /// Cell area, square meters.
    pub area: f64,
    /// Flow-table capacity: number of users whose rules fit in the table.
    pub capacity: u64,
    /// Controller round-trip time paid on a table miss, seconds.
    pub d_ctrl: f64,
}

impl ModelParams {
    /// Builds validated parameters: positive density and area, nonnegative
    /// delay, and a mean user count `lambda_u * area` that is positive and
    /// finite in 64-bit arithmetic.
    pub fn new(lambda_u: f64, area: f64, capacity: u64, d_ctrl: f64) -> Result<Self> {
        let params = Self {
            lambda_u,
            area,
            capacity,
            d_ctrl,
        };
        params.validate()?;
        if params.mean_users() == 0.0 {
            return Err(Error::InvalidInput {
                field: "lambda_u * area",
                reason: format!("mean user count underflows to zero ({lambda_u} * {area})"),
            });
        }
        Ok(params)
    }

    /// Field-level checks. Unlike [`ModelParams::new`] this admits a mean
    /// user count that underflows to zero, which the evaluators treat as the
    /// degenerate empty cell (zero delay).
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_u > 0.0 && self.lambda_u.is_finite()) {
            return Err(Error::InvalidInput {
                field: "lambda_u",
                reason: format!("must be positive and finite, got {}", self.lambda_u),
            });
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(Error::InvalidInput {
                field: "area",
                reason: format!("must be positive and finite, got {}", self.area),
            });
        }
        if !(self.d_ctrl >= 0.0 && self.d_ctrl.is_finite()) {
            return Err(Error::InvalidInput {
                field: "d_ctrl",
                reason: format!("must be nonnegative and finite, got {}", self.d_ctrl),
            });
        }
        if !self.mean_users().is_finite() {
            return Err(Error::InvalidInput {
                field: "lambda_u * area",
                reason: "mean user count overflows".to_string(),
            });
        }
        Ok(())
    }

    /// Mean number of users in the cell, `b = lambda_u * area`.
    #[must_use]
    pub fn mean_users(&self) -> f64 {
        self.lambda_u * self.area
    }
}

/// Truncation controls for the tail series evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Stop once the rigorous tail bound drops below `rel_tol` times the
    /// partial sum. Must lie in (0, 1e-3).
    pub rel_tol: f64,
    /// Term budget before reporting non-convergence.
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 2_000_000,
        }
    }
}

impl SeriesOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-3) {
            return Err(Error::InvalidInput {
                field: "rel_tol",
                reason: format!("must lie in (0, 1e-3), got {}", self.rel_tol),
            });
        }
        if self.max_terms < 10 {
            return Err(Error::InvalidInput {
                field: "max_terms",
                reason: format!("must be at least 10, got {}", self.max_terms),
            });
        }
        Ok(())
    }
}

/// Which integration constant the closed form uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMode {
    /// The constant fixed by the boundary condition `T(0, C) = 0`. Agrees
    /// with the direct tail series; the default.
    Corrected,
    /// The constant as published (`-1` from L'Hospital's rule). Kept only so
    /// the discrepancy can be measured; produces normalized delays above 1.
    PaperLiteral,
}

impl std::fmt::Display for ConstantMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Corrected => "corrected",
            Self::PaperLiteral => "paper_literal",
        })
    }
}

impl std::str::FromStr for ConstantMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "paper-literal" | "paper_literal" => Ok(Self::PaperLiteral),
            other => Err(Error::InvalidInput {
                field: "constant_mode",
                reason: format!("expected `corrected` or `paper-literal`, got `{other}`"),
            }),
        }
    }
}

/// Which evaluation route produced a [`DelayResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    DirectSeries,
    ClosedForm,
    Hybrid,
}

impl std::fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DirectSeries => "direct_series",
            Self::ClosedForm => "closed_form",
            Self::Hybrid => "hybrid",
        })
    }
}

impl std::str::FromStr for EvalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct_series" => Ok(Self::DirectSeries),
            "closed_form" => Ok(Self::ClosedForm),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(Error::InvalidInput {
                field: "method",
                reason: format!("unknown evaluation method `{other}`"),
            }),
        }
    }
}

/// An evaluated expected delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayResult {
    /// Expected delay divided by `d_ctrl`. In [0, 1] for `Corrected`; the
    /// `PaperLiteral` constant can push it outside, which is the point of
    /// keeping that mode around.
    pub normalized: f64,
    /// Expected delay in seconds, `normalized * d_ctrl`.
    pub absolute: f64,
    /// Route that produced the number.
    pub method: EvalMethod,
    /// Rigorous bound on the truncation error of `normalized` for series
    /// routes; 0 for the closed form (whose error is rounding-level).
    pub error_bound: f64,
    /// Integration constant in effect.
    pub constant_mode: ConstantMode,
}

impl DelayResult {
    fn zero(method: EvalMethod, mode: ConstantMode) -> Self {
        Self {
            normalized: 0.0,
            absolute: 0.0,
            method,
            error_bound: 0.0,
            constant_mode: mode,
        }
    }
}

/// Expected delay of one packet given `n` users in the cell: 0 while the
/// table holds everyone, `(1 - capacity/n) * d_ctrl` once it cannot.
#[must_use]
pub fn per_packet_delay(n: u64, capacity: u64, d_ctrl: f64) -> f64 {
    if n <= capacity {
        0.0
    } else {
        (n - capacity) as f64 / n as f64 * d_ctrl
    }
}

/// Compensated sum of `weight(n) * pmf(n, b)` over `n > capacity`, where
/// `0 <= weight(n) <= 1`. Returns the sum and the rigorous tail bound at the
/// stopping index.
///
/// Past twice the mean, consecutive Poisson terms shrink by at least
/// `b/(n+2) < 1/2`, so the discarded tail is below
/// `pmf(M+1, b) / (1 - b/(M+2))`; summation stops once that bound falls
/// under `rel_tol` times the partial sum. Before that index, terms are
/// added unconditionally (the ratio bound is not valid at or before the
/// mode).
fn sum_weighted_tail(
    b: f64,
    capacity: u64,
    opts: &SeriesOptions,
    weight: impl Fn(u64) -> f64,
) -> Result<(f64, f64)> {
    let mut acc = KahanSum::new();
    for offset in 0..opts.max_terms as u64 {
        let n = capacity + 1 + offset;
        acc.add(weight(n) * poisson_pmf(n, b));
        let index = n as f64;
        if index + 2.0 > 2.0 * b {
            let bound = poisson_pmf(n + 1, b) / (1.0 - b / (index + 2.0));
            if bound <= opts.rel_tol * acc.value() {
                return Ok((acc.value(), bound));
            }
        }
    }
    Err(Error::NonConvergence {
        context: format!("Poisson tail series at b = {b}, capacity = {capacity}"),
        budget: opts.max_terms,
    })
}

/// Expected normalized delay by direct summation of
/// `sum_{n > C} (1 - C/n) * pmf(n, b)`.
///
/// This is the ground-truth route: no cancellation, a rigorous truncation
/// bound (carried in `error_bound`), geometric convergence once the index
/// passes the Poisson mode. Its cost grows with `b` since summation must
/// reach past `2b`; for `C + 1` well below `b` prefer [`expected_delay`],
/// which switches to the closed form there.
pub fn expected_delay_direct(params: &ModelParams, opts: &SeriesOptions) -> Result<DelayResult> {
    params.validate()?;
    opts.validate()?;
    let b = params.mean_users();
    if b == 0.0 {
        return Ok(DelayResult::zero(
            EvalMethod::DirectSeries,
            ConstantMode::Corrected,
        ));
    }
    let capacity = params.capacity;
    let (sum, bound) = sum_weighted_tail(b, capacity, opts, |n| {
        (n - capacity) as f64 / n as f64
    })?;
    let normalized = sum.clamp(0.0, 1.0);
    Ok(DelayResult {
        normalized,
        absolute: normalized * params.d_ctrl,
        method: EvalMethod::DirectSeries,
        error_bound: bound,
        constant_mode: ConstantMode::Corrected,
    })
}

/// The reciprocal Poisson tail `T(b, C) = sum_{k > C} pmf(k, b) / k` by
/// direct summation, truncated with the same rigorous bound as
/// [`expected_delay_direct`].
pub fn reciprocal_tail_direct(b: f64, capacity: u64, opts: &SeriesOptions) -> Result<f64> {
    assert!(
        b > 0.0 && b.is_finite(),
        "reciprocal_tail_direct: mean must be positive and finite, got {b}"
    );
    opts.validate()?;
    Ok(sum_weighted_tail(b, capacity, opts, |n| 1.0 / n as f64)?.0)
}

/// The reciprocal Poisson tail `T(b, C)` in closed form,
/// `[Ei(b) + offset - ln b - sum_{k=1..C} b^k/(k*k!)] * e^(-b)`,
/// where `offset` is `-gamma` (`Corrected`) or `-Ei(1) - 1` (`PaperLiteral`).
///
/// Everything is computed pre-multiplied by `e^(-b)`: the Ei term through
/// [`exp_integral_ei_scaled`] and each partial-sum term as `pmf(k, b)/k`, so
/// the evaluation stays finite for b far beyond the overflow point of
/// `Ei(b)` alone.
///
/// # Errors
///
/// For `capacity` at or above roughly `b`, the partial sum approaches the
/// Ei term and the subtraction destroys digits. When fewer than ten
/// significant digits survive (bracket below `1e-10` times its largest
/// term), this returns [`Error::CancellationLoss`]; fall back to
/// [`reciprocal_tail_direct`], which converges geometrically exactly there.
pub fn reciprocal_tail_closed(b: f64, capacity: u64, mode: ConstantMode) -> Result<f64> {
    assert!(
        b > 0.0 && b.is_finite(),
        "reciprocal_tail_closed: mean must be positive and finite, got {b}"
    );
    let accuracy = Accuracy::default();
    let scaled_ei = exp_integral_ei_scaled(b, &accuracy)?;
    let offset = match mode {
        ConstantMode::Corrected => -EULER_GAMMA,
        ConstantMode::PaperLiteral => -(EI_ONE + 1.0),
    };
    let anchor = (offset - b.ln()) * (-b).exp();

    let mut partial = KahanSum::new();
    for k in 1..=capacity {
        partial.add(poisson_pmf(k, b) / k as f64);
        let index = k as f64;
        if index + 2.0 > 2.0 * b {
            // Same geometric argument as the tail sums: what is left of the
            // partial sum cannot move the accumulated value.
            let remaining = poisson_pmf(k + 1, b) / (1.0 - b / (index + 2.0)) / index;
            if remaining <= 1e-17 * partial.value() {
                break;
            }
        }
    }

    let bracket = scaled_ei + anchor - partial.value();
    let largest = scaled_ei.abs().max(anchor.abs()).max(partial.value());
    if bracket.abs() < CANCELLATION_GUARD * largest {
        return Err(Error::CancellationLoss { b, capacity });
    }
    Ok(bracket)
}

/// Expected normalized delay via the closed form:
/// `(1 - poisson_cdf(C, b)) - C * T(b, C)` with `T` from
/// [`reciprocal_tail_closed`].
///
/// Cost is independent of `b`. Propagates the cancellation error from the
/// tail; [`expected_delay`] handles that fallback automatically.
pub fn expected_delay_closed(params: &ModelParams, mode: ConstantMode) -> Result<DelayResult> {
    params.validate()?;
    let b = params.mean_users();
    if b == 0.0 {
        return Ok(DelayResult::zero(EvalMethod::ClosedForm, mode));
    }
    let capacity = params.capacity;
    let tail = reciprocal_tail_closed(b, capacity, mode)?;
    let raw = (1.0 - poisson_cdf(capacity, b)) - capacity as f64 * tail;
    let normalized = match mode {
        ConstantMode::Corrected => raw.clamp(0.0, 1.0),
        ConstantMode::PaperLiteral => raw,
    };
    Ok(DelayResult {
        normalized,
        absolute: normalized * params.d_ctrl,
        method: EvalMethod::ClosedForm,
        error_bound: 0.0,
        constant_mode: mode,
    })
}

/// Expected normalized delay, choosing the evaluation route automatically.
///
/// The closed form is used where it is well-conditioned (`capacity + 1`
/// at least ten standard deviations below the mean,
/// `capacity + 1 <= b - 10*sqrt(b)`) and on a cancellation signal the direct
/// series takes over; everywhere else the direct series is used outright,
/// which converges geometrically once `capacity + 1 > b`. The result is
/// tagged [`EvalMethod::Hybrid`]; `error_bound > 0` reveals that the series
/// route ran underneath.
///
/// A mean user count that underflows to zero is the empty-cell limit and
/// yields zero delay.
pub fn expected_delay(params: &ModelParams, opts: &SeriesOptions) -> Result<DelayResult> {
    params.validate()?;
    opts.validate()?;
    let b = params.mean_users();
    if b == 0.0 {
        return Ok(DelayResult::zero(
            EvalMethod::Hybrid,
            ConstantMode::Corrected,
        ));
    }
    let well_conditioned = params.capacity as f64 + 1.0 <= b - 10.0 * b.sqrt();
    if well_conditioned {
        match expected_delay_closed(params, ConstantMode::Corrected) {
            Ok(mut result) => {
                result.method = EvalMethod::Hybrid;
                return Ok(result);
            }
            Err(Error::CancellationLoss { .. }) => {}
            Err(other) => return Err(other),
        }
    }
    let mut result = expected_delay_direct(params, opts)?;
    result.normalized = result.normalized.clamp(0.0, 1.0);
    result.absolute = result.normalized * params.d_ctrl;
    result.method = EvalMethod::Hybrid;
    Ok(result)
}
