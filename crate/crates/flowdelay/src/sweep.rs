//! Sweep orchestration: grid construction, figure-reproduction presets,
//! and the analytic-vs-Monte-Carlo validation run.
//!
//! Everything here is driven by a single [`SweepSpec`], which is also the
//! schema of the CLI's `--config` file. Field defaults reproduce the two
//! reference sweeps: expected delay versus cell area at fixed capacities,
//! and expected delay at matched load (`b = C`) versus capacity.

use crate::error::{Error, Result};
use crate::model::{
    expected_delay, expected_delay_closed, expected_delay_direct, ConstantMode, ModelParams,
    SeriesOptions,
};
use crate::output::OutputRow;
use crate::sim::{estimate_expected_delay, SimConfig};
use crate::specfun::{EI_ONE, EULER_GAMMA};
use serde::{Deserialize, Serialize};

/// What a run produces. Mirrors the CLI subcommands one-to-one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Eval,
    SweepArea,
    SweepMatchedCapacity,
    Simulate,
    Validate,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Eval => "eval",
            Self::SweepArea => "sweep_area",
            Self::SweepMatchedCapacity => "sweep_matched_capacity",
            Self::Simulate => "simulate",
            Self::Validate => "validate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// Grid over cell area in m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for AreaGrid {
    /// Log-spaced decades chosen so the load `b = lambda_u * area` spans
    /// [1, 1000] at the reference density of 1e-3 users/m², covering both
    /// the underloaded and overloaded table regimes.
    fn default() -> Self {
        Self {
            min: 1e3,
            max: 1e6,
            points: 60,
            spacing: Spacing::Log,
        }
    }
}

impl AreaGrid {
    fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.min > 0.0) {
            return Err(Error::InvalidInput {
                field: "area_grid.min",
                reason: format!("must be positive and finite, got {}", self.min),
            });
        }
        if !(self.max.is_finite() && self.max > self.min) {
            return Err(Error::InvalidInput {
                field: "area_grid.max",
                reason: format!("must be finite and exceed min = {}, got {}", self.min, self.max),
            });
        }
        if self.points < 2 {
            return Err(Error::InvalidInput {
                field: "area_grid.points",
                reason: format!("need at least 2 grid points, got {}", self.points),
            });
        }
        Ok(())
    }

    /// The grid points, ascending. Log spacing interpolates in ln(area).
    pub fn points_vec(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => ((1.0 - t) * self.min.ln() + t * self.max.ln()).exp(),
                }
            })
            .collect()
    }
}

/// Integer grid over flow-table capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityGrid {
    pub min: u64,
    pub max: u64,
    pub step: u64,
}

impl Default for CapacityGrid {
    fn default() -> Self {
        Self {
            min: 1,
            max: 100,
            step: 1,
        }
    }
}

impl CapacityGrid {
    fn validate(&self) -> Result<()> {
        if self.min < 1 {
            return Err(Error::InvalidInput {
                field: "capacity_grid.min",
                reason: "matched-load evaluation needs capacity >= 1 (b = C = 0 is degenerate)"
                    .to_string(),
            });
        }
        if self.max <= self.min {
            return Err(Error::InvalidInput {
                field: "capacity_grid.max",
                reason: format!("must exceed min = {}, got {}", self.min, self.max),
            });
        }
        if self.step == 0 {
            return Err(Error::InvalidInput {
                field: "capacity_grid.step",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }

    pub fn points_vec(&self) -> Vec<u64> {
        (self.min..=self.max).step_by(self.step as usize).collect()
    }
}

/// Full description of a run; the `--config` file deserializes into this.
///
/// Every field has a default, so a config file needs to name only what it
/// changes. Unknown keys are rejected to catch typos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub mode: Mode,
    /// User density in users/m².
    pub lambda_u: f64,
    /// Controller round-trip in seconds; 1.0 keeps outputs normalized.
    pub d_ctrl: f64,
    /// Cell area in m² for the single-point modes (`eval`, `simulate`).
    /// Sweep modes use `area_grid` instead and ignore this.
    pub area: Option<f64>,
    /// Table capacities evaluated per area point (and the curves of the
    /// area-sweep plot).
    pub capacities: Vec<u64>,
    pub area_grid: AreaGrid,
    pub capacity_grid: CapacityGrid,
    /// Monte Carlo settings; present on `simulate`/`validate`, and optional
    /// on sweeps to add mc columns (one run per row — slow on fine grids).
    pub sim: Option<SimConfig>,
    pub tolerance: SeriesOptions,
    /// Which integration constant row evaluation uses. `corrected` (the
    /// default) routes through the hybrid evaluator; `paper_literal`
    /// forces the closed form with the published constant, whose output
    /// can leave [0, 1] — useful for charting the discrepancy it causes.
    pub constant_mode: ConstantMode,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            mode: Mode::SweepArea,
            lambda_u: 1e-3,
            d_ctrl: 1.0,
            area: None,
            capacities: vec![10, 50, 100],
            area_grid: AreaGrid::default(),
            capacity_grid: CapacityGrid::default(),
            sim: None,
            tolerance: SeriesOptions::default(),
            constant_mode: ConstantMode::Corrected,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_u.is_finite() && self.lambda_u > 0.0) {
            return Err(Error::InvalidInput {
                field: "lambda_u",
                reason: format!("must be positive and finite, got {}", self.lambda_u),
            });
        }
        if !(self.d_ctrl.is_finite() && self.d_ctrl > 0.0) {
            return Err(Error::InvalidInput {
                field: "d_ctrl",
                reason: format!("must be positive and finite, got {}", self.d_ctrl),
            });
        }
        if let Some(area) = self.area {
            if !(area.is_finite() && area > 0.0) {
                return Err(Error::InvalidInput {
                    field: "area",
                    reason: format!("must be positive and finite, got {area}"),
                });
            }
        }
        if matches!(self.mode, Mode::Eval | Mode::Simulate) && self.area.is_none() {
            return Err(Error::InvalidInput {
                field: "area",
                reason: format!("mode `{}` needs an explicit cell area", self.mode),
            });
        }
        if self.capacities.is_empty() {
            return Err(Error::InvalidInput {
                field: "capacities",
                reason: "need at least one capacity".to_string(),
            });
        }
        self.area_grid.validate()?;
        self.capacity_grid.validate()?;
        if let Some(sim) = &self.sim {
            sim.validate()?;
        }
        self.tolerance.validate()?;
        Ok(())
    }

    fn expect_mode(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidInput {
                field: "mode",
                reason: format!("expected `{mode}`, got `{}`", self.mode),
            });
        }
        Ok(())
    }

    fn sim_or_default(&self) -> SimConfig {
        self.sim.unwrap_or_default()
    }
}

fn evaluate_row(
    spec: &SweepSpec,
    area: f64,
    capacity: u64,
    sim: Option<(&SimConfig, u64)>,
) -> Result<OutputRow> {
    let params = ModelParams::new(spec.lambda_u, area, capacity, spec.d_ctrl)?;
    let delay = match spec.constant_mode {
        ConstantMode::Corrected => expected_delay(&params, &spec.tolerance)?,
        // Forcing the published constant deliberately skips the hybrid
        // dispatch and the [0, 1] clamp, so sweeps can exhibit the
        // out-of-range values the audit flags.
        ConstantMode::PaperLiteral => expected_delay_closed(&params, ConstantMode::PaperLiteral)?,
    };
    let mut row = OutputRow {
        lambda_u: spec.lambda_u,
        area_m2: area,
        b: params.mean_users(),
        capacity,
        normalized_delay: delay.normalized,
        absolute_delay: delay.absolute,
        method: delay.method,
        error_bound: delay.error_bound,
        mc_mean: None,
        mc_stderr: None,
    };
    if let Some((cfg, row_index)) = sim {
        // Each row gets its own stream block so estimates stay independent
        // across the grid while remaining reproducible.
        let cfg = SimConfig {
            seed: cfg.seed.wrapping_add(row_index),
            ..*cfg
        };
        let est = estimate_expected_delay(&params, &cfg)?;
        row.mc_mean = Some(est.mean);
        row.mc_stderr = Some(est.std_error);
    }
    Ok(row)
}

/// Evaluates the model at one explicit area for each requested capacity.
pub fn run_eval(spec: &SweepSpec) -> Result<Vec<OutputRow>> {
    spec.expect_mode(Mode::Eval)?;
    spec.validate()?;
    let area = spec.area.expect("validate() enforces area for eval");
    let mut capacities = spec.capacities.clone();
    capacities.sort_unstable();
    capacities.dedup();
    capacities
        .into_iter()
        .map(|c| evaluate_row(spec, area, c, None))
        .collect()
}

/// Expected delay versus cell area, one curve per capacity.
pub fn run_sweep_area(spec: &SweepSpec) -> Result<Vec<OutputRow>> {
    spec.expect_mode(Mode::SweepArea)?;
    spec.validate()?;
    let areas = spec.area_grid.points_vec();
    let mut capacities = spec.capacities.clone();
    capacities.sort_unstable();
    capacities.dedup();
    let mut rows = Vec::with_capacity(areas.len() * capacities.len());
    for &capacity in &capacities {
        for &area in &areas {
            let sim = spec.sim.as_ref().map(|cfg| (cfg, rows.len() as u64));
            rows.push(evaluate_row(spec, area, capacity, sim)?);
        }
    }
    Ok(rows)
}

/// Expected delay at matched load: for each capacity C in the grid the
/// cell area is set so that the mean user count equals C.
pub fn run_sweep_matched_capacity(spec: &SweepSpec) -> Result<Vec<OutputRow>> {
    spec.expect_mode(Mode::SweepMatchedCapacity)?;
    spec.validate()?;
    let mut rows = Vec::new();
    for capacity in spec.capacity_grid.points_vec() {
        let area = capacity as f64 / spec.lambda_u;
        let sim = spec.sim.as_ref().map(|cfg| (cfg, rows.len() as u64));
        rows.push(evaluate_row(spec, area, capacity, sim)?);
    }
    Ok(rows)
}

/// Monte Carlo estimate alongside the analytic value at one point.
pub fn run_simulate(spec: &SweepSpec) -> Result<Vec<OutputRow>> {
    spec.expect_mode(Mode::Simulate)?;
    spec.validate()?;
    let area = spec.area.expect("validate() enforces area for simulate");
    let cfg = spec.sim_or_default();
    let mut capacities = spec.capacities.clone();
    capacities.sort_unstable();
    capacities.dedup();
    capacities
        .into_iter()
        .enumerate()
        .map(|(i, c)| evaluate_row(spec, area, c, Some((&cfg, i as u64))))
        .collect()
}

/// Load/capacity pairs at which the validation run cross-checks the
/// Monte Carlo estimator against the analytic value. They span small and
/// large loads (both Poisson sampler regimes), under- and over-provisioned
/// tables, and the capacity-zero edge.
pub const MC_CHECK_CONFIGS: [(f64, u64); 10] = [
    (0.5, 0),
    (1.0, 2),
    (2.0, 1),
    (5.0, 2),
    (5.0, 10),
    (10.0, 5),
    (20.0, 10),
    (50.0, 40),
    (50.0, 60),
    (100.0, 80),
];

/// Loads of the standard cross-check grid.
pub const STANDARD_B_GRID: [f64; 8] = [0.01, 0.1, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0];

/// Capacities of the standard cross-check grid.
pub const STANDARD_C_GRID: [u64; 8] = [0, 1, 2, 5, 10, 50, 100, 200];

/// Acceptance threshold on the closed-vs-direct relative deviation.
pub const CLOSED_VS_DIRECT_TOLERANCE: f64 = 1e-9;

/// Acceptance threshold on the Monte Carlo deviation in std-error units.
pub const MC_SIGMA_TOLERANCE: f64 = 4.0;

/// One grid point of the integration-constant audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantContrastRow {
    pub b: f64,
    pub capacity: u64,
    /// Normalized delay with the boundary-consistent constant.
    pub corrected: f64,
    /// Normalized delay with the published constant, unclamped.
    pub paper_literal: f64,
    /// `paper_literal - corrected`.
    pub contrast: f64,
    /// The algebraic prediction `C * (Ei(1) + 1 - gamma) * exp(-b)`.
    pub predicted_contrast: f64,
    /// True where the published constant pushes the normalized delay out
    /// of [0, 1] — delays are means of per-packet values in [0, 1], so
    /// any such point is impossible.
    pub out_of_range: bool,
}

/// What `validate` reports. Serialized as the `report.json` artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Max over the standard grid of |closed - direct| / max(|direct|, 1e-3):
    /// relative deviation with an absolute floor of 1e-12 at the 1e-9
    /// threshold, so vanishing delays cannot manufacture failures.
    pub max_rel_dev_closed_vs_direct: f64,
    pub closed_vs_direct_tolerance: f64,
    /// Grid points where the closed form signaled cancellation and the
    /// direct series stood in (deviation 0 by construction).
    pub closed_fallback_points: u64,
    /// Max over [`MC_CHECK_CONFIGS`] of |mc mean - analytic| / std_error.
    pub mc_max_sigma: f64,
    pub mc_sigma_tolerance: f64,
    pub mc_slots: u64,
    pub mc_seed: u64,
    /// Integration-constant audit over the standard grid.
    pub constant_contrast_table: Vec<ConstantContrastRow>,
    /// Max |contrast - predicted_contrast| over the table.
    pub max_contrast_deviation: f64,
    /// `max_rel_dev_closed_vs_direct` and `mc_max_sigma` within tolerance.
    pub passed: bool,
}

/// Cross-checks the three delay routes against each other over the
/// standard grid and audits the integration-constant discrepancy.
///
/// Failure of a numeric series to converge is reported as an error naming
/// the offending (b, capacity); statistical disagreement is not an error —
/// it lands in the report with `passed = false`.
pub fn run_validate(spec: &SweepSpec) -> Result<ValidationReport> {
    spec.expect_mode(Mode::Validate)?;
    spec.validate()?;
    let cfg = spec.sim.unwrap_or(SimConfig {
        slots: 200_000,
        ..SimConfig::default()
    });

    let mut max_rel_dev = 0.0_f64;
    let mut fallbacks = 0_u64;
    let mut table = Vec::with_capacity(STANDARD_B_GRID.len() * STANDARD_C_GRID.len());
    let mut max_contrast_dev = 0.0_f64;
    let contrast_scale = EI_ONE + 1.0 - EULER_GAMMA;

    for &b in &STANDARD_B_GRID {
        for &capacity in &STANDARD_C_GRID {
            // Unit density and d_ctrl keep area = b and normalized =
            // absolute; the grid is over (b, C), not physical cells.
            let params = ModelParams::new(1.0, b, capacity, 1.0)?;
            let direct = expected_delay_direct(&params, &spec.tolerance)?;
            let corrected = match expected_delay_closed(&params, ConstantMode::Corrected) {
                Ok(d) => {
                    let dev = (d.normalized - direct.normalized).abs()
                        / direct.normalized.abs().max(1e-3);
                    max_rel_dev = max_rel_dev.max(dev);
                    d.normalized
                }
                Err(Error::CancellationLoss { .. }) => {
                    fallbacks += 1;
                    direct.normalized
                }
                Err(e) => return Err(e),
            };
            // At large b with C >> b the constant shift K·e^(-b) sinks far
            // below the bracket's rounding noise, so the published-constant
            // bracket annihilates exactly like the corrected one; the
            // direct value stands in for both and the contrast is 0.
            let paper = match expected_delay_closed(&params, ConstantMode::PaperLiteral) {
                Ok(d) => d.normalized,
                Err(Error::CancellationLoss { .. }) => corrected,
                Err(e) => return Err(e),
            };
            let contrast = paper - corrected;
            let predicted = capacity as f64 * contrast_scale * (-b).exp();
            max_contrast_dev = max_contrast_dev.max((contrast - predicted).abs());
            table.push(ConstantContrastRow {
                b,
                capacity,
                corrected,
                paper_literal: paper,
                contrast,
                predicted_contrast: predicted,
                out_of_range: !(0.0..=1.0).contains(&paper),
            });
        }
    }

    let mut max_sigma = 0.0_f64;
    for (i, &(b, capacity)) in MC_CHECK_CONFIGS.iter().enumerate() {
        let params = ModelParams::new(1.0, b, capacity, 1.0)?;
        let analytic = expected_delay(&params, &spec.tolerance)?;
        let est = estimate_expected_delay(
            &params,
            &SimConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg
            },
        )?;
        let sigma = if est.std_error > 0.0 {
            (est.mean - analytic.normalized).abs() / est.std_error
        } else if (est.mean - analytic.normalized).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        max_sigma = max_sigma.max(sigma);
    }

    let passed =
        max_rel_dev <= CLOSED_VS_DIRECT_TOLERANCE && max_sigma <= MC_SIGMA_TOLERANCE;
    Ok(ValidationReport {
        max_rel_dev_closed_vs_direct: max_rel_dev,
        closed_vs_direct_tolerance: CLOSED_VS_DIRECT_TOLERANCE,
        closed_fallback_points: fallbacks,
        mc_max_sigma: max_sigma,
        mc_sigma_tolerance: MC_SIGMA_TOLERANCE,
        mc_slots: cfg.slots,
        mc_seed: cfg.seed,
        constant_contrast_table: table,
        max_contrast_deviation: max_contrast_dev,
        passed,
    })
}
