//! Command-line front end over the flowdelay library.
//!
//! Subcommands map one-to-one onto [`flowdelay::sweep::Mode`]. Without
//! `--out-dir`, row-producing commands print the CSV to stdout and
//! `validate` prints its JSON report; with `--out-dir`, the canonical
//! artifacts (results.csv, plot.svg, manifest.json, report.json) are
//! written there and their paths printed instead.
//!
//! Exit codes: 0 success; 1 invalid arguments or config; 2 numeric
//! non-convergence or cancellation; 3 validation failure; 4 I/O error.

use clap::{Args, Parser, Subcommand};
use flowdelay::output::{emit_outputs, rows_to_csv, sorted_rows};
use flowdelay::sim::SimConfig;
use flowdelay::sweep::{
    run_eval, run_simulate, run_sweep_area, run_sweep_matched_capacity, run_validate, Mode,
    Spacing, SweepSpec,
};
use flowdelay::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "flowdelay",
    version,
    about = "Expected packet delay for an SDN base station with a finite flow table"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytic model at one cell area
    Eval(RunArgs),
    /// Sweep expected delay over cell area, one curve per capacity
    SweepArea(RunArgs),
    /// Sweep expected delay over capacity at matched load (b = C)
    SweepCapacity(RunArgs),
    /// Monte Carlo estimate alongside the analytic value
    Simulate(RunArgs),
    /// Cross-check closed form, direct series, and simulator; exit 3 on failure
    Validate(RunArgs),
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Eval(_) => Mode::Eval,
            Command::SweepArea(_) => Mode::SweepArea,
            Command::SweepCapacity(_) => Mode::SweepMatchedCapacity,
            Command::Simulate(_) => Mode::Simulate,
            Command::Validate(_) => Mode::Validate,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Eval(a)
            | Command::SweepArea(a)
            | Command::SweepCapacity(a)
            | Command::Simulate(a)
            | Command::Validate(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// User density in users per m²
    #[arg(long, value_name = "REAL")]
    lambda_u: Option<f64>,
    /// Cell area in m² (eval and simulate)
    #[arg(long, value_name = "M2")]
    area: Option<f64>,
    /// Flow table capacity; repeat the flag for several curves
    #[arg(long, value_name = "N")]
    capacity: Vec<u64>,
    /// Controller round-trip in seconds (1.0 keeps outputs normalized)
    #[arg(long, value_name = "SECONDS")]
    d_ctrl: Option<f64>,
    /// Area grid lower edge in m²
    #[arg(long, value_name = "M2")]
    area_min: Option<f64>,
    /// Area grid upper edge in m²
    #[arg(long, value_name = "M2")]
    area_max: Option<f64>,
    /// Number of area grid points
    #[arg(long, value_name = "N")]
    points: Option<usize>,
    /// Log-spaced area grid (the default); pass `--log false` for linear
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    log: Option<bool>,
    /// Capacity grid lower edge (matched-load sweep)
    #[arg(long, value_name = "N")]
    c_min: Option<u64>,
    /// Capacity grid upper edge (matched-load sweep)
    #[arg(long, value_name = "N")]
    c_max: Option<u64>,
    /// Monte Carlo slots; on a sweep this attaches mc columns per row
    #[arg(long, value_name = "N")]
    slots: Option<u64>,
    /// Monte Carlo seed; equal seeds reproduce output bytes exactly
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Relative truncation tolerance of the direct series
    #[arg(long, value_name = "REAL")]
    rel_tol: Option<f64>,
    /// Integration constant: corrected | paper-literal
    #[arg(long, value_name = "MODE")]
    constant_mode: Option<String>,
    /// Monte Carlo estimator: packet-level | conditional
    #[arg(long, value_name = "KIND")]
    estimator: Option<String>,
    /// Directory for output files; stdout-only when omitted
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// JSON config file following the SweepSpec schema; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Skip the SVG chart
    #[arg(long)]
    no_plot: bool,
}

fn load_config(path: &Path) -> Result<(SweepSpec, bool)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::InvalidInput {
        field: "config",
        reason: format!("{}: {e}", path.display()),
    })?;
    // Whether the file *explicitly* picked a mode decides the conflict
    // check below; a file without one works under any subcommand.
    let mode_given = value.get("mode").is_some();
    let spec: SweepSpec = serde_json::from_value(value).map_err(|e| Error::InvalidInput {
        field: "config",
        reason: format!("{}: {e}", path.display()),
    })?;
    Ok((spec, mode_given))
}

fn default_sim_for(mode: Mode) -> SimConfig {
    match mode {
        // The validation run spreads its budget over ten configurations,
        // so it gets a larger default than a single-point simulation.
        Mode::Validate => SimConfig {
            slots: 200_000,
            ..SimConfig::default()
        },
        _ => SimConfig::default(),
    }
}

fn build_spec(mode: Mode, args: &RunArgs) -> Result<SweepSpec> {
    let (mut spec, mode_given) = match &args.config {
        Some(path) => load_config(path)?,
        None => (SweepSpec::default(), false),
    };
    if mode_given && spec.mode != mode {
        return Err(Error::InvalidInput {
            field: "mode",
            reason: format!(
                "config file requests `{}` but the subcommand is `{mode}`",
                spec.mode
            ),
        });
    }
    spec.mode = mode;

    if let Some(v) = args.lambda_u {
        spec.lambda_u = v;
    }
    if let Some(v) = args.d_ctrl {
        spec.d_ctrl = v;
    }
    if let Some(v) = args.area {
        spec.area = Some(v);
    }
    if !args.capacity.is_empty() {
        spec.capacities = args.capacity.clone();
    }
    if let Some(v) = args.area_min {
        spec.area_grid.min = v;
    }
    if let Some(v) = args.area_max {
        spec.area_grid.max = v;
    }
    if let Some(v) = args.points {
        spec.area_grid.points = v;
    }
    if let Some(v) = args.log {
        spec.area_grid.spacing = if v { Spacing::Log } else { Spacing::Linear };
    }
    if let Some(v) = args.c_min {
        spec.capacity_grid.min = v;
    }
    if let Some(v) = args.c_max {
        spec.capacity_grid.max = v;
    }
    if let Some(v) = args.rel_tol {
        spec.tolerance.rel_tol = v;
    }
    if let Some(raw) = &args.constant_mode {
        spec.constant_mode = raw.parse()?;
    }

    let sampling_mode = matches!(mode, Mode::Simulate | Mode::Validate);
    let sim_flag_given = args.slots.is_some() || args.seed.is_some() || args.estimator.is_some();
    if sim_flag_given || (sampling_mode && spec.sim.is_none()) {
        let mut sim = spec.sim.unwrap_or_else(|| default_sim_for(mode));
        if let Some(v) = args.slots {
            sim.slots = v;
        }
        if let Some(v) = args.seed {
            sim.seed = v;
        }
        if let Some(raw) = &args.estimator {
            sim.estimator = raw.parse()?;
        }
        spec.sim = Some(sim);
    }
    Ok(spec)
}

fn execute(command: &Command) -> Result<u8> {
    let args = command.args();
    let mode = command.mode();
    let spec = build_spec(mode, args)?;

    if mode == Mode::Validate {
        let report = run_validate(&spec)?;
        if let Some(dir) = &args.out_dir {
            for path in emit_outputs(&[], Some(&report), &spec, dir, args.no_plot)? {
                println!("{}", path.display());
            }
        } else {
            let body = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{body}");
        }
        eprintln!(
            "closed vs direct {:.3e} (tol {:.0e}); mc {:.2} sigma (tol {}); {}",
            report.max_rel_dev_closed_vs_direct,
            report.closed_vs_direct_tolerance,
            report.mc_max_sigma,
            report.mc_sigma_tolerance,
            if report.passed { "PASS" } else { "FAIL" }
        );
        return Ok(if report.passed { 0 } else { 3 });
    }

    let rows = match mode {
        Mode::Eval => run_eval(&spec)?,
        Mode::SweepArea => run_sweep_area(&spec)?,
        Mode::SweepMatchedCapacity => run_sweep_matched_capacity(&spec)?,
        Mode::Simulate => run_simulate(&spec)?,
        Mode::Validate => unreachable!("handled above"),
    };
    if let Some(dir) = &args.out_dir {
        for path in emit_outputs(&rows, None, &spec, dir, args.no_plot)? {
            println!("{}", path.display());
        }
    } else {
        print!("{}", rows_to_csv(&sorted_rows(&rows)));
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidInput { .. } => 1,
                Error::NonConvergence { .. } | Error::CancellationLoss { .. } => 2,
                Error::Io { .. } => 4,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowdelay::model::ConstantMode;
    use flowdelay::sim::Estimator;
    use std::io::Write as _;

    fn args() -> RunArgs {
        RunArgs {
            lambda_u: None,
            area: None,
            capacity: vec![],
            d_ctrl: None,
            area_min: None,
            area_max: None,
            points: None,
            log: None,
            c_min: None,
            c_max: None,
            slots: None,
            seed: None,
            rel_tol: None,
            constant_mode: None,
            estimator: None,
            out_dir: None,
            config: None,
            no_plot: false,
        }
    }

    #[test]
    fn flags_override_config_values() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"lambda_u": 0.5, "d_ctrl": 2.0}}"#).unwrap();
        let spec = build_spec(
            Mode::SweepArea,
            &RunArgs {
                lambda_u: Some(0.25),
                config: Some(file.path().to_path_buf()),
                ..args()
            },
        )
        .unwrap();
        assert_eq!(spec.lambda_u, 0.25, "flag wins");
        assert_eq!(spec.d_ctrl, 2.0, "config survives where no flag given");
        assert_eq!(spec.mode, Mode::SweepArea);
    }

    #[test]
    fn config_mode_conflicts_with_subcommand() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"mode": "validate"}}"#).unwrap();
        let err = build_spec(
            Mode::Eval,
            &RunArgs {
                config: Some(file.path().to_path_buf()),
                ..args()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput { field: "mode", .. }));

        // Same file under the matching subcommand is fine.
        build_spec(
            Mode::Validate,
            &RunArgs {
                config: Some(file.path().to_path_buf()),
                ..args()
            },
        )
        .unwrap();
    }

    #[test]
    fn config_without_mode_adopts_the_subcommand() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"capacities": [7]}}"#).unwrap();
        let spec = build_spec(
            Mode::SweepMatchedCapacity,
            &RunArgs {
                config: Some(file.path().to_path_buf()),
                ..args()
            },
        )
        .unwrap();
        assert_eq!(spec.mode, Mode::SweepMatchedCapacity);
        assert_eq!(spec.capacities, vec![7]);
    }

    #[test]
    fn sampling_modes_materialize_sim_defaults() {
        let spec = build_spec(Mode::Validate, &args()).unwrap();
        assert_eq!(spec.sim.unwrap().slots, 200_000);
        let spec = build_spec(Mode::Simulate, &args()).unwrap();
        assert_eq!(spec.sim.unwrap().slots, 100_000);
        let spec = build_spec(Mode::SweepArea, &args()).unwrap();
        assert!(spec.sim.is_none(), "sweeps sample only when asked");
        let spec = build_spec(
            Mode::SweepArea,
            &RunArgs {
                seed: Some(5),
                ..args()
            },
        )
        .unwrap();
        assert_eq!(spec.sim.unwrap().seed, 5);
    }

    #[test]
    fn enum_flags_parse_or_reject() {
        let spec = build_spec(
            Mode::Eval,
            &RunArgs {
                constant_mode: Some("paper-literal".into()),
                estimator: Some("conditional".into()),
                ..args()
            },
        )
        .unwrap();
        assert_eq!(spec.constant_mode, ConstantMode::PaperLiteral);
        assert_eq!(spec.sim.unwrap().estimator, Estimator::Conditional);

        let err = build_spec(
            Mode::Eval,
            &RunArgs {
                constant_mode: Some("canonical".into()),
                ..args()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput { .. }));
    }

    #[test]
    fn cli_shape_is_sound() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
