//! Command-line driver: simulate storage sequences, optimize the control
//! amplitude, run the crystal-dimension sweeps, and check the invariants.
//!
//! All tables are CSV, every command drops a JSON summary embedding the full
//! input configuration, and files are written atomically.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cavity_eit::config::{load_config, RunConfig, SimConfig};
use cavity_eit::dynamics::{resolve_grid, run_sequence, SimulationResult};
use cavity_eit::experiments::{
    compare_modes, default_radius_grid, invariance_checks, optimize_amplitude, sweep_dimensions,
    sweep_radius, OptimizeOptions, SweepRow,
};
use cavity_eit::pulses::ADIABATICITY_WARN_THRESHOLD;
use cavity_eit::report::{
    density_csv, shell_snapshot_csv, sweep_csv, time_series_csv, write_csv, write_summary,
    RunSummary,
};
use cavity_eit::validate::run_property_suites;

/// Robustness bounds reported by `validate --robustness`: decoupling the
/// write/read amplitudes, varying the pulse duration by +-50%, and doubling
/// the storage time must not move the total efficiency beyond these.
const DECOUPLING_GAIN_MAX: f64 = 0.005;
const DURATION_SENSITIVITY_MAX: f64 = 0.01;
const STORAGE_DOUBLING_MAX: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "cavity-eit",
    version,
    about = "Cavity-EIT light storage in cylindrical ion crystals: sequence simulation, pulse optimization, and dimension sweeps"
)]
struct Cli {
    /// Run configuration (TOML); omitted sections take the baseline
    /// experimental parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: the config's output.dir, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cap the worker-pool parallelism used by sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Reserved: every computation here is deterministic, no seed exists.
    #[arg(long, global = true)]
    seedless: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct AmplitudeArgs {
    /// Lower edge of the control-amplitude bracket.
    #[arg(long, default_value_t = 0.2)]
    a_min: f64,
    /// Upper edge of the control-amplitude bracket.
    #[arg(long, default_value_t = 8.0)]
    a_max: f64,
    /// Convergence width of the golden-section search.
    #[arg(long, default_value_t = 0.02)]
    tol_a: f64,
}

impl AmplitudeArgs {
    fn options(&self) -> Result<OptimizeOptions> {
        if !(self.a_min > 0.0 && self.a_min < self.a_max) {
            bail!("need 0 < a_min < a_max (got {} and {})", self.a_min, self.a_max);
        }
        if !(self.tol_a > 0.0) {
            bail!("tol_a must be positive (got {})", self.tol_a);
        }
        Ok(OptimizeOptions { bracket: (self.a_min, self.a_max), tol: self.tol_a })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one write-store-read sequence; writes the time series, the shell
    /// snapshot after writing, and a summary record.
    Simulate,
    /// Golden-section search of the control amplitude maximizing the total
    /// efficiency.
    Optimize(AmplitudeArgs),
    /// Efficiency versus crystal radius, amplitude-optimized per radius.
    SweepRadius(SweepRadiusArgs),
    /// Optimized efficiency over the length x radius plane.
    SweepGrid(SweepGridArgs),
    /// Radial excitation density after writing, with the squared probe
    /// profile as reference.
    Density,
    /// Run the property suites; exits nonzero if any check fails.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SweepRadiusArgs {
    #[command(flatten)]
    amplitude: AmplitudeArgs,
    /// Explicit radius grid in micrometers (comma-separated); overrides the
    /// r-*-wp flags.
    #[arg(long, value_delimiter = ',')]
    radii_um: Option<Vec<f64>>,
    /// Radius grid in units of the probe waist: start.
    #[arg(long, default_value_t = 0.1)]
    r_min_wp: f64,
    /// Radius grid in units of the probe waist: end.
    #[arg(long, default_value_t = 3.0)]
    r_max_wp: f64,
    /// Radius grid in units of the probe waist: step.
    #[arg(long, default_value_t = 0.1)]
    r_step_wp: f64,
    /// Sweep all four curves: TEM00 and LG01 probes, extended and
    /// finite-waist control.
    #[arg(long)]
    compare_modes: bool,
}

#[derive(Args)]
struct SweepGridArgs {
    #[command(flatten)]
    amplitude: AmplitudeArgs,
    /// Crystal lengths in millimeters.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0])]
    l_mm: Vec<f64>,
    /// Crystal radii in micrometers.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 20.0, 35.0, 50.0, 75.0, 100.0, 150.0, 200.0])]
    r_um: Vec<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Also run the slower temporal-robustness checks (amplitude decoupling,
    /// pulse-duration variation, storage doubling).
    #[arg(long)]
    robustness: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if cli.seedless {
        // accepted for interface stability; nothing here is stochastic
        log::debug!("--seedless: all computations are deterministic by construction");
    }
    let run_config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let sim = run_config.to_sim_config()?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| run_config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            bail!("--workers must be at least 1");
        }
        pool = pool.num_threads(workers);
    }
    let pool = pool.build().context("building the worker pool")?;

    pool.install(|| match cli.command {
        Command::Simulate => cmd_simulate(&run_config, &sim, &out_dir),
        Command::Optimize(ref args) => cmd_optimize(&run_config, &sim, &out_dir, args),
        Command::SweepRadius(ref args) => cmd_sweep_radius(&run_config, &sim, &out_dir, args),
        Command::SweepGrid(ref args) => cmd_sweep_grid(&run_config, &sim, &out_dir, args),
        Command::Density => cmd_density(&run_config, &sim, &out_dir),
        Command::Validate(ref args) => cmd_validate(&sim, args),
    })
}

fn warn_adiabaticity(result: &SimulationResult) {
    if result.adiabaticity < ADIABATICITY_WARN_THRESHOLD {
        eprintln!(
            "warning: adiabaticity figure 2TCgamma = {:.1} is below {ADIABATICITY_WARN_THRESHOLD}",
            result.adiabaticity
        );
    }
}

fn cmd_simulate(config: &RunConfig, sim: &SimConfig, out_dir: &Path) -> Result<ExitCode> {
    let result = run_sequence(sim).context("simulation failed")?;
    warn_adiabaticity(&result);
    let grid = resolve_grid(sim)?;

    let series_path = out_dir.join("time_series.csv");
    let shells_path = out_dir.join("shells.csv");
    let summary_path = out_dir.join("summary.json");
    write_csv(&series_path, &time_series_csv(&result))?;
    write_csv(&shells_path, &shell_snapshot_csv(&result, &grid))?;
    write_summary(&summary_path, &RunSummary::new(&result, config))?;

    println!("eta_w   = {:.6}", result.eta_w);
    println!("eta_r   = {:.6}", result.eta_r);
    println!("eta_tot = {:.6}", result.eta_tot);
    println!(
        "N_eff = {:.1}, C = {:.3}, n_shells = {}, norm residual = {:.2e}",
        result.n_eff, result.cooperativity, result.n_shells, result.norm_residual
    );
    for path in [&series_path, &shells_path, &summary_path] {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    a_opt: f64,
    eta_tot: f64,
    eta_w: f64,
    eta_r: f64,
    at_bound: bool,
    evaluations: usize,
    bracket: (f64, f64),
    tol_a: f64,
    config: &'a RunConfig,
}

fn cmd_optimize(
    config: &RunConfig,
    sim: &SimConfig,
    out_dir: &Path,
    args: &AmplitudeArgs,
) -> Result<ExitCode> {
    let opts = args.options()?;
    let optimum = optimize_amplitude(sim, &opts).context("amplitude optimization failed")?;
    if optimum.at_bound {
        eprintln!(
            "warning: optimum A = {:.3} is within {} of the bracket [{}, {}]",
            optimum.amplitude, opts.tol, opts.bracket.0, opts.bracket.1
        );
    }
    let summary = OptimizeSummary {
        a_opt: optimum.amplitude,
        eta_tot: optimum.result.eta_tot,
        eta_w: optimum.result.eta_w,
        eta_r: optimum.result.eta_r,
        at_bound: optimum.at_bound,
        evaluations: optimum.evaluations,
        bracket: opts.bracket,
        tol_a: opts.tol,
        config,
    };
    let path = out_dir.join("optimum.json");
    write_summary(&path, &summary)?;
    println!("A_opt = {:.4}", optimum.amplitude);
    println!("eta_tot = {:.6} ({} evaluations)", optimum.efficiency, optimum.evaluations);
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    command: &'static str,
    radii_um: Vec<f64>,
    lengths_mm: Option<Vec<f64>>,
    bracket: (f64, f64),
    tol_a: f64,
    rows: usize,
    failed_rows: usize,
    config: &'a RunConfig,
}

fn finish_sweep(
    rows: &[SweepRow],
    table_path: &Path,
    summary_path: &Path,
    summary: &SweepSummary,
) -> Result<ExitCode> {
    write_csv(table_path, &sweep_csv(rows))?;
    write_summary(summary_path, summary)?;
    println!("wrote {} ({} rows)", table_path.display(), rows.len());
    println!("wrote {}", summary_path.display());
    if summary.failed_rows > 0 {
        eprintln!(
            "warning: {} of {} sweep points failed; see the status column",
            summary.failed_rows,
            rows.len()
        );
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep_radius(
    config: &RunConfig,
    sim: &SimConfig,
    out_dir: &Path,
    args: &SweepRadiusArgs,
) -> Result<ExitCode> {
    let opts = args.amplitude.options()?;
    let radii: Vec<f64> = match &args.radii_um {
        Some(list) => list.iter().map(|&r| r * 1e-6).collect(),
        None => {
            if !(args.r_step_wp > 0.0 && args.r_min_wp > 0.0 && args.r_max_wp >= args.r_min_wp) {
                bail!("need 0 < r-min-wp <= r-max-wp and a positive r-step-wp");
            }
            if (args.r_min_wp, args.r_max_wp, args.r_step_wp) == (0.1, 3.0, 0.1) {
                default_radius_grid(sim.probe.waist)
            } else {
                let steps = ((args.r_max_wp - args.r_min_wp) / args.r_step_wp).round() as usize;
                (0..=steps)
                    .map(|k| (args.r_min_wp + k as f64 * args.r_step_wp) * sim.probe.waist)
                    .filter(|&r| r <= (args.r_max_wp + 1e-9) * sim.probe.waist)
                    .collect()
            }
        }
    };
    if radii.is_empty() {
        bail!("radius grid is empty");
    }
    if radii.iter().any(|&r| r <= 0.0) {
        bail!("radius grid must be positive");
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        bail!("radius grid must be strictly increasing");
    }

    let rows = if args.compare_modes {
        compare_modes(sim, &radii, &opts)
    } else {
        sweep_radius(sim, &radii, &opts)
    };
    let failed = rows.iter().filter(|r| !r.status.is_ok()).count();
    let summary = SweepSummary {
        command: "sweep-radius",
        radii_um: radii.iter().map(|r| r * 1e6).collect(),
        lengths_mm: None,
        bracket: opts.bracket,
        tol_a: opts.tol,
        rows: rows.len(),
        failed_rows: failed,
        config,
    };
    finish_sweep(
        &rows,
        &out_dir.join("sweep_radius.csv"),
        &out_dir.join("sweep_radius.summary.json"),
        &summary,
    )
}

fn cmd_sweep_grid(
    config: &RunConfig,
    sim: &SimConfig,
    out_dir: &Path,
    args: &SweepGridArgs,
) -> Result<ExitCode> {
    let opts = args.amplitude.options()?;
    if args.l_mm.is_empty() || args.r_um.is_empty() {
        bail!("length and radius grids must be nonempty");
    }
    let lengths: Vec<f64> = args.l_mm.iter().map(|&l| l * 1e-3).collect();
    let radii: Vec<f64> = args.r_um.iter().map(|&r| r * 1e-6).collect();
    if lengths.iter().any(|&l| l <= 0.0) || radii.iter().any(|&r| r <= 0.0) {
        bail!("lengths and radii must be positive");
    }
    let rows = sweep_dimensions(sim, &lengths, &radii, &opts);
    let failed = rows.iter().filter(|r| !r.status.is_ok()).count();
    let summary = SweepSummary {
        command: "sweep-grid",
        radii_um: args.r_um.clone(),
        lengths_mm: Some(args.l_mm.clone()),
        bracket: opts.bracket,
        tol_a: opts.tol,
        rows: rows.len(),
        failed_rows: failed,
        config,
    };
    finish_sweep(
        &rows,
        &out_dir.join("sweep_grid.csv"),
        &out_dir.join("sweep_grid.summary.json"),
        &summary,
    )
}

fn cmd_density(config: &RunConfig, sim: &SimConfig, out_dir: &Path) -> Result<ExitCode> {
    let result = run_sequence(sim).context("simulation failed")?;
    warn_adiabaticity(&result);
    let grid = resolve_grid(sim)?;
    let density_path = out_dir.join("density.csv");
    let summary_path = out_dir.join("density.summary.json");
    write_csv(&density_path, &density_csv(&result, &grid, &sim.probe))?;
    write_summary(&summary_path, &RunSummary::new(&result, config))?;
    println!("stored excitation = {:.6} (eta_w = {:.6})", result.stored_write, result.eta_w);
    println!("wrote {}", density_path.display());
    println!("wrote {}", summary_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(sim: &SimConfig, args: &ValidateArgs) -> Result<ExitCode> {
    let report = run_property_suites(sim);
    for check in &report.checks {
        println!(
            "[{}] {}: measured {:.3e}, threshold {:.1e} ({})",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.measured,
            check.threshold,
            check.detail
        );
    }
    let mut all_passed = report.passed();

    if args.robustness {
        let invariance = invariance_checks(sim, &OptimizeOptions::default())
            .context("robustness checks failed to run")?;
        let results = [
            ("amplitude-decoupling-gain", invariance.decoupling_improvement, DECOUPLING_GAIN_MAX),
            (
                "pulse-duration-sensitivity",
                invariance.duration_sensitivity,
                DURATION_SENSITIVITY_MAX,
            ),
            ("storage-doubling-change", invariance.storage_doubling_change, STORAGE_DOUBLING_MAX),
        ];
        for (name, measured, threshold) in results {
            let passed = measured <= threshold;
            println!(
                "[{}] {name}: measured {measured:.3e}, threshold {threshold:.1e} (A_opt = {:.3})",
                if passed { "PASS" } else { "FAIL" },
                invariance.a_opt
            );
            all_passed &= passed;
        }
    }

    if all_passed {
        println!("all validation checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("validation FAILED");
        Ok(ExitCode::FAILURE)
    }
}
