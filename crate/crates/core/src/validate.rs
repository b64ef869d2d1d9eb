//! Runtime property suites: the structural invariants of the dynamics, run
//! against a concrete configuration and reported check by check.

use num_complex::Complex64;

use crate::config::SimConfig;
use crate::dynamics::{run_sequence, run_sequence_collective};
use crate::ode::integrate_sampled;

/// Excitation-balance defect allowed with `gamma = gamma0 = 0`.
pub const NORM_CONSERVATION_TOL: f64 = 1e-6;
/// Total-efficiency gap allowed between the shell model and the collective
/// reduction for a uniform control field.
pub const ORACLE_EQUIVALENCE_TOL: f64 = 1e-6;
/// Efficiency change allowed under complex rescaling of the input.
pub const LINEARITY_TOL: f64 = 1e-10;
/// Total-efficiency change allowed when the shell count doubles.
pub const GRID_CONVERGENCE_TOL: f64 = 1e-4;
/// Empty-cavity step response must match the analytic solution to within
/// this multiple of the relative integrator tolerance.
pub const STEP_RESPONSE_TOL_FACTOR: f64 = 1000.0;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn evaluate(name: &'static str, measured: f64, threshold: f64, detail: String) -> Self {
        Self { name, passed: measured.is_finite() && measured <= threshold, measured, threshold, detail }
    }

    fn failure(name: &'static str, threshold: f64, detail: String) -> Self {
        Self { name, passed: false, measured: f64::NAN, threshold, detail }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Run the full property suite against a base configuration.
pub fn run_property_suites(base: &SimConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    report.checks.push(norm_conservation(base));
    report.checks.push(oracle_equivalence(base));
    report.checks.push(linearity(base));
    report.checks.push(grid_convergence(base));
    report.checks.push(empty_cavity_step_response(base));
    report
}

/// With both atomic decay rates zero, the running excitation balance must
/// vanish at every reporting time.
fn norm_conservation(base: &SimConfig) -> Check {
    const NAME: &str = "norm-conservation";
    let mut cfg = base.clone();
    cfg.rates.gamma = 0.0;
    cfg.rates.gamma0 = 0.0;
    match run_sequence(&cfg) {
        Ok(result) => Check::evaluate(
            NAME,
            result.norm_residual,
            NORM_CONSERVATION_TOL,
            format!("max balance defect {:.3e} relative to the input energy", result.norm_residual),
        ),
        Err(err) => Check::failure(NAME, NORM_CONSERVATION_TOL, err.to_string()),
    }
}

/// For a uniform control profile the shell model must reproduce the
/// collective three-mode model.
fn oracle_equivalence(base: &SimConfig) -> Check {
    const NAME: &str = "shell-collective-equivalence";
    let mut cfg = base.clone();
    cfg.control = crate::config::ControlKind::Uniform;
    let shell = match run_sequence(&cfg) {
        Ok(r) => r,
        Err(err) => return Check::failure(NAME, ORACLE_EQUIVALENCE_TOL, err.to_string()),
    };
    let collective = match run_sequence_collective(&cfg) {
        Ok(r) => r,
        Err(err) => return Check::failure(NAME, ORACLE_EQUIVALENCE_TOL, err.to_string()),
    };
    let gap = (shell.eta_tot - collective.eta_tot).abs();
    Check::evaluate(
        NAME,
        gap,
        ORACLE_EQUIVALENCE_TOL,
        format!("eta_tot shell {:.9} vs collective {:.9}", shell.eta_tot, collective.eta_tot),
    )
}

/// The dynamics is linear: rescaling the input by a complex constant must
/// leave every efficiency unchanged.
fn linearity(base: &SimConfig) -> Check {
    const NAME: &str = "linearity-phase-invariance";
    let scale = Complex64::new(0.37, 1.2);
    let reference = match run_sequence(base) {
        Ok(r) => r,
        Err(err) => return Check::failure(NAME, LINEARITY_TOL, err.to_string()),
    };
    let scaled = match run_sequence(&base.clone().with_input_scale(scale)) {
        Ok(r) => r,
        Err(err) => return Check::failure(NAME, LINEARITY_TOL, err.to_string()),
    };
    let gap = (reference.eta_w - scaled.eta_w)
        .abs()
        .max((reference.eta_r - scaled.eta_r).abs())
        .max((reference.eta_tot - scaled.eta_tot).abs());
    Check::evaluate(
        NAME,
        gap,
        LINEARITY_TOL,
        format!("max efficiency change {gap:.3e} under input scale {scale}"),
    )
}

/// Doubling the shell count must leave the total efficiency unchanged within
/// the discretization budget.
fn grid_convergence(base: &SimConfig) -> Check {
    const NAME: &str = "grid-convergence";
    let n = base.shell_count();
    let coarse = match run_sequence(base) {
        Ok(r) => r,
        Err(err) => return Check::failure(NAME, GRID_CONVERGENCE_TOL, err.to_string()),
    };
    let fine_cfg = SimConfig { n_shells: Some(2 * n), ..base.clone() };
    let fine = match run_sequence(&fine_cfg) {
        Ok(r) => r,
        Err(err) => return Check::failure(NAME, GRID_CONVERGENCE_TOL, err.to_string()),
    };
    let gap = (fine.eta_tot - coarse.eta_tot).abs();
    Check::evaluate(
        NAME,
        gap,
        GRID_CONVERGENCE_TOL,
        format!("eta_tot changes by {gap:.3e} going from {n} to {} shells", 2 * n),
    )
}

/// Decoupled cavity driven by a constant input: the integrator must
/// reproduce `a(t) = sqrt(2 kappa) u (1 - e^(-kappa t)) / kappa`.
fn empty_cavity_step_response(base: &SimConfig) -> Check {
    const NAME: &str = "empty-cavity-step-response";
    let kappa = base.rates.kappa;
    let threshold = STEP_RESPONSE_TOL_FACTOR * base.integrator.rtol;
    let u = 1.0;
    let drive = (2.0 * kappa).sqrt() * u;
    let t_end = 6.0 / kappa;
    let grid: Vec<f64> = (0..=300).map(|k| t_end * k as f64 / 300.0).collect();
    let scale = drive / kappa;
    let mut worst = 0.0f64;
    let outcome = integrate_sampled(
        |_t, y, dy| {
            dy[0] = -kappa * y[0] + drive;
        },
        vec![Complex64::ZERO],
        &grid,
        &base.integrator,
        |_, t, y| {
            let reference = scale * (1.0 - (-kappa * t).exp());
            worst = worst.max((y[0].re - reference).abs() / scale);
        },
    );
    match outcome {
        Ok(_) => Check::evaluate(
            NAME,
            worst,
            threshold,
            format!("max relative deviation {worst:.3e} from the analytic step response"),
        ),
        Err(err) => Check::failure(NAME, threshold, err.to_string()),
    }
}
