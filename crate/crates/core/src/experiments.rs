//! Control-amplitude optimization and the parameter sweeps over crystal
//! dimensions and mode choices.
//!
//! Every sweep point is an independent full simulation; points run on a rayon
//! worker pool and rows are aggregated by input index, so tables are
//! deterministic and identical for any worker count.

use rayon::prelude::*;

use crate::config::{ControlKind, SimConfig};
use crate::dynamics::{resolve_grid, run_sequence, SimulationError, SimulationResult};
use crate::model::{cooperativity, effective_atom_number, ModeKind, ModeProfile};

/// Default golden-section bracket for the control amplitude scale factor.
pub const DEFAULT_AMPLITUDE_BRACKET: (f64, f64) = (0.2, 8.0);
/// Default convergence width on the amplitude.
pub const DEFAULT_AMPLITUDE_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub bracket: (f64, f64),
    pub tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { bracket: DEFAULT_AMPLITUDE_BRACKET, tol: DEFAULT_AMPLITUDE_TOL }
    }
}

/// Radius grid used for the efficiency-versus-radius curves:
/// `R/w_p in {0.1, 0.2, ..., 3.0}`.
pub fn default_radius_grid(waist: f64) -> Vec<f64> {
    (1..=30).map(|k| 0.1 * k as f64 * waist).collect()
}

/// Golden-section search for the maximum of a unimodal function on
/// `[lo, hi]`; returns the best evaluated point once the bracket is narrower
/// than `tol`.
pub fn golden_section_max<F, E>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64, usize), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    assert!(lo < hi && tol > 0.0, "need a proper bracket and tolerance");
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut evals = 2usize;
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
        evals += 1;
    }
    let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok((x, fx, evals))
}

#[derive(Debug, Clone)]
pub struct AmplitudeOptimum {
    pub amplitude: f64,
    pub efficiency: f64,
    /// The maximizer landed within `tol` of a bracket edge; the bracket was
    /// probably too narrow.
    pub at_bound: bool,
    pub evaluations: usize,
    /// Full simulation at the optimum.
    pub result: SimulationResult,
}

/// Maximize the total efficiency over the control amplitude, with
/// `A_w = A_r = A`.
///
/// Write and read efficiencies are not separately meaningful figures of merit
/// once the control profile couples the shells, so the total efficiency is
/// the optimization target throughout.
pub fn optimize_amplitude(
    cfg: &SimConfig,
    opts: &OptimizeOptions,
) -> Result<AmplitudeOptimum, SimulationError> {
    let (lo, hi) = opts.bracket;
    let mut best: Option<(f64, f64, SimulationResult)> = None;
    let (_, _, evaluations) = golden_section_max(
        |a| -> Result<f64, SimulationError> {
            let result = run_sequence(&cfg.clone().with_amplitudes(a, a))?;
            let eta = result.eta_tot;
            if best.as_ref().is_none_or(|(_, best_eta, _)| eta > *best_eta) {
                best = Some((a, eta, result));
            }
            Ok(eta)
        },
        lo,
        hi,
        opts.tol,
    )?;
    // the best evaluated point is the reported optimum
    let (amplitude, efficiency, result) = best.expect("at least two evaluations");
    let at_bound = amplitude - lo <= opts.tol || hi - amplitude <= opts.tol;
    if at_bound {
        log::warn!(
            "amplitude optimum A = {amplitude:.3} sits within {:.3} of the bracket [{lo}, {hi}]",
            opts.tol
        );
    }
    Ok(AmplitudeOptimum { amplitude, efficiency, at_bound, evaluations, result })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

impl RowStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RowStatus::Ok)
    }

    pub fn label(&self) -> String {
        match self {
            RowStatus::Ok => "ok".to_string(),
            // commas would break the table
            RowStatus::Failed(msg) => format!("error: {}", msg.replace(',', ";")),
        }
    }
}

/// One point of a sweep table, keyed by (mode, configuration, L, R).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub probe_mode: ModeKind,
    pub control: ControlKind,
    pub length_mm: f64,
    pub radius_um: f64,
    pub n_shells: usize,
    pub n_eff: f64,
    pub cooperativity: f64,
    pub a_opt: f64,
    pub eta_w: f64,
    pub eta_r: f64,
    pub eta_tot: f64,
    pub status: RowStatus,
}

/// Evaluate one sweep point: amplitude-optimize, then record the optimum.
/// Failures are recorded in the row; the sweep carries on.
fn sweep_point(cfg: &SimConfig, opts: &OptimizeOptions) -> SweepRow {
    let (n_eff, coop, n_shells) = match resolve_grid(cfg) {
        Ok(grid) => {
            let n_eff = effective_atom_number(&grid, &cfg.probe);
            let coop = cooperativity(&cfg.rates, n_eff).unwrap_or(f64::NAN);
            (n_eff, coop, grid.n_shells())
        }
        Err(_) => (f64::NAN, f64::NAN, 0),
    };
    let mut row = SweepRow {
        probe_mode: cfg.probe.kind,
        control: cfg.control,
        length_mm: cfg.geometry.length * 1e3,
        radius_um: cfg.geometry.radius * 1e6,
        n_shells,
        n_eff,
        cooperativity: coop,
        a_opt: f64::NAN,
        eta_w: f64::NAN,
        eta_r: f64::NAN,
        eta_tot: f64::NAN,
        status: RowStatus::Ok,
    };
    match optimize_amplitude(cfg, opts) {
        Ok(opt) => {
            row.a_opt = opt.amplitude;
            row.eta_w = opt.result.eta_w;
            row.eta_r = opt.result.eta_r;
            row.eta_tot = opt.result.eta_tot;
        }
        Err(err) => row.status = RowStatus::Failed(err.to_string()),
    }
    row
}

/// Efficiency versus crystal radius, amplitude-optimized per radius.
pub fn sweep_radius(base: &SimConfig, radii: &[f64], opts: &OptimizeOptions) -> Vec<SweepRow> {
    radii
        .par_iter()
        .map(|&radius| sweep_point(&base.clone().with_radius(radius), opts))
        .collect()
}

/// Full Cartesian product over crystal length and radius, length-major.
pub fn sweep_dimensions(
    base: &SimConfig,
    lengths: &[f64],
    radii: &[f64],
    opts: &OptimizeOptions,
) -> Vec<SweepRow> {
    let points: Vec<(f64, f64)> = lengths
        .iter()
        .flat_map(|&l| radii.iter().map(move |&r| (l, r)))
        .collect();
    points
        .par_iter()
        .map(|&(length, radius)| {
            sweep_point(&base.clone().with_length(length).with_radius(radius), opts)
        })
        .collect()
}

/// The four mode/configuration curves over a radius grid: TEM00 and LG01,
/// each with an extended and a probe-matched control field.
pub fn compare_modes(base: &SimConfig, radii: &[f64], opts: &OptimizeOptions) -> Vec<SweepRow> {
    let waist = base.probe.waist;
    let combos = [
        (ModeKind::Tem00, ControlKind::Uniform),
        (ModeKind::Tem00, ControlKind::SameAsProbe),
        (ModeKind::Lg01, ControlKind::Uniform),
        (ModeKind::Lg01, ControlKind::SameAsProbe),
    ];
    let points: Vec<(ModeKind, ControlKind, f64)> = combos
        .iter()
        .flat_map(|&(mode, control)| radii.iter().map(move |&r| (mode, control, r)))
        .collect();
    points
        .par_iter()
        .map(|&(mode, control, radius)| {
            let mut cfg = base.clone().with_radius(radius);
            cfg.probe = match mode {
                ModeKind::Tem00 => ModeProfile::tem00(waist),
                ModeKind::Lg01 => ModeProfile::lg01(waist),
                ModeKind::Uniform => ModeProfile::uniform(),
            };
            cfg.control = control;
            sweep_point(&cfg, opts)
        })
        .collect()
}

/// Robustness of an optimized configuration against the temporal knobs the
/// optimal-control derivation fixes.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub a_opt: f64,
    pub eta_reference: f64,
    /// Max gain in total efficiency from decoupling `A_w` and `A_r` on a grid
    /// around the joint optimum.
    pub decoupling_improvement: f64,
    /// Max change in total efficiency when the pulse duration varies by
    /// +-50% (re-deriving the control pulse for the new duration).
    pub duration_sensitivity: f64,
    /// Change in total efficiency when the storage time doubles.
    pub storage_doubling_change: f64,
}

/// Amplitude factors probed around the joint optimum for the decoupling
/// check.
const DECOUPLING_FACTORS: [f64; 3] = [0.85, 1.0, 1.15];

pub fn invariance_checks(
    cfg: &SimConfig,
    opts: &OptimizeOptions,
) -> Result<InvarianceReport, SimulationError> {
    let optimum = optimize_amplitude(cfg, opts)?;
    let a = optimum.amplitude;
    let eta_reference = optimum.efficiency;

    let mut amp_points = Vec::new();
    for &fw in &DECOUPLING_FACTORS {
        for &fr in &DECOUPLING_FACTORS {
            if fw == 1.0 && fr == 1.0 {
                continue;
            }
            amp_points.push((a * fw, a * fr));
        }
    }
    let decoupling_improvement = amp_points
        .par_iter()
        .map(|&(aw, ar)| {
            run_sequence(&cfg.clone().with_amplitudes(aw, ar)).map(|r| r.eta_tot - eta_reference)
        })
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(0.0f64, f64::max);

    let t = cfg.schedule.pulse_duration;
    let duration_sensitivity = [0.5 * t, 1.5 * t]
        .par_iter()
        .map(|&t_new| {
            run_sequence(&cfg.clone().with_pulse_duration(t_new).with_amplitudes(a, a))
                .map(|r| (r.eta_tot - eta_reference).abs())
        })
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(0.0f64, f64::max);

    let mut stretched = cfg.clone().with_amplitudes(a, a);
    let storage = stretched.schedule.storage_time();
    stretched.schedule.read_start += storage;
    stretched.schedule.t_end += 2.0 * storage;
    let storage_doubling_change = (run_sequence(&stretched)?.eta_tot - eta_reference).abs();

    Ok(InvarianceReport {
        a_opt: a,
        eta_reference,
        decoupling_improvement,
        duration_sensitivity,
        storage_doubling_change,
    })
}
