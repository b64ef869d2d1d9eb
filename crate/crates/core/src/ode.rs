//! Adaptive Dormand-Prince 5(4) integrator for complex-valued linear systems,
//! with fourth-order dense output sampled on a caller-supplied grid.
//!
//! The right-hand side writes `dy/dt` into a caller-owned buffer, states are
//! flat `Vec<Complex64>`, and every accepted step feeds dense-output samples
//! to a visitor so callers never hold the full trajectory in memory.

use num_complex::Complex64;
use thiserror::Error;

/// Hard bounds on the relative tolerance accepted by the integrator.
pub const RTOL_RANGE: (f64, f64) = (1e-12, 1e-4);

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t:.6e} s")]
    StepSizeUnderflow { t: f64 },
    #[error("exceeded {max_steps} steps at t = {t:.6e} s")]
    MaxStepsExceeded { t: f64, max_steps: usize },
    #[error("relative tolerance {rtol:.3e} outside [{:.0e}, {:.0e}]", RTOL_RANGE.0, RTOL_RANGE.1)]
    InvalidTolerance { rtol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Relative local-error tolerance.
    pub rtol: f64,
    /// Absolute local-error tolerance, in units of the state components.
    pub atol: f64,
    /// Safety cap on the number of attempted steps.
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 10_000_000 }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.rtol >= RTOL_RANGE.0 && self.rtol <= RTOL_RANGE.1) {
            return Err(OdeError::InvalidTolerance { rtol: self.rtol });
        }
        Ok(())
    }
}

/// Bookkeeping returned by a completed integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub final_state: Vec<Complex64>,
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Sum of the accepted per-step absolute local-error estimates; an upper
    /// estimate of the accumulated integration error.
    pub error_estimate: f64,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Coefficients of the quartic dense-output interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 10.0;
const ORDER_EXPONENT: f64 = 0.2; // 1/5

/// Integrate `dy/dt = rhs(t, y)` from `t_grid[0]` to `t_grid.last()`,
/// invoking `on_sample(index, t, y)` for every grid time in order.
///
/// The grid must be strictly increasing; samples come from the integrator's
/// continuous extension, so the step sequence is governed purely by the error
/// control.
pub fn integrate_sampled<F, S>(
    mut rhs: F,
    y0: Vec<Complex64>,
    t_grid: &[f64],
    opts: &IntegratorOptions,
    mut on_sample: S,
) -> Result<Integration, OdeError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    S: FnMut(usize, f64, &[Complex64]),
{
    opts.validate()?;
    assert!(t_grid.len() >= 2, "need at least two grid times");
    assert!(
        t_grid.windows(2).all(|w| w[1] > w[0]),
        "reporting grid must be strictly increasing"
    );

    let dim = y0.len();
    let t0 = t_grid[0];
    let t_end = *t_grid.last().unwrap();
    let span = t_end - t0;

    let mut y = y0;
    let mut t = t0;
    let mut k: [Vec<Complex64>; 7] = std::array::from_fn(|_| vec![Complex64::ZERO; dim]);
    let mut y_stage = vec![Complex64::ZERO; dim];
    let mut y_next = vec![Complex64::ZERO; dim];
    let mut y_sample = vec![Complex64::ZERO; dim];

    on_sample(0, t0, &y);
    let mut next_sample = 1;

    rhs(t, &y, &mut k[0]);
    let mut evals = 1usize;

    let mut h = initial_step(&mut rhs, t, &y, &k[0].clone(), span, opts, &mut evals, &mut y_stage);

    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut error_estimate = 0.0f64;

    while t < t_end {
        if steps + rejected >= opts.max_steps {
            return Err(OdeError::MaxStepsExceeded { t, max_steps: opts.max_steps });
        }
        if h < 1e-14 * span.max(t.abs()) {
            return Err(OdeError::StepSizeUnderflow { t });
        }
        h = h.min(t_end - t);

        // Stages 2..7; stage 7 lands on (t + h, y_next) so k[6] doubles as the
        // FSAL derivative of the next step.
        for i in 1..7 {
            for (m, ys) in y_stage.iter_mut().enumerate() {
                let mut acc = Complex64::ZERO;
                for (j, kj) in k.iter().enumerate().take(i) {
                    acc += kj[m] * A[i][j];
                }
                *ys = y[m] + acc * h;
            }
            if i == 6 {
                y_next.copy_from_slice(&y_stage);
            }
            rhs(t + C[i] * h, &y_stage, &mut k[i]);
        }
        evals += 6;

        // Scaled error norm (RMS over components, complex magnitudes). A
        // non-finite estimate forces a rejection.
        let mut err_sq = 0.0f64;
        let mut err_abs = 0.0f64;
        let mut non_finite = false;
        for m in 0..dim {
            let mut e = Complex64::ZERO;
            for (j, kj) in k.iter().enumerate() {
                e += kj[m] * E[j];
            }
            let e_mag = (e * h).norm();
            if !e_mag.is_finite() {
                non_finite = true;
                break;
            }
            let weight = opts.atol + opts.rtol * y[m].norm().max(y_next[m].norm());
            if e_mag > 0.0 {
                let ratio = e_mag / weight;
                err_sq += ratio * ratio;
            }
            err_abs = err_abs.max(e_mag);
        }
        let err =
            if non_finite { f64::INFINITY } else { (err_sq / dim as f64).sqrt() };

        if err.is_finite() && err <= 1.0 {
            // Dense output over (t, t + h]: quartic interpolant through the
            // accepted stages (Hairer's continuous extension of DOPRI5).
            if next_sample < t_grid.len() && t_grid[next_sample] <= t + h {
                let mut rcont2 = vec![Complex64::ZERO; dim];
                let mut rcont3 = vec![Complex64::ZERO; dim];
                let mut rcont4 = vec![Complex64::ZERO; dim];
                let mut rcont5 = vec![Complex64::ZERO; dim];
                for m in 0..dim {
                    let ydiff = y_next[m] - y[m];
                    let bspl = k[0][m] * h - ydiff;
                    rcont2[m] = ydiff;
                    rcont3[m] = bspl;
                    rcont4[m] = ydiff - k[6][m] * h - bspl;
                    let mut acc = Complex64::ZERO;
                    for (j, kj) in k.iter().enumerate() {
                        acc += kj[m] * D[j];
                    }
                    rcont5[m] = acc * h;
                }
                while next_sample < t_grid.len() && t_grid[next_sample] <= t + h {
                    let theta = (t_grid[next_sample] - t) / h;
                    let theta1 = 1.0 - theta;
                    for m in 0..dim {
                        y_sample[m] = y[m]
                            + (rcont2[m]
                                + (rcont3[m] + (rcont4[m] + rcont5[m] * theta1) * theta) * theta1)
                                * theta;
                    }
                    on_sample(next_sample, t_grid[next_sample], &y_sample);
                    next_sample += 1;
                }
            }

            t += h;
            std::mem::swap(&mut y, &mut y_next);
            k.swap(0, 6); // FSAL
            steps += 1;
            error_estimate += err_abs;

            let scale = if err == 0.0 {
                MAX_SCALE
            } else {
                (SAFETY * err.powf(-ORDER_EXPONENT)).clamp(MIN_SCALE, MAX_SCALE)
            };
            h *= scale;
        } else {
            rejected += 1;
            let scale = if err.is_finite() {
                (SAFETY * err.powf(-ORDER_EXPONENT)).clamp(MIN_SCALE, 1.0)
            } else {
                MIN_SCALE
            };
            h *= scale;
        }
    }

    Ok(Integration {
        final_state: y,
        steps,
        rejected_steps: rejected,
        rhs_evaluations: evals,
        error_estimate,
    })
}

/// Step-size guess from the scaled magnitudes of the state and its first two
/// derivatives (a trimmed version of the usual starting-step heuristic).
fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[Complex64],
    f0: &[Complex64],
    span: f64,
    opts: &IntegratorOptions,
    evals: &mut usize,
    scratch: &mut [Complex64],
) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let dim = y0.len() as f64;
    let weight =
        |y: Complex64| opts.atol + opts.rtol * y.norm();
    let d0 = (y0.iter().map(|&v| (v.norm() / weight(v)).powi(2)).sum::<f64>() / dim).sqrt();
    let d1 = (y0
        .iter()
        .zip(f0)
        .map(|(&v, &f)| (f.norm() / weight(v)).powi(2))
        .sum::<f64>()
        / dim)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * (d0 / d1) };
    let h0 = h0.min(span);

    // Explicit Euler probe to estimate the second derivative scale.
    let mut y1 = y0.to_vec();
    for (v, &f) in y1.iter_mut().zip(f0) {
        *v += f * h0;
    }
    rhs(t0 + h0, &y1, scratch);
    *evals += 1;
    let d2 = (y0
        .iter()
        .zip(f0.iter().zip(scratch.iter()))
        .map(|(&v, (&f0m, &f1m))| ((f1m - f0m).norm() / weight(v)).powi(2))
        .sum::<f64>()
        / dim)
        .sqrt()
        / h0;

    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (1e-3 * span).max(100.0 * h0)
    } else {
        (0.01 / d_max).powf(ORDER_EXPONENT)
    };
    (100.0 * h0).min(h1).min(span)
}
