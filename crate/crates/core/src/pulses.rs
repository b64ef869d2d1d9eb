//! Probe input pulse and the analytically optimal write/read control pulses.
//!
//! The probe is a unit-norm hyperbolic-secant pulse centered at `t = 0`,
//! `a_in(t) = sech(2t/T) / sqrt(T)`. The write control,
//!
//! ```text
//! Omega_w(t) = A sqrt(2 gamma (1 + 2C) / T) / sqrt(1 + exp(4t/T)),
//! ```
//!
//! adiabatically turns off through the pulse so the cavity stays impedance
//! matched, and the read control is its time-reversed image about
//! `T_r + T_s`. Both are gated to exactly zero outside their phase; the
//! truncated tails are below `e^-10` of the plateau for the default windows.

use thiserror::Error;

/// Default gap between the end of the write phase and the start of the read
/// phase, in seconds. Must be long enough that the control tail truncated by
/// the read gate (of order `exp(-2 T_s / T)` of the plateau) perturbs the
/// total efficiency below 1e-6; 3T does, 2.5T does not.
pub const DEFAULT_STORE_GAP: f64 = 6e-6;

/// Runs with `2 T C gamma` below this are outside the adiabatic regime the
/// control pulses were derived in.
pub const ADIABATICITY_WARN_THRESHOLD: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule phases must be ordered t_start < write_end < read_start < t_end (got {t_start}, {write_end}, {read_start}, {t_end})")]
    Unordered { t_start: f64, write_end: f64, read_start: f64, t_end: f64 },
    #[error("probe pulse duration must be positive (got {0})")]
    NonPositiveDuration(f64),
    #[error("control amplitude scale factors must be finite and >= 0 (got A_w = {amp_write}, A_r = {amp_read})")]
    BadAmplitude { amp_write: f64, amp_read: f64 },
}

/// Timing and amplitude scale factors for one write-store-read sequence.
///
/// Times are absolute, in seconds, with the probe pulse centered at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSchedule {
    /// Probe pulse duration `T`.
    pub pulse_duration: f64,
    /// Write control amplitude scale factor `A_w`.
    pub amp_write: f64,
    /// Read control amplitude scale factor `A_r`.
    pub amp_read: f64,
    /// Simulation start.
    pub t_start: f64,
    /// End of the write phase, `T_w`.
    pub write_end: f64,
    /// Start of the read phase, `T_r`.
    pub read_start: f64,
    /// Simulation end.
    pub t_end: f64,
}

impl PulseSchedule {
    /// Default sequence for a pulse of duration `T`: the write window is
    /// `[-5T, 5T]` (input truncation below 1e-8 of the pulse energy), the
    /// store gap is [`DEFAULT_STORE_GAP`], and the read window mirrors the
    /// write one.
    pub fn standard(pulse_duration: f64) -> Self {
        assert!(pulse_duration > 0.0, "pulse duration must be positive");
        let write_end = 5.0 * pulse_duration;
        let read_start = write_end + DEFAULT_STORE_GAP;
        let storage = read_start - write_end;
        Self {
            pulse_duration,
            amp_write: 1.0,
            amp_read: 1.0,
            t_start: -5.0 * pulse_duration,
            write_end,
            read_start,
            t_end: read_start + storage + 5.0 * pulse_duration,
        }
    }

    /// Same timings, different control amplitudes.
    pub fn with_amplitudes(mut self, amp_write: f64, amp_read: f64) -> Self {
        self.amp_write = amp_write;
        self.amp_read = amp_read;
        self
    }

    /// Storage duration `T_s = T_r - T_w`.
    pub fn storage_time(&self) -> f64 {
        self.read_start - self.write_end
    }

    /// Instant the read pulse mirrors the write pulse about, `T_r + T_s`.
    pub fn mirror_time(&self) -> f64 {
        self.read_start + self.storage_time()
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.pulse_duration > 0.0) {
            return Err(ScheduleError::NonPositiveDuration(self.pulse_duration));
        }
        if !(self.t_start < self.write_end
            && self.write_end < self.read_start
            && self.read_start < self.t_end)
        {
            return Err(ScheduleError::Unordered {
                t_start: self.t_start,
                write_end: self.write_end,
                read_start: self.read_start,
                t_end: self.t_end,
            });
        }
        // A = 0 is allowed: it disables the control entirely, which is a
        // useful diagnostic configuration.
        if !(self.amp_write.is_finite() && self.amp_write >= 0.0)
            || !(self.amp_read.is_finite() && self.amp_read >= 0.0)
        {
            return Err(ScheduleError::BadAmplitude {
                amp_write: self.amp_write,
                amp_read: self.amp_read,
            });
        }
        Ok(())
    }
}

/// Probe input amplitude `sech(2t/T) / sqrt(T)` in s^-1/2; unit norm over the
/// whole line.
pub fn probe_input(t: f64, pulse_duration: f64) -> f64 {
    debug_assert!(pulse_duration > 0.0);
    let x = 2.0 * t / pulse_duration;
    // 1/cosh underflows cleanly to 0 for |x| beyond ~710
    (1.0 / x.cosh()) / pulse_duration.sqrt()
}

/// Dimensionless temporal shape of the write control,
/// `1 / sqrt(1 + exp(4t/T))`: plateau 1 far before the pulse, rolling off to
/// zero through it.
pub fn write_profile(t: f64, pulse_duration: f64) -> f64 {
    1.0 / (1.0 + (4.0 * t / pulse_duration).exp()).sqrt()
}

/// Plateau Rabi frequency `sqrt(2 gamma (1 + 2C) / T)` of the unit-amplitude
/// optimal control (rad/s).
pub fn control_plateau(pulse_duration: f64, gamma: f64, coop: f64) -> f64 {
    (2.0 * gamma * (1.0 + 2.0 * coop) / pulse_duration).sqrt()
}

/// Optimal write control Rabi frequency (rad/s); exactly zero past the end of
/// the write phase.
pub fn control_write(t: f64, sched: &PulseSchedule, gamma: f64, coop: f64) -> f64 {
    if t > sched.write_end {
        return 0.0;
    }
    sched.amp_write
        * control_plateau(sched.pulse_duration, gamma, coop)
        * write_profile(t, sched.pulse_duration)
}

/// Read control: the write pulse time-reversed about `T_r + T_s`,
/// `Omega_r(t) = Omega_w(-t + T_r + T_s)` with amplitude `A_r`; exactly zero
/// before the read phase starts.
pub fn control_read(t: f64, sched: &PulseSchedule, gamma: f64, coop: f64) -> f64 {
    if t < sched.read_start {
        return 0.0;
    }
    sched.amp_read
        * control_plateau(sched.pulse_duration, gamma, coop)
        * write_profile(sched.mirror_time() - t, sched.pulse_duration)
}

/// Full control envelope over the sequence: write pulse up to `T_w`, zero
/// during the store phase, read pulse from `T_r` on.
pub fn control_envelope(t: f64, sched: &PulseSchedule, gamma: f64, coop: f64) -> f64 {
    if t <= sched.write_end {
        control_write(t, sched, gamma, coop)
    } else if t < sched.read_start {
        0.0
    } else {
        control_read(t, sched, gamma, coop)
    }
}

/// Adiabaticity figure `2 T C gamma`; equals `T g^2 N / kappa`, so it stays
/// finite for `gamma -> 0`.
pub fn adiabaticity_figure(pulse_duration: f64, coop: f64, gamma: f64) -> f64 {
    2.0 * pulse_duration * coop * gamma
}
