//! Run configuration: laboratory-unit descriptions loaded from TOML files and
//! the SI / angular-frequency form consumed by the solvers.
//!
//! Configuration files use the units every quoted parameter comes in (MHz,
//! mm, um, us, cm^-3); everything is converted exactly once, at load time.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    default_shell_count, CrystalGeometry, ModeKind, ModeProfile, SystemRates,
};
use crate::ode::{IntegratorOptions, RTOL_RANGE};
use crate::pulses::{PulseSchedule, DEFAULT_STORE_GAP};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {key}: {constraint}")]
    Invalid { key: &'static str, constraint: String },
}

fn invalid(key: &'static str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, constraint: constraint.into() }
}

/// Which transverse profile the control field takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    /// Extended control field: constant intensity over the crystal
    /// (`w_c -> infinity`).
    Uniform,
    /// Finite-waist configuration: control coupled to the same cavity mode as
    /// the probe (`w_c = w_p`).
    SameAsProbe,
}

impl ControlKind {
    pub fn label(&self) -> &'static str {
        match self {
            ControlKind::Uniform => "extended",
            ControlKind::SameAsProbe => "finite-waist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeModeKind {
    Tem00,
    Lg01,
}

/// Atom-cavity rates as `omega / 2pi` in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesConfig {
    pub g_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    pub gamma0_mhz: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self { g_mhz: 0.37, kappa_mhz: 1.5, gamma_mhz: 11.3, gamma0_mhz: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub density_per_cm3: f64,
    pub length_mm: f64,
    pub radius_um: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { density_per_cm3: 6.1e8, length_mm: 3.0, radius_um: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub mode: ProbeModeKind,
    pub waist_um: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { mode: ProbeModeKind::Tem00, waist_um: 37.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub mode: ControlKind,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { mode: ControlKind::Uniform }
    }
}

/// Pulse timing in microseconds. Omitted windows fall back to the standard
/// sequence: write ends 5T after the pulse center, the store gap is 5 us, and
/// the read window mirrors the write one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub pulse_duration_us: f64,
    pub amp_write: f64,
    pub amp_read: f64,
    pub t_start_us: Option<f64>,
    pub write_end_us: Option<f64>,
    pub read_start_us: Option<f64>,
    pub t_end_us: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            pulse_duration_us: 2.0,
            amp_write: 1.0,
            amp_read: 1.0,
            t_start_us: None,
            write_end_us: None,
            read_start_us: None,
            t_end_us: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Shell count; omitted means the `d = min(w_p, w_c, R)/40` rule.
    pub n_shells: Option<usize>,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self { n_shells: None, rtol: 1e-9, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Default output directory; the CLI `--out` flag overrides it.
    pub dir: Option<String>,
}

/// A full laboratory-unit run description. Every section is optional in the
/// file; omitted sections take the baseline experimental parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub rates: RatesConfig,
    pub geometry: GeometryConfig,
    pub probe: ProbeConfig,
    pub control: ControlConfig,
    pub schedule: ScheduleConfig,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
}

/// Read and validate a TOML run configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: RunConfig = toml::from_str(&text).map_err(|err| ConfigError::Parse {
        path: path.display().to_string(),
        message: err.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.rates.g_mhz) {
            return Err(invalid("rates.g_mhz", format!("g_mhz >= 0 (got {})", self.rates.g_mhz)));
        }
        if !(self.rates.kappa_mhz.is_finite() && self.rates.kappa_mhz > 0.0) {
            return Err(invalid(
                "rates.kappa_mhz",
                format!("kappa_mhz > 0 (got {})", self.rates.kappa_mhz),
            ));
        }
        if !(self.rates.gamma_mhz.is_finite() && self.rates.gamma_mhz > 0.0) {
            return Err(invalid(
                "rates.gamma_mhz",
                format!("gamma_mhz > 0 (got {})", self.rates.gamma_mhz),
            ));
        }
        if !finite_nonneg(self.rates.gamma0_mhz) {
            return Err(invalid(
                "rates.gamma0_mhz",
                format!("gamma0_mhz >= 0 (got {})", self.rates.gamma0_mhz),
            ));
        }
        if !(self.geometry.density_per_cm3.is_finite() && self.geometry.density_per_cm3 > 0.0) {
            return Err(invalid(
                "geometry.density_per_cm3",
                format!("density_per_cm3 > 0 (got {})", self.geometry.density_per_cm3),
            ));
        }
        if !(self.geometry.length_mm.is_finite() && self.geometry.length_mm > 0.0) {
            return Err(invalid(
                "geometry.length_mm",
                format!("length_mm > 0 (got {})", self.geometry.length_mm),
            ));
        }
        if !finite_nonneg(self.geometry.radius_um) {
            return Err(invalid(
                "geometry.radius_um",
                format!("radius_um >= 0 (got {})", self.geometry.radius_um),
            ));
        }
        if !(self.probe.waist_um.is_finite() && self.probe.waist_um > 0.0) {
            return Err(invalid(
                "probe.waist_um",
                format!("waist_um > 0 (got {})", self.probe.waist_um),
            ));
        }
        if !(self.schedule.pulse_duration_us.is_finite() && self.schedule.pulse_duration_us > 0.0) {
            return Err(invalid(
                "schedule.pulse_duration_us",
                format!("pulse_duration_us > 0 (got {})", self.schedule.pulse_duration_us),
            ));
        }
        if !finite_nonneg(self.schedule.amp_write) || !finite_nonneg(self.schedule.amp_read) {
            return Err(invalid(
                "schedule.amp_write",
                format!(
                    "amplitude scale factors >= 0 (got A_w = {}, A_r = {})",
                    self.schedule.amp_write, self.schedule.amp_read
                ),
            ));
        }
        let schedule = self.resolved_schedule();
        schedule
            .validate()
            .map_err(|err| invalid("schedule", err.to_string()))?;
        if let Some(n) = self.numerics.n_shells {
            if n == 0 {
                return Err(invalid("numerics.n_shells", "n_shells >= 1 (got 0)"));
            }
        }
        if !(self.numerics.rtol >= RTOL_RANGE.0 && self.numerics.rtol <= RTOL_RANGE.1) {
            return Err(invalid(
                "numerics.rtol",
                format!(
                    "rtol within [{:.0e}, {:.0e}] (got {})",
                    RTOL_RANGE.0, RTOL_RANGE.1, self.numerics.rtol
                ),
            ));
        }
        if !(self.numerics.atol.is_finite() && self.numerics.atol > 0.0) {
            return Err(invalid("numerics.atol", format!("atol > 0 (got {})", self.numerics.atol)));
        }
        Ok(())
    }

    /// Absolute pulse schedule in seconds, with the standard-sequence rules
    /// filling any omitted window boundary.
    pub fn resolved_schedule(&self) -> PulseSchedule {
        let t = self.schedule.pulse_duration_us * 1e-6;
        let us = |v: f64| v * 1e-6;
        let t_start = self.schedule.t_start_us.map(us).unwrap_or(-5.0 * t);
        let write_end = self.schedule.write_end_us.map(us).unwrap_or(5.0 * t);
        let read_start =
            self.schedule.read_start_us.map(us).unwrap_or(write_end + DEFAULT_STORE_GAP);
        let storage = read_start - write_end;
        let t_end = self.schedule.t_end_us.map(us).unwrap_or(read_start + storage + 5.0 * t);
        PulseSchedule {
            pulse_duration: t,
            amp_write: self.schedule.amp_write,
            amp_read: self.schedule.amp_read,
            t_start,
            write_end,
            read_start,
            t_end,
        }
    }

    /// Convert to the SI internal configuration, validating first.
    pub fn to_sim_config(&self) -> Result<SimConfig, ConfigError> {
        self.validate()?;
        let rates = SystemRates::from_mhz(
            self.rates.g_mhz,
            self.rates.kappa_mhz,
            self.rates.gamma_mhz,
            self.rates.gamma0_mhz,
        );
        let geometry = CrystalGeometry {
            density: self.geometry.density_per_cm3 * 1e6,
            length: self.geometry.length_mm * 1e-3,
            radius: self.geometry.radius_um * 1e-6,
        };
        let waist = self.probe.waist_um * 1e-6;
        let probe = match self.probe.mode {
            ProbeModeKind::Tem00 => ModeProfile::tem00(waist),
            ProbeModeKind::Lg01 => ModeProfile::lg01(waist),
        };
        Ok(SimConfig {
            rates,
            geometry,
            probe,
            control: self.control.mode,
            schedule: self.resolved_schedule(),
            n_shells: self.numerics.n_shells,
            integrator: IntegratorOptions {
                rtol: self.numerics.rtol,
                atol: self.numerics.atol,
                ..IntegratorOptions::default()
            },
            input_scale: Complex64::new(1.0, 0.0),
        })
    }
}

/// Internal simulation configuration: SI units, angular frequencies, absolute
/// times. Immutable during a run; cheap to clone for sweep variations.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rates: SystemRates,
    pub geometry: CrystalGeometry,
    pub probe: ModeProfile,
    pub control: ControlKind,
    pub schedule: PulseSchedule,
    /// Explicit shell count; `None` applies the automatic rule.
    pub n_shells: Option<usize>,
    pub integrator: IntegratorOptions,
    /// Complex scale applied to the input pulse; the dynamics is linear, so
    /// this probes phase and amplitude invariances.
    pub input_scale: Complex64,
}

impl SimConfig {
    /// Baseline experimental parameters with an extended control field.
    pub fn paper_baseline() -> Self {
        RunConfig::default().to_sim_config().expect("baseline config is valid")
    }

    /// Baseline parameters with the control coupled to the probe mode.
    pub fn finite_waist_baseline() -> Self {
        let mut cfg = Self::paper_baseline();
        cfg.control = ControlKind::SameAsProbe;
        cfg
    }

    /// Transverse profile of the control field.
    pub fn control_profile(&self) -> ModeProfile {
        match self.control {
            ControlKind::Uniform => ModeProfile::uniform(),
            ControlKind::SameAsProbe => self.probe,
        }
    }

    /// Shell count actually used: the explicit one, or the automatic rule.
    pub fn shell_count(&self) -> usize {
        self.n_shells.unwrap_or_else(|| {
            default_shell_count(&self.geometry, &self.probe, &self.control_profile())
        })
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.geometry.radius = radius;
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.geometry.length = length;
        self
    }

    pub fn with_amplitudes(mut self, amp_write: f64, amp_read: f64) -> Self {
        self.schedule.amp_write = amp_write;
        self.schedule.amp_read = amp_read;
        self
    }

    /// Rebuild the standard schedule for a new pulse duration, keeping the
    /// control amplitudes.
    pub fn with_pulse_duration(mut self, pulse_duration: f64) -> Self {
        let (aw, ar) = (self.schedule.amp_write, self.schedule.amp_read);
        self.schedule = PulseSchedule::standard(pulse_duration).with_amplitudes(aw, ar);
        self
    }

    pub fn with_input_scale(mut self, scale: Complex64) -> Self {
        self.input_scale = scale;
        self
    }

    /// Probe mode kind label, for tables.
    pub fn probe_mode(&self) -> ModeKind {
        self.probe.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;
    use std::io::Write;

    #[test]
    fn defaults_are_the_baseline_parameters() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let sim = cfg.to_sim_config().unwrap();
        assert!((sim.rates.g - TAU * 0.37e6).abs() < 1.0);
        assert!((sim.rates.kappa - TAU * 1.5e6).abs() < 1.0);
        assert!((sim.rates.gamma - TAU * 11.3e6).abs() < 1.0);
        assert_eq!(sim.rates.gamma0, 0.0);
        assert!((sim.geometry.density - 6.1e14).abs() < 1.0);
        assert!((sim.geometry.length - 3e-3).abs() < 1e-12);
        assert!((sim.geometry.radius - 100e-6).abs() < 1e-12);
        assert!((sim.probe.waist - 37e-6).abs() < 1e-12);
        assert_eq!(sim.control, ControlKind::Uniform);
        assert!((sim.schedule.pulse_duration - 2e-6).abs() < 1e-15);
        // standard windows: [-10, 10, 16, 32] us
        assert!((sim.schedule.t_start + 10e-6).abs() < 1e-12);
        assert!((sim.schedule.write_end - 10e-6).abs() < 1e-12);
        assert!((sim.schedule.read_start - 16e-6).abs() < 1e-12);
        assert!((sim.schedule.t_end - 32e-6).abs() < 1e-12);
    }

    #[test]
    fn shell_count_rule_applied_when_unset() {
        let sim = SimConfig::paper_baseline();
        assert_eq!(sim.shell_count(), (40.0f64 * 100.0 / 37.0).ceil() as usize);
        let explicit = SimConfig { n_shells: Some(64), ..sim };
        assert_eq!(explicit.shell_count(), 64);
    }

    #[test]
    fn loads_partial_file_with_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "[control]\nmode = \"same-as-probe\"\n\n[schedule]\npulse_duration_us = 2.0\namp_write = 2.45\namp_read = 2.45\n"
        )
        .unwrap();
        let cfg = load_config(file.path()).unwrap();
        assert_eq!(cfg.control.mode, ControlKind::SameAsProbe);
        assert_eq!(cfg.schedule.amp_write, 2.45);
        assert_eq!(cfg.rates, RatesConfig::default());
        assert_eq!(cfg.numerics, NumericsConfig::default());
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = load_config("/nonexistent/run.toml").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.toml"), "{err}");
    }

    #[test]
    fn parse_error_carries_location() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "[geometry]\nradius_um = \"wide\"").unwrap();
        let err = load_config(file.path()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Parse { .. }), "{msg}");
        assert!(msg.contains("line"), "expected line info in: {msg}");
    }

    #[test]
    fn negative_radius_rejected_with_key() {
        let mut cfg = RunConfig::default();
        cfg.geometry.radius_um = -1.0;
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("geometry.radius_um"), "{msg}");
        assert!(msg.contains(">= 0"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "[geometry]\nradius_nm = 5.0").unwrap();
        let err = load_config(file.path()).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }), "{err}");
    }

    #[test]
    fn schedule_overrides_and_derived_windows() {
        let mut cfg = RunConfig::default();
        cfg.schedule.read_start_us = Some(20.0);
        let sched = cfg.resolved_schedule();
        assert!((sched.read_start - 20e-6).abs() < 1e-12);
        // storage doubles, and t_end follows the mirror rule
        assert!((sched.storage_time() - 10e-6).abs() < 1e-12);
        assert!((sched.t_end - 40e-6).abs() < 1e-12);
        cfg.validate().unwrap();

        cfg.schedule.read_start_us = Some(5.0); // before the write end
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn numerics_bounds_checked() {
        let mut cfg = RunConfig::default();
        cfg.numerics.rtol = 1e-3;
        assert!(cfg.validate().unwrap_err().to_string().contains("numerics.rtol"));
        let mut cfg = RunConfig::default();
        cfg.numerics.atol = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("numerics.atol"));
        let mut cfg = RunConfig::default();
        cfg.numerics.n_shells = Some(0);
        assert!(cfg.validate().unwrap_err().to_string().contains("numerics.n_shells"));
    }

    #[test]
    fn zero_control_amplitude_is_a_valid_configuration() {
        let mut cfg = RunConfig::default();
        cfg.schedule.amp_write = 0.0;
        cfg.schedule.amp_read = 0.0;
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        let mut cfg = RunConfig::default();
        cfg.geometry.radius_um = 35.15;
        cfg.schedule.amp_write = 2.45;
        cfg.numerics.n_shells = Some(123);
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
