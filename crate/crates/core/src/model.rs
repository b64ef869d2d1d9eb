//! Crystal geometry, transverse cavity modes, shell discretization and the
//! collective coupling figures derived from them.
//!
//! The atomic medium is a uniform-density cylinder of length `L` and radius
//! `R`, sliced into `n` thin cylindrical shells of thickness `d = R/n`. Shell
//! `j` sits at radius `r_j = d(j - 1/2)` and holds the mean-field ion count
//! `n_j = rho L pi d^2 (2j - 1)` (the annulus volume times the density). All
//! rates are angular frequencies (rad/s); all lengths are meters.

use thiserror::Error;

/// Cap on the automatic shell count; beyond this the transverse profiles are
/// resolved far better than any other error source.
pub const MAX_AUTO_SHELLS: usize = 2000;

/// Shells per transverse feature used by the automatic discretization rule:
/// `d = min(w_p, w_c, R) / SHELLS_PER_FEATURE`.
pub const SHELLS_PER_FEATURE: f64 = 40.0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("shell grid needs at least one shell")]
    EmptyGrid,
    #[error("cooperativity requires kappa > 0 and gamma > 0 (got kappa = {kappa}, gamma = {gamma})")]
    NonDissipative { kappa: f64, gamma: f64 },
}

/// Atom-cavity rates, all as angular frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemRates {
    /// Single-atom coupling rate at the center of the cavity mode.
    pub g: f64,
    /// Cavity field decay rate.
    pub kappa: f64,
    /// Atomic dipole decay rate.
    pub gamma: f64,
    /// Ground-state coherence decay rate (zero for a lossless store phase).
    pub gamma0: f64,
}

impl SystemRates {
    /// Build from laboratory-style frequencies `omega / 2pi` in MHz.
    pub fn from_mhz(g: f64, kappa: f64, gamma: f64, gamma0: f64) -> Self {
        let to_angular = |f_mhz: f64| std::f64::consts::TAU * f_mhz * 1e6;
        Self {
            g: to_angular(g),
            kappa: to_angular(kappa),
            gamma: to_angular(gamma),
            gamma0: to_angular(gamma0),
        }
    }
}

/// Uniform-density cylinder holding the ions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalGeometry {
    /// Number density in m^-3.
    pub density: f64,
    /// Crystal length in m.
    pub length: f64,
    /// Crystal radius in m.
    pub radius: f64,
}

impl CrystalGeometry {
    /// Total ion count `rho L pi R^2`.
    pub fn total_atoms(&self) -> f64 {
        self.density * self.length * std::f64::consts::PI * self.radius * self.radius
    }
}

/// Transverse mode families with cylindrical symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// Fundamental Gaussian.
    Tem00,
    /// First-order Laguerre-Gauss ring mode.
    Lg01,
    /// Constant profile; the limit of a control waist much larger than the
    /// crystal.
    Uniform,
}

impl ModeKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModeKind::Tem00 => "tem00",
            ModeKind::Lg01 => "lg01",
            ModeKind::Uniform => "uniform",
        }
    }
}

/// Transverse amplitude profile of a cavity mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeProfile {
    pub kind: ModeKind,
    /// 1/e amplitude radius in m; ignored for [`ModeKind::Uniform`].
    pub waist: f64,
}

impl ModeProfile {
    pub fn tem00(waist: f64) -> Self {
        assert!(waist > 0.0, "mode waist must be positive");
        Self { kind: ModeKind::Tem00, waist }
    }

    pub fn lg01(waist: f64) -> Self {
        assert!(waist > 0.0, "mode waist must be positive");
        Self { kind: ModeKind::Lg01, waist }
    }

    pub fn uniform() -> Self {
        Self { kind: ModeKind::Uniform, waist: f64::INFINITY }
    }

    /// Dimensionless transverse amplitude at radius `r >= 0`.
    ///
    /// Tem00: `exp(-r^2/w^2)`; Lg01: `sqrt(2) (r/w) exp(-r^2/w^2)`;
    /// Uniform: 1.
    pub fn amplitude(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "mode amplitude evaluated at negative radius {r}");
        match self.kind {
            ModeKind::Tem00 => (-(r * r) / (self.waist * self.waist)).exp(),
            ModeKind::Lg01 => {
                let x = r / self.waist;
                std::f64::consts::SQRT_2 * x * (-x * x).exp()
            }
            ModeKind::Uniform => 1.0,
        }
    }
}

/// Radial discretization of the crystal into concentric shells.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellGrid {
    /// Shell thickness `d = R/n`.
    pub thickness: f64,
    /// Shell center radii `r_j = d(j - 1/2)`.
    pub radii: Vec<f64>,
    /// Mean-field ion count per shell (real-valued, not rounded).
    pub populations: Vec<f64>,
}

impl ShellGrid {
    pub fn n_shells(&self) -> usize {
        self.radii.len()
    }

    pub fn total_atoms(&self) -> f64 {
        self.populations.iter().sum()
    }
}

/// Slice the crystal into `n_shells` shells of equal thickness.
///
/// `R = 0` yields a grid whose populations are all zero.
pub fn build_shell_grid(geom: &CrystalGeometry, n_shells: usize) -> Result<ShellGrid, ModelError> {
    if n_shells == 0 {
        return Err(ModelError::EmptyGrid);
    }
    let d = geom.radius / n_shells as f64;
    let sigma = geom.density * geom.length; // atomic cross-sectional density
    let radii: Vec<f64> = (1..=n_shells).map(|j| d * (j as f64 - 0.5)).collect();
    let populations: Vec<f64> = (1..=n_shells)
        .map(|j| sigma * std::f64::consts::PI * d * d * (2.0 * j as f64 - 1.0))
        .collect();
    Ok(ShellGrid { thickness: d, radii, populations })
}

/// Shell count from the rule `d = min(w_p, w_c, R) / 40`, capped at
/// [`MAX_AUTO_SHELLS`].
pub fn default_shell_count(geom: &CrystalGeometry, probe: &ModeProfile, control: &ModeProfile) -> usize {
    if geom.radius <= 0.0 {
        return 1;
    }
    let feature = geom.radius.min(probe.waist).min(control.waist);
    let n = (SHELLS_PER_FEATURE * geom.radius / feature).ceil() as usize;
    n.clamp(1, MAX_AUTO_SHELLS)
}

/// Effective number of atoms seen by the probe, `N = sum_j n_j Psi_p(r_j)^2`.
pub fn effective_atom_number(grid: &ShellGrid, probe: &ModeProfile) -> f64 {
    grid.radii
        .iter()
        .zip(&grid.populations)
        .map(|(&r, &n)| {
            let psi = probe.amplitude(r);
            n * psi * psi
        })
        .sum()
}

/// Cooperativity `C = g^2 N / (2 kappa gamma)`.
pub fn cooperativity(rates: &SystemRates, n_eff: f64) -> Result<f64, ModelError> {
    if rates.kappa <= 0.0 || rates.gamma <= 0.0 {
        return Err(ModelError::NonDissipative { kappa: rates.kappa, gamma: rates.gamma });
    }
    Ok(rates.g * rates.g * n_eff / (2.0 * rates.kappa * rates.gamma))
}

/// Optimal single-phase (write or read) efficiency `2C / (1 + 2C)`.
pub fn optimal_phase_efficiency(coop: f64) -> f64 {
    2.0 * coop / (1.0 + 2.0 * coop)
}

/// Optimal total efficiency `(2C / (1 + 2C))^2`, the product of identical
/// write and read phases with a lossless store in between.
pub fn analytic_optimal_efficiency(coop: f64) -> f64 {
    let eta = optimal_phase_efficiency(coop);
    eta * eta
}
