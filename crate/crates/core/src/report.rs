//! CSV tables and machine-readable summary records.
//!
//! All files are written atomically (temp file in the target directory, then
//! rename), so long sweeps never leave truncated tables behind. Floats are
//! printed with `{:e}`: scientific notation at full round-trip precision.

use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::dynamics::{radial_excitation_density, SimulationResult};
use crate::experiments::SweepRow;
use crate::model::{ModeProfile, ShellGrid};

/// Write `contents` to `path` atomically, creating parent directories.
pub fn atomic_write(path: impl AsRef<Path>, contents: &[u8]) -> io::Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|err| err.error)?;
    Ok(())
}

/// Header of the sequence time-series table.
pub const TIME_SERIES_HEADER: &str =
    "t_us, re_a_in, im_a_in, re_a, im_a, re_a_out, im_a_out, omega_mhz";

/// Time series of one write-store-read sequence; times in microseconds, the
/// control as `Omega / 2pi` in MHz.
pub fn time_series_csv(result: &SimulationResult) -> String {
    let mut out = String::with_capacity(result.times.len() * 96);
    out.push_str(TIME_SERIES_HEADER);
    out.push('\n');
    let to_mhz = 1.0 / (std::f64::consts::TAU * 1e6);
    for (k, &t) in result.times.iter().enumerate() {
        let a_in = result.a_in[k];
        let a = result.a[k];
        let a_out = result.a_out[k];
        writeln!(
            out,
            "{:e}, {:e}, {:e}, {:e}, {:e}, {:e}, {:e}, {:e}",
            t * 1e6,
            a_in.re,
            a_in.im,
            a.re,
            a.im,
            a_out.re,
            a_out.im,
            result.omega[k] * to_mhz,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Header of the shell snapshot table.
pub const SHELL_SNAPSHOT_HEADER: &str = "r_um, n_j, re_S, im_S, s_density";

/// Per-shell spin coherences at the end of the write phase, with the per-ion
/// excitation density `|S_j|^2 / n_j`. Empty shells are omitted.
pub fn shell_snapshot_csv(result: &SimulationResult, grid: &ShellGrid) -> String {
    let density = radial_excitation_density(&result.s_final_write, grid);
    let mut out = String::with_capacity(density.len() * 64 + 64);
    out.push_str(SHELL_SNAPSHOT_HEADER);
    out.push('\n');
    for (j, &(r, s)) in density.iter().enumerate() {
        let spin = result.s_final_write[j];
        writeln!(
            out,
            "{:e}, {:e}, {:e}, {:e}, {:e}",
            r * 1e6,
            grid.populations[j],
            spin.re,
            spin.im,
            s,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Header of the radial density table, which adds the squared probe profile
/// as a reference column.
pub const DENSITY_HEADER: &str = "r_um, n_j, re_S, im_S, s_density, psi_p_sq";

pub fn density_csv(result: &SimulationResult, grid: &ShellGrid, probe: &ModeProfile) -> String {
    let density = radial_excitation_density(&result.s_final_write, grid);
    let mut out = String::with_capacity(density.len() * 80 + 64);
    out.push_str(DENSITY_HEADER);
    out.push('\n');
    for (j, &(r, s)) in density.iter().enumerate() {
        let spin = result.s_final_write[j];
        let psi = probe.amplitude(r);
        writeln!(
            out,
            "{:e}, {:e}, {:e}, {:e}, {:e}, {:e}",
            r * 1e6,
            grid.populations[j],
            spin.re,
            spin.im,
            s,
            psi * psi,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Header of the sweep tables.
pub const SWEEP_HEADER: &str =
    "mode, config, L_mm, R_um, n_shells, N_eff, C, A_opt, eta_w, eta_r, eta_tot, status";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 128 + 96);
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        writeln!(
            out,
            "{}, {}, {:e}, {:e}, {}, {:e}, {:e}, {:e}, {:e}, {:e}, {:e}, {}",
            row.probe_mode.label(),
            row.control.label(),
            row.length_mm,
            row.radius_um,
            row.n_shells,
            row.n_eff,
            row.cooperativity,
            row.a_opt,
            row.eta_w,
            row.eta_r,
            row.eta_tot,
            row.status.label(),
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Summary record written next to every simulation output: the figures of
/// merit plus the complete input configuration, so any result can be
/// reproduced from its summary alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub eta_w: f64,
    pub eta_r: f64,
    pub eta_tot: f64,
    pub n_eff: f64,
    pub cooperativity: f64,
    pub n_shells: usize,
    pub input_energy: f64,
    pub retrieved_energy: f64,
    pub stored_write: f64,
    pub norm_residual: f64,
    pub adiabaticity_2tc_gamma: f64,
    pub integrator_error_estimate: f64,
    pub integrator_steps: usize,
    pub config: RunConfig,
}

impl RunSummary {
    pub fn new(result: &SimulationResult, config: &RunConfig) -> Self {
        Self {
            eta_w: result.eta_w,
            eta_r: result.eta_r,
            eta_tot: result.eta_tot,
            n_eff: result.n_eff,
            cooperativity: result.cooperativity,
            n_shells: result.n_shells,
            input_energy: result.input_energy,
            retrieved_energy: result.retrieved_energy,
            stored_write: result.stored_write,
            norm_residual: result.norm_residual,
            adiabaticity_2tc_gamma: result.adiabaticity,
            integrator_error_estimate: result.error_estimate,
            integrator_steps: result.steps,
            config: config.clone(),
        }
    }
}

/// JSON formatter printing every float in scientific notation at full
/// round-trip precision.
struct SciNotation;

impl serde_json::ser::Formatter for SciNotation {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

/// Serialize any record as a UTF-8 JSON document with snake_case keys and
/// full-precision scientific-notation numbers.
pub fn summary_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciNotation);
    value.serialize(&mut ser).expect("summary records are always serializable");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_summary<T: Serialize>(path: impl AsRef<Path>, value: &T) -> io::Result<()> {
    atomic_write(path, summary_json(value).as_bytes())
}

pub fn write_csv(path: impl AsRef<Path>, contents: &str) -> io::Result<()> {
    atomic_write(path, contents.as_bytes())
}
