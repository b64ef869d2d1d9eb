//! End-to-end checks of the command-line interface: exit codes, file
//! outputs, and the provenance guarantees of the summary records.

use std::path::Path;
use std::process::{Command, Output};

use cavity_eit::config::RunConfig;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavity-eit"))
}

/// A small, fast configuration: 20 um crystal, 16 shells, coarse tolerance.
const QUICK_CONFIG: &str = r#"
[geometry]
radius_um = 20.0

[control]
mode = "same-as-probe"

[numerics]
n_shells = 16
rtol = 1e-6
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn config(&self) -> String {
        self.dir.path().join("run.toml").display().to_string()
    }

    fn out(&self) -> String {
        self.dir.path().join("out").display().to_string()
    }

    fn out_file(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join("out").join(name)
    }
}

fn run_ok(args: &[&str]) -> Output {
    let output = binary().args(args).output().unwrap();
    assert!(
        output.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn simulate_writes_outputs_and_prints_efficiencies() {
    let ws = Workspace::new(QUICK_CONFIG);
    let output = run_ok(&["--config", &ws.config(), "--out", &ws.out(), "simulate"]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("eta_w"), "{stdout}");
    assert!(stdout.contains("eta_r"), "{stdout}");
    assert!(stdout.contains("eta_tot"), "{stdout}");

    assert_eq!(
        first_line(&ws.out_file("time_series.csv")),
        "t_us, re_a_in, im_a_in, re_a, im_a, re_a_out, im_a_out, omega_mhz"
    );
    assert_eq!(first_line(&ws.out_file("shells.csv")), "r_um, n_j, re_S, im_S, s_density");

    // the summary embeds the exact input configuration
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.out_file("summary.json")).unwrap())
            .unwrap();
    let embedded: RunConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    let loaded: RunConfig = toml::from_str(QUICK_CONFIG).unwrap();
    assert_eq!(embedded, loaded);
    let eta = summary["eta_tot"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&eta));
}

#[test]
fn validate_passes_on_quick_config() {
    let ws = Workspace::new(QUICK_CONFIG);
    let output = run_ok(&["--config", &ws.config(), "validate"]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.matches("[PASS]").count(), 5, "{stdout}");
    assert!(stdout.contains("all validation checks passed"));
}

#[test]
fn optimize_reports_amplitude_and_summary() {
    let ws = Workspace::new(QUICK_CONFIG);
    let output = run_ok(&[
        "--config",
        &ws.config(),
        "--out",
        &ws.out(),
        "optimize",
        "--a-min",
        "0.5",
        "--a-max",
        "4.0",
        "--tol-a",
        "0.1",
    ]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("A_opt"), "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.out_file("optimum.json")).unwrap())
            .unwrap();
    let a_opt = summary["a_opt"].as_f64().unwrap();
    assert!((0.5..=4.0).contains(&a_opt));
    assert_eq!(summary["at_bound"], serde_json::json!(false));
}

#[test]
fn sweep_radius_writes_table_with_status_column() {
    let ws = Workspace::new(QUICK_CONFIG);
    run_ok(&[
        "--config",
        &ws.config(),
        "--out",
        &ws.out(),
        "--workers",
        "2",
        "sweep-radius",
        "--radii-um",
        "15,25",
        "--a-min",
        "0.5",
        "--a-max",
        "4.0",
        "--tol-a",
        "0.2",
    ]);
    let table = std::fs::read_to_string(ws.out_file("sweep_radius.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mode, config, L_mm, R_um, n_shells, N_eff, C, A_opt, eta_w, eta_r, eta_tot, status"
    );
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().skip(1).all(|l| l.ends_with(", ok")));

    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.out_file("sweep_radius.summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["rows"], serde_json::json!(2));
    assert_eq!(summary["failed_rows"], serde_json::json!(0));
    let embedded: RunConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    assert_eq!(embedded, toml::from_str::<RunConfig>(QUICK_CONFIG).unwrap());
}

#[test]
fn sweep_grid_covers_cartesian_product() {
    let ws = Workspace::new(QUICK_CONFIG);
    run_ok(&[
        "--config",
        &ws.config(),
        "--out",
        &ws.out(),
        "sweep-grid",
        "--l-mm",
        "2,3",
        "--r-um",
        "15,25",
        "--a-min",
        "0.5",
        "--a-max",
        "4.0",
        "--tol-a",
        "0.3",
    ]);
    let table = std::fs::read_to_string(ws.out_file("sweep_grid.csv")).unwrap();
    assert_eq!(table.lines().count(), 5); // header + 2x2 grid
}

#[test]
fn density_table_has_reference_column() {
    let ws = Workspace::new(QUICK_CONFIG);
    run_ok(&["--config", &ws.config(), "--out", &ws.out(), "density"]);
    assert_eq!(
        first_line(&ws.out_file("density.csv")),
        "r_um, n_j, re_S, im_S, s_density, psi_p_sq"
    );
}

#[test]
fn missing_config_fails_with_path_in_message() {
    let output = binary()
        .args(["--config", "/nonexistent/run.toml", "simulate"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/nonexistent/run.toml"), "{stderr}");
}

#[test]
fn invalid_config_names_the_offending_key() {
    let ws = Workspace::new("[geometry]\nradius_um = -1.0\n");
    let output =
        binary().args(["--config", &ws.config(), "simulate"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("geometry.radius_um"), "{stderr}");
}

#[test]
fn seedless_flag_is_reserved() {
    let ws = Workspace::new(QUICK_CONFIG);
    // bare flag accepted
    run_ok(&["--config", &ws.config(), "--seedless", "validate"]);
    // a value is rejected
    let output = binary()
        .args(["--config", &ws.config(), "--seedless=yes", "validate"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn zero_control_config_reports_zero_efficiency() {
    let config = r#"
[geometry]
radius_um = 20.0

[schedule]
amp_write = 0.0
amp_read = 0.0

[numerics]
n_shells = 16
rtol = 1e-6
"#;
    let ws = Workspace::new(config);
    run_ok(&["--config", &ws.config(), "--out", &ws.out(), "simulate"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.out_file("summary.json")).unwrap())
            .unwrap();
    assert!(summary["eta_tot"].as_f64().unwrap() <= 1e-9);
}
