use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn pwolff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwolff")).args(args).output().expect("binary runs")
}

fn run_with(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{cmd}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{cmd}"));
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (pwolff(&args), out)
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const ZERO_POTENTIAL: &str = r#"
[params]
p = 3.0
n = 2

[measure]
kind = "zero"
dim = 2

[potential]
rho = 1.0
points = [{ x = [0.0, 0.0], t = 0.0 }, { x = [0.5, -0.25], t = 1.0 }]
"#;

#[test]
fn zero_measure_gives_zero_table() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_with(dir.path(), "potential", ZERO_POTENTIAL, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&out.join("potential.csv"));
    assert_eq!(h, ["x1", "x2", "t0", "rho", "j", "rho_j", "Dp_j", "tau_j", "partial_sum"]);
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(r[col(&h, "Dp_j")].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[col(&h, "partial_sum")].parse::<f64>().unwrap(), 0.0);
    }
    let summary = json(&out.join("potential_summary.json"));
    for s in summary.as_array().unwrap() {
        assert_eq!(s["value"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn autonomous_potential_matches_wolff_column() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[params]
p = 3.0
n = 2

[measure]
kind = "inline"
dim = 2
atoms = [{ x = [0.3, 0.1], weight = 1.5 }, { x = [-0.7, 0.4], weight = 0.5 }]

[potential]
rho = 1.0
wolff_beta = 1.0
points = [{ x = [0.0, 0.0] }, { x = [0.25, 0.0], t = 3.0 }, { x = [-0.5, 0.5], t = -1.0 }]
"#;
    let (o, out) = run_with(dir.path(), "potential", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&out.join("potential_summary.csv"));
    for r in rows {
        let pp: f64 = r[col(&h, "P_p")].parse().unwrap();
        let wp: f64 = r[col(&h, "W_p")].parse().unwrap();
        assert!(wp > 0.0 && (pp - wp).abs() <= 1e-6 * wp, "{pp} vs {wp}");
    }
}

#[test]
fn malformed_measure_csv_exits_2() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("mu.csv"), "x1,t,weight,sign\n0.0,0.0,abc,+\n").unwrap();
    let cfg = r#"
[params]
p = 3.0
n = 1

[measure]
kind = "atoms"
path = "mu.csv"

[potential]
rho = 1.0
points = [{ x = [0.0] }]
"#;
    let (o, out) = run_with(dir.path(), "potential", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(!out.exists());
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_with(dir.path(), "potential", "[params]\np = 1.5\nn = 1\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    let (o, _) = run_with(dir.path(), "potential", "[params]\np = 3.0\nn = 1\nbogus = 1\n", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_data_solve_gives_zero_snapshots() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[solve]
p = 3.0
geometry = { kind = "line", a = -1.0, b = 1.0 }
cells = 32
t0 = 0.0
k = 0.01
steps = 20
snapshot_every = 5
initial = { kind = "zero" }
"#;
    let (o, out) = run_with(dir.path(), "solve", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&out.join("snapshots.csv"));
    assert_eq!(h, ["t", "x1", "u"]);
    assert_eq!(rows.len(), 5 * 33);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["steps"].as_u64(), Some(20));
    assert_eq!(m["mass_final"].as_f64(), Some(0.0));
    assert!(out.join("solution.json").exists());
}

#[test]
fn heat_refinement_study_converges() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[solve]
p = 2.0
geometry = { kind = "line", a = -3.0, b = 3.0 }
cells = 60
t0 = 0.05
k = 0.01
steps = 20
initial = { kind = "exact", solution = { kind = "heat_kernel", dim = 1 } }
refinement = { levels = 3, time_factor = 4 }
"#;
    let (o, out) = run_with(dir.path(), "solve", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&out.join("refinement.csv"));
    let errs: Vec<f64> = rows.iter().map(|r| r[col(&h, "err_max")].parse().unwrap()).collect();
    assert_eq!(errs.len(), 3);
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}

#[test]
fn barenblatt_run_conserves_mass() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
seed = 3

[solve]
p = 3.0
geometry = { kind = "line", a = -2.0, b = 2.0 }
boundary = "zero_flux"
cells = 128
t0 = 0.1
k = 0.005
steps = 100
residual_bumps = 3
initial = { kind = "exact", solution = { kind = "barenblatt", p = 3.0, dim = 1, c = 0.2 } }
"#;
    let (o, out) = run_with(dir.path(), "solve", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    let (m0, m1) = (m["mass_initial"].as_f64().unwrap(), m["mass_final"].as_f64().unwrap());
    assert!((m0 - m1).abs() <= 1e-3 * m0, "{m0} vs {m1}");
    assert_eq!(m["residual_norms"].as_array().unwrap().len(), 3);
    assert_eq!(m["stats"]["unconverged_steps"].as_u64(), Some(0));
}

#[test]
fn non_finite_data_exits_3_without_output() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[solve]
p = 3.0
geometry = { kind = "line", a = 0.0, b = 1.0 }
cells = 8
t0 = 0.0
k = 0.1
steps = 3
initial = { kind = "constant", value = nan }
"#;
    let (o, out) = run_with(dir.path(), "solve", cfg, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn verify_selected_suites() {
    let dir = TempDir::new().unwrap();
    let cfg = "[verify]\nsuites = [\"riesz\", \"km\"]\n";
    let (o, out) = run_with(dir.path(), "verify", cfg, &["--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("verify_report.json"));
    assert_eq!(r["passed"].as_bool(), Some(true));
    let suites = r["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 2);
    let riesz = &suites[0]["measured"];
    assert!(riesz["gamma_N1"].as_f64().unwrap() <= 8.0);
    assert!(riesz["gamma_N2"].as_f64().unwrap() <= 16.0);
    assert!(suites[1]["measured"]["nonpositive_linf_error"].as_f64().unwrap() <= 1e-10);

    let (o, _) = run_with(dir.path(), "verify", "[verify]\nsuites = [\"nope\"]\n", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn full_verify_passes_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = pwolff(&["verify", "--seed", "11", "--out", a.to_str().unwrap()]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = pwolff(&["verify", "--seed", "11", "--jobs", "2", "--out", b.to_str().unwrap()]);
    assert!(ob.status.success());
    assert_eq!(fs::read(a.join("verify_report.json")).unwrap(), fs::read(b.join("verify_report.json")).unwrap());
}

#[test]
fn potential_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[params]
p = 2.5
n = 1

[measure]
kind = "inline"
dim = 1
atoms = [{ x = [0.1], t = 0.2, weight = 1.0 }, { x = [-0.3], t = -0.1, weight = 2.0, sign = "-" }]

[potential]
rho = 0.8
points = [{ x = [0.0] }, { x = [0.2], t = 0.1 }, { x = [-0.1], t = 0.3 }]
"#;
    let (o1, out1) = run_with(dir.path(), "potential", cfg, &["--jobs", "1"]);
    let bytes1 = fs::read(out1.join("potential.csv")).unwrap();
    let (o2, out2) = run_with(dir.path(), "potential", cfg, &["--jobs", "3"]);
    assert!(o1.status.success() && o2.status.success());
    assert_eq!(bytes1, fs::read(out2.join("potential.csv")).unwrap());
}

const KM_HEAT: &str = r#"
[params]
p = 2.0
n = 1

[km]
solution = { kind = "exact", solution = { kind = "heat_kernel", dim = 1 }, geometry = { kind = "line", a = -3.0, b = 3.0 }, cells = 600, t0 = 0.05, k = 0.0025, steps = 400 }
y = [0.0]
s = 0.5
rho = 0.25
theta = 0.0625
theorem = true
"#;

#[test]
fn km_heat_trace() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_with(dir.path(), "km", KM_HEAT, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&out.join("km_trace.csv"));
    assert_eq!(h, ["j", "rho_j", "tau_j", "ihat", "delta_hat", "delta_j", "l_j", "A_j", "branch"]);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[8] == "hat" || r[8] == "root"));
    assert!(rows.iter().any(|r| r[8] == "root"));
    let s = json(&out.join("km_summary.json"));
    let exact = (-0.0f64 / (4.0 * 0.5)).exp() / (4.0 * std::f64::consts::PI * 0.5).sqrt();
    assert!(s["l_inf"].as_f64().unwrap() >= exact);
    assert!(s["trace_check"]["nested"].as_bool().unwrap());
    assert!(s["theorem"]["ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn km_zero_iterations_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{KM_HEAT}\n[km.settings]\nj_max = 0\n");
    let (o, out) = run_with(dir.path(), "km", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("km_trace.csv")).unwrap(),
        "j,rho_j,tau_j,ihat,delta_hat,delta_j,l_j,A_j,branch\n"
    );
}

#[test]
fn km_missing_solution_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[params]
p = 3.0
n = 1

[km]
solution = { kind = "file", path = "does-not-exist.json" }
y = [0.0]
s = 0.5
rho = 0.2
theta_scale = 0.4
"#;
    let (o, out) = run_with(dir.path(), "km", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does-not-exist.json"));
    assert!(!out.exists());
}

#[test]
fn km_on_solver_output() {
    let dir = TempDir::new().unwrap();
    let solve_cfg = r#"
[solve]
p = 3.0
geometry = { kind = "line", a = -2.0, b = 2.0 }
boundary = "zero_flux"
cells = 128
t0 = 0.1
k = 0.005
steps = 120
initial = { kind = "exact", solution = { kind = "barenblatt", p = 3.0, dim = 1, c = 0.2 } }
"#;
    let (o, out) = run_with(dir.path(), "solve", solve_cfg, &[]);
    assert!(o.status.success());
    let km_cfg = format!(
        r#"
[params]
p = 3.0
n = 1

[km]
solution = {{ kind = "file", path = "{}" }}
y = [0.2]
s = 0.4
rho = 0.2
theta_scale = 0.4
"#,
        out.join("solution.json").display()
    );
    let (o, out) = run_with(dir.path(), "km", &km_cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("km_summary.json"));
    assert!(s["l_inf"].as_f64().unwrap() >= s["u_plus"].as_f64().unwrap());
}
