use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xdiff(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xdiff"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("XDIFF_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "\
n_cells = 32
t_end = 0.1
output_count = 10
dt_init = 1e-3
dt_max = 1e-3
u0 = bump 0.5 0.1 0.2 1.0
v0 = cosine 1.0 0.5 1
";

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_writes_well_formed_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = xdiff(&["simulate", "--config", &cfg, "--dump-fields"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&dir.path().join("diagnostics.csv"));
    assert_eq!(
        header.join(","),
        "t,mass_total,mass_u,mass_v,min_u,min_v,max_u,max_v,inv_u_entropy,v_dissipation"
    );
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[10][0] - 0.1).abs() < 1e-12);

    let (fh, frows) = read_csv(&dir.path().join("fields.csv"));
    assert_eq!(fh.join(","), "t,x,u,v");
    assert_eq!(frows.len(), 11 * 32);
    let (wh, wrows) = read_csv(&dir.path().join("fields_w.csv"));
    assert_eq!(wh.join(","), "t,x,w");
    assert_eq!(wrows.len(), 11 * 33);
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = write_config(a.path(), SMALL);
    xdiff(&["simulate", "--config", &cfg], a.path());
    xdiff(&["simulate", "--config", &cfg], b.path());
    let read = |d: &Path| fs::read(d.join("diagnostics.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn pair_writes_energy_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = xdiff(&["pair", "--config", &cfg, "--delta", "1e-3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("pair.csv"));
    assert_eq!(header.join(","), "t,E_w,E_v,D_u,D_v,E_total,gronwall_ratio");
    assert!(rows[0][1] > 0.0);
    assert!(rows.iter().all(|r| r.iter().all(|x| x.is_finite())));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("C_fit"), "{stdout}");
}

#[test]
fn quiet_suppresses_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = xdiff(&["simulate", "--scenario", "logistic", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(dir.path().join("diagnostics.csv").exists());
}

#[test]
fn weakcheck_and_converge_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("t_end = 0.1", "t_end = 0.125"));
    let out = xdiff(&["weakcheck", "--config", &cfg, "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("weak.csv").exists());
    let out = xdiff(&["converge", "--config", &cfg, "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("refinement.csv").exists());
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_config(dir.path(), &format!("{SMALL}colour = blue\n"));
    let out = xdiff(&["simulate", "--config", &bad_key], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("line 8"), "{err}");

    let missing = dir.path().join("nope.cfg");
    let out = xdiff(&["simulate", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = xdiff(&["simulate", "--scenario", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = xdiff(&["simulate"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = xdiff(&["simulate", "--scenario", "logistic", "--epsilon", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = xdiff(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_thread_count_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_xdiff"))
        .args(["simulate", "--scenario", "logistic", "--out"])
        .arg(dir.path())
        .env("XDIFF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "\
n_cells = 64
t_end = 1.0
output_count = 2
dt_init = 0.5
dt_min = 0.5
dt_max = 0.5
newton_max_iter = 1
newton_tol = 1e-14
u0 = bump 0.5 0.1 0.2 1.0
v0 = cosine 1.0 0.5 1
",
    );
    let out = xdiff(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
