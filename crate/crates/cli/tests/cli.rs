use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ptlstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptlstep"))
        .args(args)
        .env("PTLSTEP_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Copy a shipped config into `dir`, redirecting its output there.
fn localize(name: &str, dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = fs::read_to_string(shipped(name)).unwrap();
    let text = text
        .lines()
        .map(|l| if l.starts_with("dir = ") { "dir = \"out\"".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join(name);
    fs::write(&path, edit(text)).unwrap();
    path
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn shipped_step_configs_cycle_over_the_whole_outer_step() {
    for name in ["step1d_ptl.toml", "step2d_ptl.toml"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = localize(name, dir.path(), |t| t);
        let o = ptlstep(&["run", "-q", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let (header, rows) = csv_rows(&dir.path().join("out/report.csv"));
        assert_eq!(header, ["outer_step", "stage", "cycle", "dt", "ptl_raw", "limited", "iters"]);
        assert!(!rows.is_empty());
        let total: f64 = rows.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
        // outer_dt = 500 dt_euler, and dt_euler is h²/(2ν) or h²/(4ν) on unit spacing
        let outer = if name.starts_with("step1d") { 250.0 } else { 125.0 };
        assert!((total - outer).abs() <= 1e-12 * outer, "{name}: Σdt = {total}");
        assert!(dir.path().join("out/u.csv").exists());
        assert!(dir.path().join("out/u.coords.csv").exists());
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = localize("aniso2d_split.toml", dir.path(), |t| t);
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let o = ptlstep(&["run", "-q", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut files: Vec<_> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        outputs.push(files.iter().map(|f| (f.clone(), fs::read(f).unwrap())).collect::<Vec<_>>());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn multithreaded_run_matches_single_threaded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = localize("step2d_ptl.toml", dir.path(), |t| t);
    let read = || {
        let (_, rows) = csv_rows(&dir.path().join("out/u.csv"));
        rows.iter().map(|r| r[4].parse::<f64>().unwrap()).collect::<Vec<_>>()
    };
    assert!(ptlstep(&["run", "-q", cfg.to_str().unwrap()]).status.success());
    let single = read();
    let o = Command::new(env!("CARGO_BIN_EXE_ptlstep"))
        .args(["--threads", "4", "run", "-q", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for (a, b) in single.iter().zip(read()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} vs {b}");
    }
}

#[test]
fn zero_operators_leave_the_state_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("none.toml");
    fs::write(
        &cfg,
        r#"
seed = 7
outer_dt = 0.5
n_outer_steps = 3

[grid]
sizes = [5, 4]
extents = [[0.0, 1.0], [0.0, 2.0]]

[[fields]]
name = "q"
components = 2
initial = { preset = "random", low = -1.0, high = 1.0 }

[output]
dir = "out"
snapshot_every = 1
"#,
    )
    .unwrap();
    let o = ptlstep(&["run", "-q", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read(dir.path().join("out/q_step0000.csv")).unwrap();
    assert_eq!(first, fs::read(dir.path().join("out/q.csv")).unwrap());
    let (_, rows) = csv_rows(&dir.path().join("out/report.csv"));
    assert!(rows.is_empty());
}

#[test]
fn config_errors_name_the_line() {
    let cases: [(&str, &str, &str, &str); 4] = [
        ("step1d_ptl.toml", "preset = \"step\"", "preset = \"ramp\"", ":11:"),
        ("step1d_ptl.toml", "field = \"u\"", "field = \"w\"", ":14:"),
        ("step1d_ptl.toml", "bc = [\"neumann\"]", "bc = [\"neumann\", \"periodic\"]", ":18:"),
        ("aniso2d_split.toml", "seed = 20240611", "", ":17:"),
    ];
    for (name, from, to, line) in cases {
        let dir = tempfile::tempdir().unwrap();
        let cfg = localize(name, dir.path(), |t| t.replacen(from, to, 1));
        let o = ptlstep(&["run", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {from} -> {to}");
        let err = stderr(&o);
        assert!(err.contains(line), "expected {line} in `{err}`");
        assert!(!dir.path().join("out/report.csv").exists());
    }
}

#[test]
fn ampfactor_backward_euler_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("amp.csv");
    let o = ptlstep(&["ampfactor", "--schemes", "be", "--r", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["scheme", "r", "theta", "amplification"]);
    assert_eq!(rows.len(), 512);
    let last: f64 = rows[511][3].parse().unwrap();
    assert!((last - 1.0 / 1001.0).abs() < 1e-6);

    let o = ptlstep(&["ampfactor", "--schemes", "exact", "--r", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (_, rows) = csv_rows(&out);
    let last: f64 = rows[511][3].parse().unwrap();
    assert!((last - (-1.0f64).exp()).abs() < 1e-12);

    let o = ptlstep(&["ampfactor", "--schemes", "", "--r", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = ptlstep(&["ampfactor", "--schemes", "rk4", "--r", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn speedup_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("speedup.csv");
    let o = ptlstep(&["speedup", "--rmin", "1", "--rmax", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["scheme", "r", "s", "speedup"]);
    let get = |r: &str| -> f64 {
        rows.iter().find(|row| row[0] == "rkg2" && row[1] == r).unwrap()[3].parse().unwrap()
    };
    assert!((get("500.0") - 500.0 / 55.0).abs() < 1e-12);
    assert!((get("1.0") - 1.0 / 3.0).abs() < 1e-12);

    let o = ptlstep(&["speedup", "--rmin", "10", "--rmax", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_orders() {
    let dir = tempfile::tempdir().unwrap();
    for (scheme, expect) in [("be", 1.0), ("rkg2", 2.0)] {
        let out = dir.path().join(format!("{scheme}.csv"));
        let o = ptlstep(&["convergence", "--scheme", scheme, "--problem", "heat1d", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let stdout = String::from_utf8(o.stdout).unwrap();
        let order: f64 = stdout
            .lines()
            .find_map(|l| l.strip_prefix("order "))
            .unwrap()
            .parse()
            .unwrap();
        assert!((order - expect).abs() < 0.1, "{scheme}: {order}");
        let (header, rows) = csv_rows(&out);
        assert_eq!(header, ["n_steps", "dt", "error"]);
        assert_eq!(rows.len(), 4);
    }
    let o = ptlstep(&["convergence", "--scheme", "be", "--problem", "heat3d"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_documents_every_command() {
    let o = ptlstep(&["--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in ["run", "ampfactor", "speedup", "convergence", "PTLSTEP_THREADS"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
}
