use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracfield"));
    c.env_remove("FRACFIELD_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows (no `#` lines, no column row) split on commas.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn summary(csv: &str, key: &str) -> f64 {
    let prefix = format!("# {key}=");
    csv.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key}")).parse().unwrap()
}

fn col(rows: &[Vec<String>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn deriv_examples() {
    let csv = stdout(&["deriv", "--op", "caputo-left", "--alpha", "0.5", "--fn", "monomial:1", "--grid", "0,1,256"]);
    assert!(csv.starts_with("# fracfield deriv config_hash="));
    assert!(csv.lines().nth(2) == Some("x,f,approx,oracle,abs_err"));
    let r = rows(&csv);
    assert_eq!(r.len(), 257);
    assert!(col(&r, 4).iter().all(|&e| e <= 0.01));

    let csv = stdout(&["deriv", "--op", "caputo-left", "--alpha", "0.5", "--fn", "const:3"]);
    assert!(col(&rows(&csv), 2).iter().all(|v| v.abs() <= 1e-12));

    let out = run(&["deriv", "--op", "caputo-left"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--alpha") && err.contains("Usage"), "{err}");
}

#[test]
fn converge_examples() {
    let csv = stdout(&["converge", "--op", "caputo-left", "--alpha", "0.5", "--fn", "monomial:3", "--grid", "0,1,64", "--levels", "5"]);
    let r = rows(&csv);
    assert_eq!(col(&r, 0), vec![64.0, 128.0, 256.0, 512.0, 1024.0]);
    assert!(r[0][3].is_empty());
    // observed_order = log2(err(n) / err(2n)), reported on the finer row.
    let errs = col(&r, 2);
    let last: f64 = r[4][3].parse().unwrap();
    assert!((last - (errs[3] / errs[4]).log2()).abs() < 1e-12);
    assert!(last >= 1.35, "{last}");

    let csv = stdout(&["converge", "--op", "rl-left", "--alpha", "0.5", "--fn", "monomial:2"]);
    assert!(summary(&csv, "final_observed_order") >= 0.8);

    let csv = stdout(&["converge", "--op", "caputo-left", "--alpha", "1", "--fn", "monomial:3"]);
    assert!((summary(&csv, "final_observed_order") - 1.0).abs() <= 0.2);

    assert_eq!(code(&["converge", "--alpha", "0.5", "--grid", "0,1,1024", "--levels", "5"]), 2);
}

#[test]
fn el_check_example() {
    let csv = stdout(&["el-check", "--density", "frac-kinetic:0.5", "--mode", "discrete-exact"]);
    assert_eq!(csv.lines().nth(2), Some("epsilon,gateaux,inner_product,defect,gateaux_im,inner_product_im"));
    assert!(col(&rows(&csv), 3).iter().all(|&d| d <= 1e-8));
    // The order may come from --alpha.
    let csv = stdout(&["el-check", "--density", "complex-scalar", "--alpha", "0.7", "--mode", "discrete-exact"]);
    assert!(summary(&csv, "relative_defect") <= 1e-8);
}

#[test]
fn noether_check_example() {
    let csv = stdout(&["noether-check", "--density", "complex-scalar:0.5", "--mode", "discrete-exact", "--on-shell"]);
    assert_eq!(csv.lines().nth(2), Some("x,residual_re,residual_im"));
    assert!(summary(&csv, "interior_max_rel") <= 1e-6);
    let off = stdout(&["noether-check", "--density", "complex-scalar:0.5", "--mode", "discrete-exact"]);
    assert!(summary(&csv, "interior_max") <= 1e-3 * summary(&off, "interior_max"));

    // Phase needs conjugate pairs.
    assert_eq!(code(&["noether-check", "--density", "frac-kinetic:0.5"]), 2);
}

#[test]
fn noether_check_matrix_generator() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("gen.toml");
    std::fs::write(&m, "re = [[1, 0], [0, -1]]\n").unwrap();
    let sym = format!("matrix:{}", m.display());
    let a = stdout(&["noether-check", "--density", "complex-scalar:0.5", "--symmetry", &sym]);
    let b = stdout(&["noether-check", "--density", "complex-scalar:0.5", "--symmetry", "phase"]);
    // diag(1, -1) is the phase generator.
    assert_eq!(rows(&a), rows(&b));

    std::fs::write(&m, "re = [[1, 0, 0]]\n").unwrap();
    assert_eq!(code(&["noether-check", "--density", "complex-scalar:0.5", "--symmetry", &sym]), 2);
    let missing = format!("matrix:{}", dir.path().join("none.toml").display());
    assert_eq!(code(&["noether-check", "--density", "complex-scalar:0.5", "--symmetry", &missing]), 4);
}

#[test]
fn dirac_example_and_siblings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = out.to_str().unwrap();
    let printed = stdout(&["dirac", "--alpha", "1", "--mass", "1", "--grid", "0,1,512", "-o", o, "--emit-plot-script"]);
    assert!(printed.contains("continuity_defect="));
    let csv = std::fs::read_to_string(&out).unwrap();
    let h = 1.0 / 512.0;
    let j0_max = col(&rows(&csv), 3).iter().zip(col(&rows(&csv), 4)).map(|(a, b)| a.hypot(b)).fold(0.0, f64::max);
    assert!(summary(&csv, "continuity_defect") <= 10.0 * h * j0_max);
    assert!(csv.lines().nth(2) == Some("t,conserved_residual_re,conserved_residual_im,j0_re,j0_im"));

    let psi = std::fs::read_to_string(dir.path().join("run.psi.csv")).unwrap();
    assert!(psi.starts_with("# fracfield dirac psi config_hash="));
    assert_eq!(rows(&psi).len(), 513);
    assert!(dir.path().join("run.psibar.csv").exists());
    let script = std::fs::read_to_string(dir.path().join("run.plot.py")).unwrap();
    assert!(script.contains("matplotlib") && script.contains("run.csv"));

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "dirac");
    assert_eq!(meta["config"]["alpha"], 1.0);
    let hash = meta["config_hash"].as_str().unwrap();
    assert!(csv.lines().next().unwrap().ends_with(hash));
}

#[test]
fn identical_configs_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        stdout(&["el-check", "--density", "two-sided:0.4:0.7", "-o", p.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"deriv\"\nalpha = 0.3\nop = \"rl-left\"\nfn = \"monomial:2\"\ngrid = \"0,2,64\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&["deriv", "--config", c]);
    let by_flags = stdout(&["deriv", "--alpha", "0.3", "--op", "rl-left", "--fn", "monomial:2", "--grid", "0,2,64"]);
    assert_eq!(from_file, by_flags);

    let overridden = stdout(&["deriv", "--config", c, "--alpha", "0.9"]);
    let expect = stdout(&["deriv", "--alpha", "0.9", "--op", "rl-left", "--fn", "monomial:2", "--grid", "0,2,64"]);
    assert_eq!(overridden, expect);

    assert_eq!(code(&["converge", "--config", c]), 2);
    std::fs::write(&cfg, "alpha = 0.3\nbogus = 1\n").unwrap();
    assert_eq!(code(&["deriv", "--config", c]), 2);
    assert_eq!(code(&["deriv", "--config", dir.path().join("none.toml").to_str().unwrap()]), 4);
}

fn data_values(csv: &str) -> Vec<f64> {
    rows(csv).iter().flatten().filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect()
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["noether-check", "--density", "complex-scalar:0.6", "--grid", "0,1,4096"];
    let one = stdout(&[&args[..], &["--threads", "1"]].concat());
    let many = stdout(&[&args[..], &["--threads", "4"]].concat());
    let env = String::from_utf8(bin().args(args).env("FRACFIELD_THREADS", "3").output().unwrap().stdout).unwrap();
    for other in [&many, &env] {
        for (a, b) in data_values(&one).iter().zip(data_values(other)) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
    let bad = bin().args(args).env("FRACFIELD_THREADS", "lots").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(code(&[&args[..], &["--threads", "0"]].concat()), 2);
}

#[test]
fn exit_code_contract() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["deriv", "--alpha", "1.5"]), 2);
    assert_eq!(code(&["deriv", "--alpha", "0.5", "--grid", "0,1,8"]), 2);
    assert_eq!(code(&["deriv", "--alpha", "0.5", "--fn", "rmonomial:1"]), 2);
    assert_eq!(code(&["el-check", "--density", "nope:0.5"]), 2);
    assert_eq!(code(&["deriv", "--alpha", "0.5", "--emit-plot-script"]), 2);
    assert_eq!(code(&["dirac", "--alpha", "0.5", "--grid", "1,2,64"]), 2);
    let numeric = ["dirac", "--alpha", "0.5", "--mass", "100", "--grid", "0,100,64", "--solver", "mittag-leffler"];
    let out = run(&numeric);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("range error"));
    let missing_dir = Path::new("/nonexistent-dir/out.csv").to_str().unwrap();
    assert_eq!(code(&["deriv", "--alpha", "0.5", "-o", missing_dir]), 4);
}
