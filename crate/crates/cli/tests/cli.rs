use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polycert::barrier::WindPolicy;
use polycert_cli::{certificate_blocks, parse_wind, CertifyProblem, RunConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polycert"));
    c.env_remove("POLYCERT_BACKEND");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn motzkin_is_infeasible_with_exit_two() {
    let o = run(&["certify", "--poly", data("motzkin.txt").to_str().unwrap(), "--cone", "sos", "--half-degree", "3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("infeasible"));
}

#[test]
fn certificates_verify_in_a_fresh_process() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("mxy.cert");
    let o = run(&[
        "certify",
        "--poly",
        data("motzkin_xy.txt").to_str().unwrap(),
        "--cone",
        "sos",
        "--half-degree",
        "4",
        "--out",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for args in [vec!["verify"], vec!["certify", "verify"]] {
        let mut a = args.clone();
        a.push(cert.to_str().unwrap());
        let o = run(&a);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("PASS"));
    }

    // one corrupted Gram entry
    let text = std::fs::read_to_string(&cert).unwrap();
    let bad: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let first_row = text.lines().position(|l| l.starts_with("row ")).unwrap();
            if i == first_row {
                let mut parts: Vec<String> = l.split(' ').map(String::from).collect();
                let v: f64 = parts[1].parse().unwrap();
                parts[1] = format!("{:e}", v + 0.5);
                parts.join(" ")
            } else {
                l.to_string()
            }
        })
        .collect();
    let bad_path = dir.path().join("bad.cert");
    std::fs::write(&bad_path, bad.join("\n")).unwrap();
    let o = run(&["verify", bad_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL") && stdout(&o).contains("identity residual"));
}

#[test]
fn constrained_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("i.cert");
    let o = run(&[
        "certify",
        "--poly",
        data("interval.txt").to_str().unwrap(),
        "--cone",
        "dsos",
        "--out",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(run(&["verify", cert.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn coverage_rates_and_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("cov.txt");
    let o = run(&["coverage", "--instance", "paper-fig1", "--mult-degree", "2", "--cone", "sos", "--out", sol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&sol).unwrap();
    let rates: Vec<f64> = text
        .lines()
        .find_map(|l| l.strip_prefix("rates "))
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((rates[0] - 2.561).abs() <= 0.05 && (rates[1] - 5.550).abs() <= 0.05);
    assert_eq!(certificate_blocks(&text).len(), 5);
    assert_eq!(run(&["verify", sol.to_str().unwrap()]).status.code(), Some(0));

    let o = run(&["coverage", "--mult-degree", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("infeasible"));
}

#[test]
fn usage_errors_exit_one() {
    let motzkin = data("motzkin.txt");
    let m = motzkin.to_str().unwrap();
    for args in [
        vec!["bogus"],
        vec!["certify", "--poly", m, "--cone", "nope"],
        vec!["--backend", "clarabel-socp", "certify", "--poly", m, "--cone", "sos"],
        vec!["--backend", "mosek", "certify", "--poly", m],
        vec!["certify", "--poly", "/nonexistent/file.txt"],
        vec!["certify"],
        vec!["barrier-sim", "--wind", "0.5"],
        vec!["roa", "--system", "nothing"],
        vec!["roa", "--system", "cubic", "--v-degree", "3"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    // cone/backend validation happens before any solve, also from the environment
    let o = bin()
        .env("POLYCERT_BACKEND", "clarabel-socp")
        .args(["certify", "--poly", m, "--cone", "sos"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin()
        .env("POLYCERT_BACKEND", "clarabel-socp")
        .args(["--backend", "clarabel", "certify", "--poly", m, "--cone", "sos"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = \"seven\"\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "roa", "--system", "cubic"]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(&cfg, "colour = 3\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "roa", "--system", "cubic"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn table1_output_is_byte_identical_and_seeded_by_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);
    let args = |path: &Path| {
        vec![
            "barrier-table1".to_string(),
            "--envs".into(),
            "3".into(),
            "--psi".into(),
            "0,30".into(),
            "--cones".into(),
            "sdsos".into(),
            "--out".into(),
            path.to_str().unwrap().into(),
        ]
    };
    let mut a = args(&out("a.csv"));
    a.extend(["--seed".into(), "7".into()]);
    assert_eq!(bin().args(&a).status().unwrap().code(), Some(0));
    let mut b = args(&out("b.csv"));
    b.extend(["--seed".into(), "7".into()]);
    assert_eq!(bin().args(&b).status().unwrap().code(), Some(0));
    let mut c = vec!["--config".to_string(), data("run.toml").to_str().unwrap().into()];
    c.extend(args(&out("c.csv")));
    assert_eq!(bin().args(&c).status().unwrap().code(), Some(0));
    let read = |n: &str| std::fs::read(out(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
    let text = String::from_utf8(read("a.csv")).unwrap();
    assert!(text.starts_with("psi0_deg,sdsos_success_pct\n0,"));
}

#[test]
fn simulation_and_roa_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..2 {
        let t = dir.path().join(format!("t{k}.csv"));
        let o = run(&["barrier-sim", "--seed", "5", "--index", "2", "--wind", "uniform", "--duration", "0.2", "--out", t.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let r = dir.path().join(format!("r{k}.txt"));
        let o = run(&["roa", "--system", "van-der-pol", "--out", r.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("t0.csv"), read("t1.csv"));
    assert_eq!(read("r0.txt"), read("r1.txt"));
    let other = dir.path().join("t2.csv");
    run(&["barrier-sim", "--seed", "6", "--index", "2", "--wind", "uniform", "--duration", "0.2", "--out", other.to_str().unwrap()]);
    assert_ne!(read("t0.csv"), read("t2.csv"));
}

#[test]
fn negative_values_are_not_flags() {
    let o = run(&["barrier-sim", "--wind", "-0.05", "--duration", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.txt");
    let o = run(&["roa", "--system", "cubic", "--slice", "0,0", "--bbox", "-2,2,-2,2", "--resolution", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("c.slice.csv")).unwrap();
    assert!(csv.starts_with("xi,xj,v,inside\n-2"));
}

#[test]
fn roa_reports_and_checks() {
    let o = run(&["roa", "--system", "cubic", "--cone", "sos", "--check", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("rho 0.99") || s.contains("rho 1.00"), "{s}");
    assert!(s.contains("failures 0"));
}

#[test]
fn problem_file_parsing() {
    let p = CertifyProblem::from_text("nvars 1\npoly 1.0 + -1.0 * x0\ng 1.0 + -1.0 * x0^2\nh 1.0 * x0\n").unwrap();
    assert_eq!(p.poly.nvars(), 1);
    assert_eq!(p.set.constraints().len(), 3);
    assert!(CertifyProblem::from_text("poly 1.0\n").is_err());
    assert!(CertifyProblem::from_text("nvars 1\n").is_err());
    assert!(CertifyProblem::from_text("nvars 1\npoly 1.0\nq 2\n").is_err());
}

#[test]
fn wind_and_config_parsing() {
    assert_eq!(parse_wind("0").unwrap(), WindPolicy::Constant(0.0));
    assert_eq!(parse_wind("-0.05").unwrap(), WindPolicy::Constant(-0.05));
    assert_eq!(parse_wind("uniform").unwrap(), WindPolicy::UniformRandom);
    assert_eq!(parse_wind("switching:0.1").unwrap(), WindPolicy::Switching { period: 0.1 });
    assert!(parse_wind("0.06").is_err());
    assert!(parse_wind("switching:-1").is_err());
    let cfg: RunConfig = toml::from_str("backend = \"clarabel\"\nseed = 3\n[solver]\nmax_iter = 50\n").unwrap();
    assert_eq!(cfg.seed, Some(3));
    assert_eq!(cfg.solver.max_iter, Some(50));
}
