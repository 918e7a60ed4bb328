use std::path::Path;
use std::process::{Command, Output};

fn parkedchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parkedchain")).args(args).output().expect("binary runs")
}

fn problem(dir: &Path, rho: &str) -> String {
    let path = dir.join(format!("problem-{rho}.toml"));
    let text = format!(
        "[task]\nrho = {rho}\nkappa = 1e4\ntask_bits = 4e6\nf_local = 0.5e9\nrates = [5.5e6]\n\
         epsilon = 1e-28\nenergy_price = 0.1\nf_max = 3e9\n\n[types]\ntheta = [0.4, 0.6, 0.8]\nbeta = [0.3, 0.4, 0.3]\n"
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn scenario_writes_csv_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = |seed: &str| {
        let o = parkedchain(&["arrival-histogram", "--seed", seed, "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join("arrival-histogram.csv")).unwrap()
    };
    let first = run("4");
    assert_eq!(run("4"), first);
    assert_ne!(run("5"), first);
    let csv = String::from_utf8(first).unwrap();
    assert_eq!(csv.lines().next(), Some("hour,arrivals,share,mean_duration_hours"));
    assert_eq!(csv.lines().count(), 25);
    let prov = std::fs::read_to_string(dir.path().join("provenance.txt")).unwrap();
    assert!(prov.contains("seed = 5") && prov.contains("source = synthetic"), "{prov}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[params]\ngamma = [0.3, 0.3, 0.3]\ntask_bits = -1.0\n").unwrap();
    let o = parkedchain(&["collusion", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.gamma") && err.contains("params.task_bits"), "{err}");

    assert_eq!(parkedchain(&["fig-12"]).status.code(), Some(2));
    assert_eq!(parkedchain(&["arrival-histogram", "--trace", "/no/such/trace.csv"]).status.code(), Some(2));
    assert_eq!(parkedchain(&["solve"]).status.code(), Some(2));
    assert_eq!(parkedchain(&["arrival-histogram", "--seed", "x"]).status.code(), Some(2));
}

#[test]
fn solve_reports_each_scheme_and_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = parkedchain(&["solve", "--problem", &problem(dir.path(), "0.1"), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let schemes: Vec<&str> = stdout.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(schemes, ["LC", "LIA", "LA", "SA", "linear"]);
    assert!(dir.path().join("menu_LIA.csv").is_file());

    let o = parkedchain(&["solve", "--problem", &problem(dir.path(), "1e40"), "--scheme", "LC", "--out", out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_prints_the_normalized_config() {
    let o = parkedchain(&["validate", "--seed", "11"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("seed = 11\n"), "{text}");
    assert!(text.contains("gamma = [0.3, 0.4, 0.3]"));
}
