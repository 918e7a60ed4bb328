use std::path::{Path, PathBuf};

use parkingchain::harness::*;
use parkingchain::parking::{default_arrival_weights, synthesize_population, write_trace, GammaMixtureParams, SampledPv};

fn repo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml")
}

/// Defaults with short sweeps so the reputation scenarios run quickly.
fn quick() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.reputation.seeds = 4;
    cfg.reputation.population = 20;
    cfg.reputation.collusion_population = 16;
    cfg.params.misbehaving = 4;
    cfg.population.arrivals = 20_000;
    cfg
}

fn keys(err: HarnessError) -> Vec<String> {
    match err {
        HarnessError::Config(d) => d.into_iter().map(|d| d.key).collect(),
        other => panic!("expected diagnostics, got {other}"),
    }
}

#[test]
fn shipped_config_matches_defaults() {
    let cfg = validate_config(&repo_config()).unwrap();
    let mut expected = ExperimentConfig::default();
    expected.population.mixture = cfg.population.mixture.clone();
    assert_eq!(cfg, expected);
    // The shipped mixture file holds the built-in parameters.
    assert_eq!(cfg.mixture().unwrap(), GammaMixtureParams::illustrative());
}

#[test]
fn empty_file_defaults_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "").unwrap();
    assert_eq!(validate_config(&path).unwrap(), ExperimentConfig::default());

    std::fs::write(&path, "[params]\ngamma = [0.3, 0.3, 0.3]\ntask_bits = -4e6\nrate_max = 0.0\n").unwrap();
    let k = keys(validate_config(&path).unwrap_err());
    assert_eq!(k, ["params.task_bits", "params.rate_max", "params.rate_min", "params.gamma"]);

    let missing = dir.path().join("absent.toml");
    assert!(matches!(validate_config(&missing), Err(HarnessError::Read { .. })));
}

#[test]
fn schemas_and_row_counts() {
    let cfg = quick();
    let r = &cfg.reputation;
    for s in Scenario::ALL {
        let t = run_scenario(s, &cfg).unwrap();
        assert_eq!(t.columns, s.columns(), "{s}");
        assert_eq!(t.provenance.scenario, s.name());
        assert_eq!(t.provenance.config_digest, cfg.digest());
        let rows = t.rows.len();
        match s {
            Scenario::ArrivalHistogram | Scenario::UtilityVsHour => assert_eq!(rows, 24),
            Scenario::ReputationDecay => assert_eq!(rows, r.decay_onsets.len() * 2 * r.decay_slots as usize),
            Scenario::DetectionRate => assert_eq!(rows, r.detection_thresholds.len() * 2 * r.slots as usize),
            Scenario::Collusion => assert_eq!(rows, r.collusion_thresholds.len() * 2),
            Scenario::ContractFeasibility => {
                let n = (rows as f64 / 2.0).sqrt() as usize;
                assert_eq!(rows, 2 * n * n);
            }
            Scenario::UtilityVsType => assert!((2..=cfg.params.types).contains(&rows)),
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = quick();
    for s in Scenario::ALL {
        let a = run_scenario(s, &cfg).unwrap().to_csv_string();
        let b = run_scenario(s, &cfg).unwrap().to_csv_string();
        assert_eq!(a, b, "{s}");
    }
    let other = ExperimentConfig { seed: 2, ..quick() };
    assert_ne!(
        run_scenario(Scenario::ArrivalHistogram, &cfg).unwrap().to_csv_string(),
        run_scenario(Scenario::ArrivalHistogram, &other).unwrap().to_csv_string()
    );
}

#[test]
fn complete_information_bounds_every_scheme_per_type() {
    let t = run_scenario(Scenario::UtilityVsType, &ExperimentConfig::default()).unwrap();
    let lc = t.floats("sr_LC").unwrap();
    for other in ["sr_LIA", "sr_LA", "sr_SA", "sr_linear"] {
        for (j, v) in t.floats(other).unwrap().iter().enumerate() {
            assert!(lc[j] >= v - 1e-9 * lc[j].abs().max(1.0), "type {}: LC {} < {other} {v}", j + 1, lc[j]);
        }
    }
    assert!(t.floats("pv_LC").unwrap().iter().all(|u| u.abs() < 1e-12));
}

#[test]
fn complete_information_leaves_pvs_nothing_at_every_hour() {
    let t = run_scenario(Scenario::UtilityVsHour, &ExperimentConfig::default()).unwrap();
    assert!(t.floats("pv_LC").unwrap().iter().all(|u| u.abs() < 1e-12));
    let hours: Vec<f64> = t.floats("hour").unwrap();
    assert_eq!(hours, (0..24).map(f64::from).collect::<Vec<_>>());
}

#[test]
fn ingested_trace_reproduces_the_synthetic_tables() {
    let cfg = quick();
    let pvs = synthesize_population(
        &GammaMixtureParams::illustrative(),
        &default_arrival_weights(),
        cfg.population.arrivals,
        cfg.population.horizon,
        cfg.seed,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let records: Vec<_> = pvs.iter().map(SampledPv::record).collect();
    write_trace(std::fs::File::create(&path).unwrap(), &records).unwrap();
    let mut traced = cfg.clone();
    traced.population.trace = Some(path);
    for s in [Scenario::ArrivalHistogram, Scenario::UtilityVsType] {
        let a = run_scenario(s, &cfg).unwrap();
        let b = run_scenario(s, &traced).unwrap();
        assert_eq!(a.rows, b.rows, "{s}");
        assert_eq!(a.provenance.source, "synthetic");
        assert!(b.provenance.source.starts_with("trace "));
    }
}

#[test]
fn outputs_land_in_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_scenario(Scenario::ArrivalHistogram, &quick()).unwrap();
    let csv = t.write_to_dir(dir.path()).unwrap();
    assert_eq!(csv, dir.path().join("arrival-histogram.csv"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), t.to_csv_string());
    let prov = std::fs::read_to_string(dir.path().join("provenance.txt")).unwrap();
    assert!(prov.contains(&format!("config_digest = {}", quick().digest())));
}
