use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Scenario};
use crate::consensus::{CollusionConfig, ConsensusConfig, DetectionConfig, PopulationConfig};
use crate::contract::{TaskParams, Valuation};
use crate::crypto::Digest;
use crate::parking::{GammaMixtureParams, HOURS};
use crate::reputation::WeightConfig;

/// One violated constraint, named by its dotted config key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Simulation parameters shared by the contract and reputation scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationParams {
    /// Number of PV types `N`.
    pub types: usize,
    pub f_local: f64,
    pub kappa: f64,
    pub task_bits: f64,
    /// Transmission rates are spread evenly over `[rate_min, rate_max]`,
    /// lowest type first.
    pub rate_min: f64,
    pub rate_max: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub energy_price: f64,
    pub f_max: f64,
    pub valuation: Valuation,
    /// Familiarity, timeliness and similarity coefficients.
    pub gamma: Vec<f64>,
    /// Timeliness scale and exponent.
    pub alpha: Vec<f64>,
    pub misbehaving: usize,
    pub base_rate: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        let task = TaskParams::default();
        let w = WeightConfig::default();
        Self {
            types: 7,
            f_local: task.f_local,
            kappa: task.kappa,
            task_bits: task.task_bits,
            rate_min: task.rates[0],
            rate_max: task.rates[0],
            epsilon: task.epsilon,
            rho: task.rho,
            energy_price: task.energy_price,
            f_max: task.f_max,
            valuation: task.valuation,
            gamma: vec![w.familiarity, w.timeliness, w.similarity],
            alpha: vec![w.decay_scale, w.decay_exponent],
            misbehaving: 10,
            base_rate: 0.5,
        }
    }
}

impl SimulationParams {
    /// Task parameters for a profile with `n` types.
    pub fn task_params(&self, n: usize) -> TaskParams {
        let rates = if self.rate_min == self.rate_max || n < 2 {
            vec![self.rate_min]
        } else {
            (0..n).map(|j| self.rate_min + (self.rate_max - self.rate_min) * j as f64 / (n - 1) as f64).collect()
        };
        TaskParams {
            rho: self.rho,
            kappa: self.kappa,
            task_bits: self.task_bits,
            f_local: self.f_local,
            rates,
            epsilon: self.epsilon,
            energy_price: self.energy_price,
            f_max: self.f_max,
            valuation: self.valuation,
        }
    }

    pub fn weights(&self) -> WeightConfig {
        WeightConfig {
            familiarity: self.gamma[0],
            timeliness: self.gamma[1],
            similarity: self.gamma[2],
            decay_scale: self.alpha[0],
            decay_exponent: self.alpha[1],
        }
    }
}

/// Where parked vehicles come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationSpec {
    /// `arrival_hour,duration_hours` CSV; a synthetic population is drawn when absent.
    pub trace: Option<PathBuf>,
    /// Per-hour Gamma mixture parameters; built-in values when absent.
    pub mixture: Option<PathBuf>,
    /// Size of the synthetic population.
    pub arrivals: usize,
    /// Stay horizon `τ` in hours.
    pub horizon: f64,
    /// Clock hour used by the single-slot contract scenarios.
    pub slot_hour: u8,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self { trace: None, mixture: None, arrivals: 100_000, horizon: 1.0, slot_hour: 9 }
    }
}

/// Reputation, detection and collusion experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReputationSpec {
    pub population: usize,
    pub collusion_population: usize,
    pub cooperation_before: f64,
    pub cooperation_after: f64,
    pub honest_cooperation: f64,
    pub interactions_min: u32,
    pub interactions_max: u32,
    /// Observation slots of the detection experiment.
    pub slots: u64,
    /// Last cooperative-looking slot in the detection experiment.
    pub onset: u64,
    pub detection_thresholds: Vec<f64>,
    pub decay_onsets: Vec<u64>,
    pub decay_slots: u64,
    /// Seeds per point in the detection and collusion sweeps.
    pub seeds: u64,
    pub observe_slot: u64,
    pub onset_min: u64,
    pub onset_max: u64,
    pub collusion_thresholds: Vec<f64>,
}

impl Default for ReputationSpec {
    fn default() -> Self {
        let p = PopulationConfig::default();
        let d = DetectionConfig::default();
        let c = CollusionConfig::default();
        Self {
            population: p.population,
            collusion_population: c.population.population,
            cooperation_before: p.cooperation_before,
            cooperation_after: p.cooperation_after,
            honest_cooperation: p.honest_cooperation,
            interactions_min: p.interactions_min,
            interactions_max: p.interactions_max,
            slots: d.slots,
            onset: d.onset,
            detection_thresholds: vec![0.4, 0.45, 0.5],
            decay_onsets: vec![5, 10],
            decay_slots: 15,
            seeds: 100,
            observe_slot: c.observe_slot,
            onset_min: c.onset_min,
            onset_max: c.onset_max,
            collusion_thresholds: (1..=12).map(|i| i as f64 * 0.05).map(|t| (t * 100.0).round() / 100.0).collect(),
        }
    }
}

/// Complete, range-checked experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Option<String>,
    pub seed: u64,
    pub params: SimulationParams,
    pub consensus: ConsensusConfig,
    pub population: PopulationSpec,
    pub reputation: ReputationSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 1,
            params: SimulationParams::default(),
            consensus: ConsensusConfig::default(),
            population: PopulationSpec::default(),
            reputation: ReputationSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML; relative file paths are taken relative to `base_dir`.
    /// Returns every range violation at once.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            HarnessError::Config(vec![Diagnostic { key: "toml".into(), message: e.message().to_string() }])
        })?;
        for p in [&mut cfg.population.trace, &mut cfg.population.mixture].into_iter().flatten() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Fails with all diagnostics when any constraint is violated.
    pub fn check(&self) -> Result<(), HarnessError> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(d))
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut bad = |key: &str, message: String| out.push(Diagnostic { key: key.into(), message });

        if let Some(name) = &self.scenario {
            if name.parse::<Scenario>().is_err() {
                bad("scenario", format!("unknown scenario `{name}`"));
            }
        }

        let p = &self.params;
        if p.types < 2 {
            bad("params.types", format!("at least 2 types are required, got {}", p.types));
        }
        let positive = [
            ("params.f_local", p.f_local),
            ("params.kappa", p.kappa),
            ("params.task_bits", p.task_bits),
            ("params.rate_min", p.rate_min),
            ("params.rate_max", p.rate_max),
            ("params.epsilon", p.epsilon),
            ("params.rho", p.rho),
            ("params.energy_price", p.energy_price),
            ("params.f_max", p.f_max),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bad(key, format!("must be positive and finite, got {v}"));
            }
        }
        if p.rate_min > p.rate_max {
            bad("params.rate_min", format!("exceeds rate_max ({} > {})", p.rate_min, p.rate_max));
        }
        if let Valuation::Power { exponent } = p.valuation {
            if !(exponent > 0.0 && exponent < 1.0) {
                bad("params.valuation.exponent", format!("must lie in (0, 1), got {exponent}"));
            }
        }
        if p.gamma.len() != 3 {
            bad("params.gamma", format!("expected 3 coefficients, got {}", p.gamma.len()));
        } else {
            if p.gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
                bad("params.gamma", format!("coefficients {:?} must be nonnegative", p.gamma));
            }
            let sum: f64 = p.gamma.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                bad("params.gamma", format!("coefficients must sum to 1, got {sum}"));
            }
        }
        if p.alpha.len() != 2 {
            bad("params.alpha", format!("expected 2 values (scale, exponent), got {}", p.alpha.len()));
        } else {
            if !(p.alpha[0] > 0.0 && p.alpha[0].is_finite()) {
                bad("params.alpha", format!("timeliness scale must be positive, got {}", p.alpha[0]));
            }
            if !(p.alpha[1] >= 0.0 && p.alpha[1].is_finite()) {
                bad("params.alpha", format!("timeliness exponent must be nonnegative, got {}", p.alpha[1]));
            }
        }
        if !(0.0..=1.0).contains(&p.base_rate) {
            bad("params.base_rate", format!("must lie in [0, 1], got {}", p.base_rate));
        }

        let c = &self.consensus;
        if c.n < 4 {
            bad("consensus.n", format!("at least 4 consensus nodes are required, got {}", c.n));
        }
        if c.n < 3 * c.l + 1 {
            bad("consensus.l", format!("{} faults need at least {} nodes, got {}", c.l, 3 * c.l + 1, c.n));
        }
        if !(0.0..=1.0).contains(&c.threshold) {
            bad("consensus.threshold", format!("must lie in [0, 1], got {}", c.threshold));
        }
        if c.schedule_len == 0 {
            bad("consensus.schedule_len", "must be positive".into());
        }

        let s = &self.population;
        for (key, path) in [("population.trace", &s.trace), ("population.mixture", &s.mixture)] {
            if let Some(path) = path {
                if !path.is_file() {
                    bad(key, format!("file {} does not exist", path.display()));
                }
            }
        }
        if s.arrivals == 0 {
            bad("population.arrivals", "must be positive".into());
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            bad("population.horizon", format!("must be positive and finite, got {}", s.horizon));
        }
        if s.slot_hour as usize >= HOURS {
            bad("population.slot_hour", format!("must lie in 0..=23, got {}", s.slot_hour));
        }

        let r = &self.reputation;
        if r.population < 2 {
            bad("reputation.population", format!("at least 2 nodes are required, got {}", r.population));
        }
        if r.collusion_population < 4 {
            bad("reputation.collusion_population", format!("at least 4 nodes are required, got {}", r.collusion_population));
        }
        if p.misbehaving > r.population.min(r.collusion_population) {
            bad(
                "params.misbehaving",
                format!(
                    "{} misbehaving nodes exceed the population ({} / {})",
                    p.misbehaving, r.population, r.collusion_population
                ),
            );
        }
        for (key, v) in [
            ("reputation.cooperation_before", r.cooperation_before),
            ("reputation.cooperation_after", r.cooperation_after),
            ("reputation.honest_cooperation", r.honest_cooperation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                bad(key, format!("must lie in [0, 1], got {v}"));
            }
        }
        if r.interactions_min == 0 || r.interactions_min > r.interactions_max {
            bad(
                "reputation.interactions_min",
                format!("range {}..={} is empty or starts at zero", r.interactions_min, r.interactions_max),
            );
        }
        for (key, v) in [
            ("reputation.slots", r.slots),
            ("reputation.decay_slots", r.decay_slots),
            ("reputation.seeds", r.seeds),
            ("reputation.observe_slot", r.observe_slot),
        ] {
            if v == 0 {
                bad(key, "must be positive".into());
            }
        }
        if r.onset_min > r.onset_max {
            bad("reputation.onset_min", format!("exceeds onset_max ({} > {})", r.onset_min, r.onset_max));
        }
        for (key, list) in [
            ("reputation.detection_thresholds", &r.detection_thresholds),
            ("reputation.collusion_thresholds", &r.collusion_thresholds),
        ] {
            if list.is_empty() {
                bad(key, "at least one threshold is required".into());
            }
            if let Some(t) = list.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                bad(key, format!("threshold {t} outside [0, 1]"));
            }
        }
        if r.decay_onsets.is_empty() {
            bad("reputation.decay_onsets", "at least one onset is required".into());
        }
        out
    }

    /// Digest of the normalized configuration.
    pub fn digest(&self) -> Digest {
        let text = toml::to_string(self).expect("config serializes to TOML");
        Digest::of(text.as_bytes())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn mixture(&self) -> Result<GammaMixtureParams, HarnessError> {
        let base = GammaMixtureParams::illustrative();
        match &self.population.mixture {
            Some(path) => Ok(GammaMixtureParams::load(path, &base)?),
            None => Ok(base),
        }
    }

    fn population_config(&self, population: usize) -> PopulationConfig {
        let r = &self.reputation;
        PopulationConfig {
            population,
            misbehaving: self.params.misbehaving,
            cooperation_before: r.cooperation_before,
            cooperation_after: r.cooperation_after,
            honest_cooperation: r.honest_cooperation,
            interactions_min: r.interactions_min,
            interactions_max: r.interactions_max,
            base_rate: self.params.base_rate,
            weights: self.params.weights(),
        }
    }

    /// Detection experiment with the given onset and slot count.
    pub fn detection(&self, onset: u64, slots: u64, threshold: f64) -> DetectionConfig {
        DetectionConfig { population: self.population_config(self.reputation.population), threshold, slots, onset }
    }

    pub fn collusion(&self) -> CollusionConfig {
        let r = &self.reputation;
        CollusionConfig {
            population: self.population_config(r.collusion_population),
            observe_slot: r.observe_slot,
            onset_min: r.onset_min,
            onset_max: r.onset_max,
            accept_rule: self.consensus.accept_rule,
        }
    }

    /// Seeds of the detection and collusion sweeps.
    pub fn sweep_seeds(&self) -> Vec<u64> {
        (0..self.reputation.seeds).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

/// Reads and validates a config file. An empty file yields the defaults.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| HarnessError::Read { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ExperimentConfig::from_toml_str(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagnostics(text: &str) -> Vec<Diagnostic> {
        match ExperimentConfig::from_toml_str(text, Path::new(".")) {
            Err(HarnessError::Config(d)) => d,
            other => panic!("expected diagnostics, got {other:?}"),
        }
    }

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("", Path::new(".")).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.params.types, 7);
        assert_eq!(cfg.params.gamma, vec![0.3, 0.4, 0.3]);
        assert_eq!(cfg.params.alpha, vec![10.0, 1.5]);
        assert_eq!(cfg.params.task_params(7), TaskParams::default());
    }

    #[test]
    fn every_violation_is_reported() {
        let d = diagnostics("[params]\ngamma = [0.3, 0.3, 0.3]\ntask_bits = -1.0\n[consensus]\nn = 5\nl = 2\n");
        let keys: Vec<&str> = d.iter().map(|d| d.key.as_str()).collect();
        assert_eq!(keys, vec!["params.task_bits", "params.gamma", "consensus.l"]);
        assert!(d[1].message.contains("sum to 1"), "{}", d[1]);
    }

    #[test]
    fn unknown_keys_and_missing_files_are_rejected() {
        let d = diagnostics("[params]\ntypo = 1\n");
        assert_eq!(d[0].key, "toml");
        let d = diagnostics("[population]\ntrace = \"no/such/file.csv\"\n");
        assert_eq!(d[0].key, "population.trace");
    }

    #[test]
    fn round_trip_keeps_digest() {
        let cfg = ExperimentConfig { seed: 9, ..ExperimentConfig::default() };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string(), Path::new(".")).unwrap();
        assert_eq!(back.digest(), cfg.digest());
        assert_ne!(cfg.digest(), ExperimentConfig::default().digest());
    }
}
