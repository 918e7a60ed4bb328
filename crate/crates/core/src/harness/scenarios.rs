use std::fs::File;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::table::{cell, Provenance, ResultTable};
use super::{HarnessError, Scenario};
use crate::consensus::{collusion_experiment, reputation_series, ReputationSeries};
use crate::contract::{preferred_item, pv_utility, solve, sr_expected_utility, sr_term, ContractMenu, ContractProblem, Scheme};
use crate::parking::{
    default_arrival_weights, ingest_trace, synthesize_population, GammaMixtureParams, SampledPv, TraceSummary, HOURS,
};
use crate::reputation::ReputationScheme;

const SCHEMES: [ReputationScheme; 2] = [ReputationScheme::SubjectiveLogic, ReputationScheme::Linear];

/// Ties below this margin resolve to the type's own item.
pub const SELECTION_TIE: f64 = 1e-9;

/// Parked-vehicle population used by the parking and contract scenarios.
pub struct ParkingData {
    pub summary: TraceSummary,
    pub mixture: GammaMixtureParams,
    /// `synthetic` or the trace path.
    pub source: String,
}

impl ParkingData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let mixture = cfg.mixture()?;
        let s = &cfg.population;
        let (summary, source) = match &s.trace {
            Some(path) => {
                let file =
                    File::open(path).map_err(|source| HarnessError::Read { path: path.clone(), source })?;
                (ingest_trace(file)?, format!("trace {}", path.display()))
            }
            None => {
                let pvs = synthesize_population(&mixture, &default_arrival_weights(), s.arrivals, s.horizon, cfg.seed)?;
                let records = pvs.iter().map(SampledPv::record).collect();
                (TraceSummary::from_records(records), "synthetic".to_string())
            }
        };
        Ok(Self { summary, mixture, source })
    }

    /// Contract problem for the vehicles parked at clock hour `hour`.
    pub fn problem_at(&self, cfg: &ExperimentConfig, hour: u8) -> Result<ContractProblem, HarnessError> {
        let types = self.summary.types_at(hour, cfg.population.horizon, &self.mixture, cfg.params.types)?;
        let params = cfg.params.task_params(types.len());
        Ok(ContractProblem::new(types, params)?)
    }
}

/// Menus of the five compared schemes, in `Scheme::COMPARED` order.
pub fn solve_compared(problem: &ContractProblem) -> Result<Vec<ContractMenu>, HarnessError> {
    Scheme::COMPARED.iter().map(|&s| Ok(solve(problem, s)?)).collect()
}

/// SL and LR reputation series of every sweep seed, in seed order.
pub fn detection_runs(cfg: &ExperimentConfig) -> Result<Vec<[ReputationSeries; 2]>, HarnessError> {
    let r = &cfg.reputation;
    let dc = cfg.detection(r.onset, r.slots, cfg.consensus.threshold);
    cfg.sweep_seeds()
        .par_iter()
        .map(|&seed| {
            Ok([reputation_series(&dc, SCHEMES[0], seed)?, reputation_series(&dc, SCHEMES[1], seed)?])
        })
        .collect()
}

/// Runs one scenario. The table depends only on the config and its seed.
pub fn run_scenario(scenario: Scenario, cfg: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    cfg.check()?;
    let digest = cfg.digest();
    let provenance = |source: String| Provenance::new(scenario.name(), digest, cfg.seed, source);
    let uses_parking = matches!(
        scenario,
        Scenario::ArrivalHistogram | Scenario::ContractFeasibility | Scenario::UtilityVsHour | Scenario::UtilityVsType
    );
    let parking = if uses_parking { Some(ParkingData::load(cfg)?) } else { None };
    let source = parking.as_ref().map_or_else(|| "none".to_string(), |p| p.source.clone());
    let mut table = ResultTable::new(scenario.columns(), provenance(source));
    match scenario {
        Scenario::ArrivalHistogram => arrival_histogram(parking.as_ref().expect("loaded"), &mut table),
        Scenario::ReputationDecay => reputation_decay(cfg, &mut table)?,
        Scenario::DetectionRate => detection_rate(cfg, &mut table)?,
        Scenario::Collusion => collusion(cfg, &mut table)?,
        Scenario::ContractFeasibility => {
            let p = parking.as_ref().expect("loaded").problem_at(cfg, cfg.population.slot_hour)?;
            contract_feasibility(&p, &mut table)?;
        }
        Scenario::UtilityVsHour => utility_vs_hour(cfg, parking.as_ref().expect("loaded"), &mut table)?,
        Scenario::UtilityVsType => {
            let p = parking.as_ref().expect("loaded").problem_at(cfg, cfg.population.slot_hour)?;
            utility_vs_type(&p, &mut table)?;
        }
    }
    Ok(table)
}

fn arrival_histogram(parking: &ParkingData, table: &mut ResultTable) {
    let total: u64 = parking.summary.histogram.iter().sum();
    let mut duration = [0.0f64; HOURS];
    for r in &parking.summary.records {
        duration[r.arrival_hour as usize] += r.duration_hours;
    }
    for h in 0..HOURS {
        let count = parking.summary.histogram[h];
        let mean = if count == 0 { 0.0 } else { duration[h] / count as f64 };
        let share = if total == 0 { 0.0 } else { count as f64 / total as f64 };
        table.push(vec![h.to_string(), count.to_string(), cell(share), cell(mean)]);
    }
}

fn reputation_decay(cfg: &ExperimentConfig, table: &mut ResultTable) -> Result<(), HarnessError> {
    let r = &cfg.reputation;
    let jobs: Vec<(u64, ReputationScheme)> =
        r.decay_onsets.iter().flat_map(|&o| SCHEMES.map(|s| (o, s))).collect();
    let series: Vec<ReputationSeries> = jobs
        .par_iter()
        .map(|&(onset, scheme)| {
            let dc = cfg.detection(onset, r.decay_slots, cfg.consensus.threshold);
            reputation_series(&dc, scheme, cfg.seed)
        })
        .collect::<Result<_, _>>()?;
    for ((onset, scheme), s) in jobs.iter().zip(&series) {
        for (k, g) in s.slots.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let values: Vec<f64> = g.values().copied().collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            table.push(vec![
                onset.to_string(),
                scheme.tag().to_string(),
                (k + 1).to_string(),
                cell(mean),
                cell(min),
                cell(max),
            ]);
        }
    }
    Ok(())
}

fn detection_rate(cfg: &ExperimentConfig, table: &mut ResultTable) -> Result<(), HarnessError> {
    let runs = detection_runs(cfg)?;
    let seeds = runs.len() as f64;
    for &threshold in &cfg.reputation.detection_thresholds {
        for (i, scheme) in SCHEMES.iter().enumerate() {
            let detections: Vec<_> = runs.iter().map(|r| r[i].detection(threshold)).collect();
            for slot in 1..=cfg.reputation.slots {
                let k = slot as usize - 1;
                let rate = detections.iter().map(|d| d.rates[k]).sum::<f64>() / seeds;
                let full = detections.iter().filter(|d| d.full_detection_slot.is_some_and(|s| s <= slot)).count();
                table.push(vec![
                    cell(threshold),
                    scheme.tag().to_string(),
                    slot.to_string(),
                    cell(rate),
                    cell(full as f64 / seeds),
                ]);
            }
        }
    }
    Ok(())
}

fn collusion(cfg: &ExperimentConfig, table: &mut ResultTable) -> Result<(), HarnessError> {
    let points = collusion_experiment(&cfg.collusion(), &cfg.reputation.collusion_thresholds, &cfg.sweep_seeds())?;
    for p in points {
        table.push(vec![
            cell(p.threshold),
            p.scheme.tag().to_string(),
            cell(p.probability),
            cell(p.mean_committee),
            cell(p.mean_colluders),
        ]);
    }
    Ok(())
}

fn contract_feasibility(p: &ContractProblem, table: &mut ResultTable) -> Result<(), HarnessError> {
    for scheme in [Scheme::Lagrangian, Scheme::LocalAsymmetric] {
        let menu = solve(p, scheme)?;
        for j in 0..p.n() {
            let best = preferred_item(&menu, p, j, SELECTION_TIE);
            for (k, item) in menu.items.iter().enumerate() {
                table.push(vec![
                    scheme.tag().to_string(),
                    (j + 1).to_string(),
                    (k + 1).to_string(),
                    cell(item.f),
                    cell(item.pi),
                    cell(pv_utility(p.theta(j), item.f, item.pi, &p.params)),
                    (k == j).to_string(),
                    (k == best).to_string(),
                ]);
            }
        }
    }
    Ok(())
}

fn utility_vs_hour(cfg: &ExperimentConfig, parking: &ParkingData, table: &mut ResultTable) -> Result<(), HarnessError> {
    let rows: Vec<Vec<String>> = (0..HOURS as u8)
        .into_par_iter()
        .map(|hour| {
            let p = parking.problem_at(cfg, hour)?;
            let menus = solve_compared(&p)?;
            let mut row = vec![hour.to_string(), p.n().to_string()];
            row.extend(menus.iter().map(|m| cell(sr_expected_utility(m, &p))));
            row.extend(menus.iter().map(|m| cell(m.expected_pv_utility(&p))));
            Ok(row)
        })
        .collect::<Result<_, HarnessError>>()?;
    for row in rows {
        table.push(row);
    }
    Ok(())
}

fn utility_vs_type(p: &ContractProblem, table: &mut ResultTable) -> Result<(), HarnessError> {
    let menus = solve_compared(p)?;
    let pv: Vec<Vec<f64>> = menus.iter().map(|m| m.pv_utilities(p)).collect();
    for j in 0..p.n() {
        let mut row = vec![(j + 1).to_string(), cell(p.theta(j)), cell(p.beta(j))];
        row.extend(menus.iter().map(|m| cell(sr_term(p, j, m.items[j].f, m.items[j].pi))));
        row.extend(pv.iter().map(|u| cell(u[j])));
        table.push(row);
    }
    Ok(())
}
