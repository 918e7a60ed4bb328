#![allow(dead_code)]

use parkingchain::ledger::{
    Address, Amount, ContractItem, ContractState, Ledger, RequestSpec, Verdict,
};
use parkingchain::parking::{stay_probability, GammaMixtureParams, HourMixture, PvState};
use parkingchain::reputation::{Opinion, MASS_TOLERANCE};
use parkingchain::rng;
use parkingchain::contract::{pv_utility, ContractMenu, ContractProblem, TaskParams};
use parkingchain::parking::TypeProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

#[derive(Debug, Default, Clone, Copy)]
pub struct FuzzStats {
    pub operations: usize,
    pub rejected: usize,
    pub paid: usize,
    pub refunded: usize,
    pub confiscated: usize,
}

/// Everything observable about balances and contract progress.
fn snapshot(l: &Ledger) -> (Vec<(Address, Amount)>, Vec<(Address, ContractState, Amount)>, Amount, u128) {
    (
        l.accounts().map(|a| (a.address, a.balance)).collect(),
        l.contracts().map(|c| (c.address, c.state, c.escrow)).collect(),
        l.treasury(),
        l.total_funds(),
    )
}

/// Runs one random operation sequence and checks conservation, rejection
/// atomicity and the state-machine history after every step.
pub fn ledger_sequence(seed: u64, length: usize) -> Result<FuzzStats, String> {
    let mut r = rng::stream(seed, rng::streams::LEDGER);
    let mut l = Ledger::new(1);
    let mut stats = FuzzStats::default();
    let people: Vec<Address> = (0..r.random_range(2..6))
        .map(|i| l.register_account(&format!("node-{i}")).map(|a| a.address))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for &p in &people {
        l.mint(p, Amount(r.random_range(0..300))).map_err(|e| e.to_string())?;
    }
    let mut contracts: Vec<Address> = Vec::new();
    // Mostly pick a contract in the state the operation expects, sometimes any.
    let choose = |l: &Ledger, contracts: &[Address], want: ContractState, r: &mut rng::SimRng| {
        let fitting: Vec<Address> =
            contracts.iter().copied().filter(|c| l.contract(*c).is_ok_and(|x| x.state == want)).collect();
        if !fitting.is_empty() && r.random_bool(0.8) {
            fitting[r.random_range(0..fitting.len())]
        } else {
            contracts[r.random_range(0..contracts.len())]
        }
    };
    for _ in 0..length {
        let before = snapshot(&l);
        let pick = |r: &mut rng::SimRng| people[r.random_range(0..people.len())];
        let result = match r.random_range(0..9) {
            0 => {
                let who = pick(&mut r);
                l.mint(who, Amount(r.random_range(0..200))).map(|_| ())
            }
            1 | 2 => {
                let who = pick(&mut r);
                let items = r.random_range(0..4);
                let menu = (0..items)
                    .map(|k| ContractItem { f_hz: 1_000_000 * (k + 1), reward: Amount(r.random_range(0..60)) })
                    .collect();
                let spec = RequestSpec { task_bits: 4_000_000, required_hz: 1_000_000_000, serving_secs: 3600 };
                l.post_request(who, spec, menu, Amount(r.random_range(0..40))).map(|c| contracts.push(c.address))
            }
            3 | 4 if !contracts.is_empty() => {
                let c = choose(&l, &contracts, ContractState::Deployed, &mut r);
                let who = pick(&mut r);
                l.sign_contract(who, c, r.random_range(0..4), Amount(r.random_range(0..30))).map(|_| ())
            }
            5 | 6 if !contracts.is_empty() => {
                let c = choose(&l, &contracts, ContractState::Signed, &mut r);
                l.execute_task(c, r.random_bool(0.3)).map(|_| ())
            }
            7 | 8 if !contracts.is_empty() => {
                let c = choose(&l, &contracts, ContractState::ResultSubmitted, &mut r);
                let verdict = Verdict { pass: r.random_bool(0.7), requester_fraud: r.random_bool(0.1) };
                l.verify_and_settle(c, verdict).map(|_| ())
            }
            _ => Ok(()),
        };
        stats.operations += 1;
        if result.is_err() {
            stats.rejected += 1;
            if snapshot(&l) != before {
                return Err(format!("seed {seed}: rejected operation changed state: {result:?}"));
            }
        }
        if l.total_funds() != l.minted().0 as u128 {
            return Err(format!("seed {seed}: funds {} but minted {}", l.total_funds(), l.minted()));
        }
        l.audit().map_err(|e| format!("seed {seed}: {e}"))?;
    }
    for c in l.contracts() {
        match c.state {
            ContractState::Paid => stats.paid += 1,
            ContractState::Refunded => stats.refunded += 1,
            ContractState::Confiscated => stats.confiscated += 1,
            _ => {}
        }
    }
    Ok(stats)
}

/// Random opinion with uncertainty in `(0, 1]`, mass spread uniformly over the simplex.
pub fn random_opinion<R: Rng>(r: &mut R) -> Opinion {
    let (x, y): (f64, f64) = (r.random(), r.random());
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    let u = (1.0 - hi).max(1e-6);
    let b = lo;
    Opinion::new(b, 1.0 - b - u, u, r.random()).expect("simplex point")
}

/// Closure, vacuous neutrality and uncertainty reduction of fusion on
/// `pairs` random opinion pairs.
pub fn opinion_pair_properties(seed: u64, pairs: usize) -> Result<(), String> {
    let mut r = rng::stream(seed, rng::streams::MONTE_CARLO);
    let in_unit = |x: f64| (-MASS_TOLERANCE..=1.0 + MASS_TOLERANCE).contains(&x);
    for i in 0..pairs {
        let (a, b) = (random_opinion(&mut r), random_opinion(&mut r));
        let f = a.fuse(&b).map_err(|e| format!("pair {i}: {e}"))?;
        let mass = f.belief() + f.disbelief() + f.uncertainty();
        if (mass - 1.0).abs() > MASS_TOLERANCE || ![f.belief(), f.disbelief(), f.uncertainty()].into_iter().all(in_unit) {
            return Err(format!("pair {i}: fused {f:?} leaves the simplex"));
        }
        if a.uncertainty() < 1.0 && b.uncertainty() < 1.0 && f.uncertainty() > a.uncertainty().min(b.uncertainty()) + MASS_TOLERANCE {
            return Err(format!("pair {i}: fused uncertainty {} above inputs {a:?} {b:?}", f.uncertainty()));
        }
        let v = a.fuse(&Opinion::vacuous(b.base_rate())).map_err(|e| e.to_string())?;
        let w = Opinion::vacuous(a.base_rate()).fuse(&a).map_err(|e| e.to_string())?;
        for (x, y) in [(v, a), (w, a)] {
            let gap = (x.belief() - y.belief()).abs() + (x.disbelief() - y.disbelief()).abs() + (x.uncertainty() - y.uncertainty()).abs();
            if gap > 1e-12 {
                return Err(format!("pair {i}: vacuous fusion moved {a:?} to {x:?}"));
            }
        }
    }
    Ok(())
}

/// A random dual-Gamma mixture and parking state.
pub fn random_parking_case<R: Rng>(r: &mut R) -> (GammaMixtureParams, PvState) {
    let m = HourMixture::new(
        r.random_range(0.2..0.8),
        r.random_range(0.8..4.0),
        r.random_range(0.3..2.0),
        r.random_range(2.0..8.0),
        r.random_range(0.5..2.0),
    );
    let params = GammaMixtureParams::uniform(m).expect("valid mixture");
    let pv = PvState { id: 0, arrival_hour: 9, parked: r.random_range(0.0..3.0), horizon: r.random_range(0.25..3.0) };
    (params, pv)
}

/// Largest gap between the closed-form stay probability and the share of
/// `samples` conditional draws (durations beyond the parked time) that last
/// the horizon, over `sets` random cases.
pub fn monte_carlo_stay_gap(seed: u64, sets: usize, samples: usize) -> Result<f64, String> {
    let mut r = rng::stream(seed, rng::streams::MONTE_CARLO);
    let mut worst = 0.0f64;
    for i in 0..sets {
        let (params, pv) = random_parking_case(&mut r);
        let exact = stay_probability(&pv, &params).map_err(|e| e.to_string())?;
        let m = params.hour(pv.arrival_hour).map_err(|e| e.to_string())?;
        let (short, long) = (
            Gamma::new(m.short.shape, m.short.scale).map_err(|e| e.to_string())?,
            Gamma::new(m.long.shape, m.long.scale).map_err(|e| e.to_string())?,
        );
        let (mut kept, mut stayed) = (0usize, 0usize);
        while kept < samples {
            let d = if r.random::<f64>() < m.short.weight { short.sample(&mut r) } else { long.sample(&mut r) };
            if d > pv.parked {
                kept += 1;
                stayed += usize::from(d > pv.parked + pv.horizon);
            }
        }
        let gap = (stayed as f64 / samples as f64 - exact).abs();
        if !gap.is_finite() {
            return Err(format!("case {i}: non-finite estimate"));
        }
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// Random contract problem with `n_lo..=n_hi` distinct types.
pub fn random_problem(seed: u64, n_lo: usize, n_hi: usize) -> ContractProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(n_lo..=n_hi);
    let mut thetas: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..1.0)).collect();
    thetas.sort_by(f64::total_cmp);
    for i in 1..n {
        if thetas[i] <= thetas[i - 1] + 1e-3 {
            thetas[i] = thetas[i - 1] + 1e-3;
        }
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let betas: Vec<f64> = raw.iter().map(|b| b / total).collect();
    let params = TaskParams {
        rho: rng.random_range(0.05..0.2),
        rates: vec![rng.random_range(5e6..6e6)],
        energy_price: rng.random_range(0.05..0.2),
        ..TaskParams::default()
    };
    ContractProblem::new(TypeProfile::new(thetas.iter().map(|t| t.min(1.0)).collect(), betas).unwrap(), params)
        .unwrap()
}

/// The seven-type instance used throughout the contract experiments.
pub fn default_type_problem() -> ContractProblem {
    let thetas = vec![0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95];
    let betas = vec![0.1, 0.15, 0.2, 0.2, 0.15, 0.1, 0.1];
    ContractProblem::new(TypeProfile::new(thetas, betas).unwrap(), TaskParams::default()).unwrap()
}

/// `U_PV_j(item j) − U_PV_j(item j−1)`, zero when the downward constraint binds.
pub fn ldic_gap(menu: &ContractMenu, problem: &ContractProblem, j: usize) -> f64 {
    let t = problem.theta(j);
    let (a, b) = (menu.items[j], menu.items[j - 1]);
    pv_utility(t, a.f, a.pi, &problem.params) - pv_utility(t, b.f, b.pi, &problem.params)
}
