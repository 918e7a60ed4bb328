mod common;

use parkingchain::consensus::{reputation_series, DetectionConfig};
use parkingchain::reputation::*;
use proptest::prelude::*;

fn opinion() -> impl Strategy<Value = Opinion> {
    (0.0f64..=1.0, 0.0f64..=1.0, 1e-6f64..=1.0, 0.0f64..=1.0).prop_map(|(x, y, u, a)| {
        let rest = 1.0 - u;
        let b = rest * x * y;
        Opinion::new(b, rest - b, u, a).unwrap()
    })
}

fn mass(o: &Opinion) -> f64 {
    o.belief() + o.disbelief() + o.uncertainty()
}

#[test]
fn ten_thousand_random_pairs() {
    common::opinion_pair_properties(5, 10_000).unwrap();
}

#[test]
fn worked_fusion() {
    let local = Opinion::new(0.6, 0.2, 0.2, 0.5).unwrap();
    let syn = Opinion::new(0.5, 0.3, 0.2, 0.5).unwrap();
    let f = fuse_final(&local, &syn).unwrap();
    assert!((f.belief() - 0.22 / 0.36).abs() < 1e-12);
    assert!((f.disbelief() - 0.10 / 0.36).abs() < 1e-12);
    assert!((f.uncertainty() - 0.04 / 0.36).abs() < 1e-12);
}

/// With a node that turns from mostly to rarely cooperative, the
/// subjective-logic value crosses each threshold no later than the linear one.
#[test]
fn subjective_logic_crosses_thresholds_first() {
    let cfg = DetectionConfig { slots: 15, ..DetectionConfig::default() };
    let thresholds = [0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6];
    let seeds = 20;
    let mut ok = vec![0; thresholds.len()];
    for seed in 0..seeds {
        let sl = reputation_series(&cfg, ReputationScheme::SubjectiveLogic, seed).unwrap();
        let lr = reputation_series(&cfg, ReputationScheme::Linear, seed).unwrap();
        for (k, &t) in thresholds.iter().enumerate() {
            let first = |s: &parkingchain::consensus::ReputationSeries| {
                s.detection(t).full_detection_slot.unwrap_or(u64::MAX)
            };
            ok[k] += usize::from(first(&sl) <= first(&lr));
        }
    }
    assert!(ok.iter().all(|&c| c * 100 >= 95 * seeds as usize), "{ok:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn fusion_closure_and_uncertainty_reduction(a in opinion(), b in opinion()) {
        let f = a.fuse(&b).unwrap();
        prop_assert!((mass(&f) - 1.0).abs() <= MASS_TOLERANCE);
        prop_assert!(f.uncertainty() <= a.uncertainty().min(b.uncertainty()) + MASS_TOLERANCE);
        let g = b.fuse(&a).unwrap();
        prop_assert!((f.belief() - g.belief()).abs() < 1e-12 && (f.uncertainty() - g.uncertainty()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&f.reputation_value()));
    }

    #[test]
    fn vacuous_is_neutral(a in opinion()) {
        let f = fuse_final(&a, &Opinion::vacuous(0.3)).unwrap();
        prop_assert!((f.belief() - a.belief()).abs() < 1e-12);
        prop_assert!((f.disbelief() - a.disbelief()).abs() < 1e-12);
        prop_assert!((f.uncertainty() - a.uncertainty()).abs() < 1e-12);
    }

    #[test]
    fn synthesis_stays_on_the_simplex(ops in prop::collection::vec((0.0f64..5.0, opinion()), 1..8)) {
        prop_assume!(ops.iter().map(|(w, _)| w).sum::<f64>() > 0.0);
        let s = synthesize_recommended(&ops).unwrap();
        prop_assert!((mass(&s) - 1.0).abs() <= MASS_TOLERANCE);
        let lo = ops.iter().map(|(_, o)| o.uncertainty()).fold(f64::INFINITY, f64::min);
        let hi = ops.iter().map(|(_, o)| o.uncertainty()).fold(0.0, f64::max);
        prop_assert!(s.uncertainty() >= lo - 1e-12 && s.uncertainty() <= hi + 1e-12);
    }

    #[test]
    fn evidence_is_monotone(p in 0u64..1000, q in 0u64..1000, a in 0.0f64..=1.0) {
        let o = local_opinion(p, q, a);
        prop_assert!(local_opinion(p + 1, q, a).belief() >= o.belief());
        prop_assert!(local_opinion(p, q + 1, a).disbelief() >= o.disbelief());
        prop_assert!((mass(&o) - 1.0).abs() <= MASS_TOLERANCE);
    }

    #[test]
    fn overall_weight_is_linear(x in 0.0f64..10.0, y in 0.0f64..10.0, z in 0.0f64..1.0, k in 0.0f64..4.0) {
        let cfg = WeightConfig::default();
        let w = overall_weight(x, y, z, &cfg);
        let scaled = overall_weight(k * x, y, z, &cfg) - overall_weight(0.0, y, z, &cfg);
        prop_assert!((scaled - k * (w - overall_weight(0.0, y, z, &cfg))).abs() < 1e-9);
        prop_assert!((overall_weight(1.0, 1.0, 1.0, &cfg) - 1.0).abs() < 1e-12);
    }
}
