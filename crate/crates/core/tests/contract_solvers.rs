mod common;

use parkingchain::contract::{
    check_feasibility, default_grids, grid_oracle, linear_pricing_baseline, one_cell_bound, preferred_item,
    pv_utility, solve_complete_info, solve_lagrangian_iterative, solve_local_asymmetric, sr_expected_utility, sr_term,
    stackelberg_baseline, ContractProblem, TaskParams, Valuation, DEFAULT_STEPS,
};
use parkingchain::parking::TypeProfile;
use proptest::prelude::*;

/// `U_SR_j` along the binding-constraint curve as a function of `π_j`.
fn sr_along_curve(problem: &ContractProblem, j: usize, base: f64, v_prev: f64, pi: f64) -> f64 {
    let p = &problem.params;
    let f = ((base + problem.theta(j) * (p.valuation.value(pi) - v_prev)) / p.cost_coefficient()).sqrt();
    problem.beta(j) * sr_term(problem, j, f, pi)
}

#[test]
fn asymmetric_solvers_are_feasible_on_random_problems() {
    for seed in 0..50 {
        let p = common::random_problem(seed, 2, 7);
        for menu in [solve_local_asymmetric(&p).unwrap(), solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap()] {
            let r = check_feasibility(&menu, &p, 1e-6);
            assert!(r.is_feasible(), "seed {seed} {:?}: {r:?}", menu.scheme);
            assert!(menu.pv_utilities(&p)[0].abs() < 1e-8, "seed {seed} {:?}", menu.scheme);
            for j in 1..p.n() {
                if !(menu.is_bunched(j) && menu.is_bunched(j - 1)) {
                    assert!(common::ldic_gap(&menu, &p, j).abs() < 1e-8, "seed {seed} {:?} j={j}", menu.scheme);
                }
            }
        }
    }
}

#[test]
fn complete_info_leaves_zero_utility_and_zero_gradient() {
    for seed in 0..20 {
        let p = common::random_problem(seed, 1, 7);
        let menu = solve_complete_info(&p).unwrap();
        for (j, it) in menu.items.iter().enumerate() {
            assert!(pv_utility(p.theta(j), it.f, it.pi, &p.params).abs() < 1e-9);
            let h = 1e-6 * (1.0 + it.pi);
            let d = (sr_along_curve(&p, j, 0.0, 0.0, it.pi + h) - sr_along_curve(&p, j, 0.0, 0.0, it.pi - h)) / (2.0 * h);
            assert!(d.abs() < 1e-8, "seed {seed} j={j}: {d}");
            let c = sr_along_curve(&p, j, 0.0, 0.0, it.pi);
            assert!(sr_along_curve(&p, j, 0.0, 0.0, it.pi + h) < c && sr_along_curve(&p, j, 0.0, 0.0, it.pi - h) < c);
        }
    }
}

#[test]
fn local_asymmetric_items_are_stationary_given_predecessor() {
    for seed in 0..20 {
        let p = common::random_problem(seed, 2, 7);
        let menu = solve_local_asymmetric(&p).unwrap();
        let a = p.params.cost_coefficient();
        for j in 0..p.n() {
            let (base, v_prev) = if j == 0 {
                (0.0, 0.0)
            } else {
                let prev = menu.items[j - 1];
                (a * prev.f * prev.f, p.params.valuation.value(prev.pi))
            };
            let pi = menu.items[j].pi;
            let h = 1e-6 * (1.0 + pi);
            let d = (sr_along_curve(&p, j, base, v_prev, pi + h) - sr_along_curve(&p, j, base, v_prev, pi - h))
                / (2.0 * h);
            assert!(d.abs() < 1e-8, "seed {seed} j={j}: {d}");
            let second = sr_along_curve(&p, j, base, v_prev, pi + h) - 2.0 * sr_along_curve(&p, j, base, v_prev, pi)
                + sr_along_curve(&p, j, base, v_prev, pi - h);
            assert!(second < 0.0);
        }
    }
}

#[test]
fn single_type_lagrangian_equals_complete_info() {
    let p = common::random_problem(3, 1, 1);
    let a = solve_complete_info(&p).unwrap();
    let b = solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap();
    assert!((a.items[0].f - b.items[0].f).abs() < 1e-8 * a.items[0].f);
    assert!((a.items[0].pi - b.items[0].pi).abs() < 1e-8);
}

#[test]
fn monotone_menus_and_self_selection() {
    for seed in 0..30 {
        let p = common::random_problem(seed, 2, 7);
        for menu in [solve_local_asymmetric(&p).unwrap(), solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap()] {
            for j in 0..p.n() {
                assert_eq!(preferred_item(&menu, &p, j, 1e-9), j, "seed {seed} {:?}", menu.scheme);
                for k in 0..j {
                    if menu.is_bunched(j) && menu.is_bunched(k) {
                        continue;
                    }
                    assert!(menu.items[j].f > menu.items[k].f && menu.items[j].pi > menu.items[k].pi);
                }
                // Chain bound: every type keeps a nonnegative rent.
                assert!(menu.pv_utilities(&p)[j] >= -1e-9);
            }
        }
    }
}

#[test]
fn scheme_ordering_on_default_instance() {
    let p = common::default_type_problem();
    let lc = solve_complete_info(&p).unwrap();
    let lia = solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap();
    let la = solve_local_asymmetric(&p).unwrap();
    let sa = stackelberg_baseline(&p);
    let lin = linear_pricing_baseline(&p);
    let sr: Vec<f64> = [&lc, &lia, &la, &sa, &lin].iter().map(|m| sr_expected_utility(m, &p)).collect();
    for w in sr.windows(2) {
        assert!(w[0] >= w[1] - 1e-9, "SR ordering {sr:?}");
    }
    let pv: Vec<f64> = [&lc, &lia, &la, &sa, &lin].iter().map(|m| m.expected_pv_utility(&p)).collect();
    assert!(pv[0].abs() < 1e-9 && pv[1] >= -1e-9, "{pv:?}");
    assert!(pv.iter().all(|u| *u <= pv[4] + 1e-9), "{pv:?}");
}

#[test]
fn binding_resource_cap_keeps_lagrangian_above_local() {
    for f_max in [6e8, 8e8, 1e9, 1.2e9] {
        let types = TypeProfile::new(vec![0.4, 0.6, 0.8], vec![0.3, 0.4, 0.3]).unwrap();
        let p = ContractProblem::new(types, TaskParams { f_max, ..TaskParams::default() }).unwrap();
        let lia = solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap();
        let la = solve_local_asymmetric(&p).unwrap();
        assert!(lia.items.iter().all(|i| i.f <= f_max));
        assert!(sr_expected_utility(&lia, &p) >= sr_expected_utility(&la, &p) - 1e-12, "f_max {f_max}");
        assert!(check_feasibility(&lia, &p, 1e-6).is_feasible(), "f_max {f_max}");
    }
}

#[test]
fn oracle_bounds_on_small_instances() {
    for seed in 0..6 {
        let p = common::random_problem(100 + seed, 2, 3);
        let (fg, pg) = default_grids(&p, 30).unwrap();
        let oracle = grid_oracle(&p, &fg, &pg).unwrap();
        let lia = solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap();
        let lc = solve_complete_info(&p).unwrap();
        let (u_o, u_l, u_c) = (sr_expected_utility(&oracle, &p), sr_expected_utility(&lia, &p), sr_expected_utility(&lc, &p));
        let cell = one_cell_bound(&p, &lia, fg[1] - fg[0], pg[1] - pg[0]);
        assert!(u_o <= u_c + 1e-9, "seed {seed}: oracle {u_o} above complete info {u_c}");
        assert!(u_l >= u_o - 1e-9, "seed {seed}: lagrangian {u_l} below oracle {u_o}");
        assert!(u_l - u_o <= cell, "seed {seed}: gap {} exceeds one cell {cell}", u_l - u_o);
    }
}

#[test]
fn power_valuation_is_supported() {
    let mut p = common::default_type_problem();
    p.params.valuation = Valuation::Power { exponent: 0.5 };
    let lia = solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap();
    assert!(check_feasibility(&lia, &p, 1e-6).is_feasible());
    let la = solve_local_asymmetric(&p).unwrap();
    assert!(sr_expected_utility(&lia, &p) >= sr_expected_utility(&la, &p) - 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lagrangian_dominates_local_and_is_dominated_by_complete(seed in 0u64..10_000) {
        let p = common::random_problem(seed, 2, 6);
        let lc = sr_expected_utility(&solve_complete_info(&p).unwrap(), &p);
        let lia = sr_expected_utility(&solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap(), &p);
        let la = sr_expected_utility(&solve_local_asymmetric(&p).unwrap(), &p);
        prop_assert!(lc >= lia - 1e-9);
        prop_assert!(lia >= la - 1e-9);
    }

    #[test]
    fn ic_violation_is_detected(seed in 0u64..10_000, bump in 0.01f64..0.5) {
        let p = common::random_problem(seed, 2, 5);
        let mut menu = solve_lagrangian_iterative(&p, DEFAULT_STEPS).unwrap();
        // Overpaying item 1 makes type 2 (indifferent before) prefer it.
        menu.items[0].pi += bump;
        let r = check_feasibility(&menu, &p, 1e-9);
        prop_assert!(r.ic.contains(&(1, 0)));
    }
}
