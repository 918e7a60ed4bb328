//! Single-price comparison schemes.
//!
//! Both pay every type `π = p·f` and let each type choose `f` to maximize its
//! own utility. The Stackelberg scheme picks the price that is best for the
//! SR; the linear tariff is the highest price at which the SR still breaks
//! even, which hands the PVs the surplus a competitive tariff would.

use super::menu::{sr_utility_of, ContractMenu, MenuItem, Scheme};
use super::params::{ContractProblem, Valuation};
use crate::numeric::{bisect, golden_max};

const PRICE_SCAN_POINTS: usize = 400;

/// Frequency maximizing `θ v(p f) − A f²` over `[0, f_max]`.
pub fn best_response(problem: &ContractProblem, j: usize, price: f64) -> f64 {
    if !(price > 0.0) {
        return 0.0;
    }
    let p = &problem.params;
    let a = p.cost_coefficient();
    let theta = problem.theta(j);
    let f = match p.valuation {
        Valuation::Log => {
            // Positive root of 2A p f² + 2A f − θ p = 0, rearranged to avoid cancellation.
            let disc = (a * a + 2.0 * a * price * price * theta).sqrt();
            theta * price / (a + disc)
        }
        v => {
            let foc = |f: f64| theta * price * v.derivative(price * f) - 2.0 * a * f;
            let hi = theta * price * v.derivative(0.0) / (2.0 * a);
            bisect(foc, 0.0, hi, 1e-15, 400).unwrap_or(hi)
        }
    };
    f.min(p.f_max)
}

fn items_at(problem: &ContractProblem, price: f64) -> Vec<MenuItem> {
    (0..problem.n())
        .map(|j| {
            let f = best_response(problem, j, price);
            MenuItem { f, pi: price * f }
        })
        .collect()
}

fn sr_at(problem: &ContractProblem, price: f64) -> f64 {
    sr_utility_of(&items_at(problem, price), problem)
}

/// Price scale at which `π ≈ 1` for `f` near the local CPU frequency.
fn price_scale(problem: &ContractProblem) -> f64 {
    1.0 / problem.params.f_local
}

/// Best single price for the SR, found by a log-spaced scan and golden
/// refinement; price zero (no participation) is always a candidate.
pub fn stackelberg_price(problem: &ContractProblem) -> f64 {
    let scale = price_scale(problem);
    let (lo_exp, hi_exp) = (-4.0f64, 6.0f64);
    let price = |i: usize| scale * 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / PRICE_SCAN_POINTS as f64);
    let mut best = (0.0, 0.0);
    let mut best_i = None;
    for i in 0..=PRICE_SCAN_POINTS {
        let u = sr_at(problem, price(i));
        if u > best.1 {
            best = (price(i), u);
            best_i = Some(i);
        }
    }
    if let Some(i) = best_i {
        let lo = price(i.saturating_sub(1));
        let hi = price((i + 1).min(PRICE_SCAN_POINTS));
        let (p, u) = golden_max(|p| sr_at(problem, p), lo, hi, 1e-13);
        if u > best.1 {
            best = (p, u);
        }
    }
    best.0
}

pub fn stackelberg_baseline(problem: &ContractProblem) -> ContractMenu {
    let price = stackelberg_price(problem);
    let mut menu = ContractMenu::new(items_at(problem, price), Scheme::Stackelberg);
    menu.iterations = PRICE_SCAN_POINTS;
    menu
}

/// Highest price at or above the Stackelberg price keeping the SR's expected
/// utility nonnegative.
pub fn linear_price(problem: &ContractProblem) -> f64 {
    let start = stackelberg_price(problem);
    if !(start > 0.0) {
        return 0.0;
    }
    let mut lo = start;
    let mut hi = start;
    for _ in 0..2000 {
        hi *= 1.05;
        if sr_at(problem, hi) < 0.0 {
            break;
        }
        lo = hi;
    }
    if sr_at(problem, hi) >= 0.0 {
        return hi;
    }
    // Keep the nonnegative side of the bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sr_at(problem, mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn linear_pricing_baseline(problem: &ContractProblem) -> ContractMenu {
    let price = linear_price(problem);
    let mut menu = ContractMenu::new(items_at(problem, price), Scheme::LinearPricing);
    menu.iterations = PRICE_SCAN_POINTS;
    menu
}
