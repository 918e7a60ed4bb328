//! Contract solvers: complete information, sequential local optimum, and the
//! Lagrangian search over the top type's frequency with ironing.

use super::menu::{sr_utility_of, ContractMenu, LagrangianState, MenuItem, Scheme};
use super::params::{pv_utility, ContractProblem, TaskParams};
use super::ContractError;
use crate::numeric::{bisect, golden_max};

/// Largest reward tried when bracketing a first-order root.
pub const REWARD_CAP: f64 = 1e12;
/// Default grid step count for the Lagrangian search.
pub const DEFAULT_STEPS: usize = 200;
const ROOT_TOL: f64 = 1e-15;

/// Item `j` with `A f² = F_prev + θ_j (v(π) − v_prev)` and the reward chosen
/// so that `dU_SR_j/dπ = 0`, as a function of the previous item.
struct ItemSolver<'a> {
    problem: &'a ContractProblem,
    j: usize,
    /// `A f_prev²`.
    base: f64,
    v_prev: f64,
}

impl ItemSolver<'_> {
    fn params(&self) -> &TaskParams {
        &self.problem.params
    }

    fn f_of(&self, pi: f64) -> f64 {
        let p = self.params();
        let energy = self.base + self.problem.theta(self.j) * (p.valuation.value(pi) - self.v_prev);
        (energy.max(0.0) / p.cost_coefficient()).sqrt()
    }

    /// `h(π)` with `dU_SR_j/dπ = β_j θ_j h(π)`.
    fn h(&self, pi: f64) -> f64 {
        let p = self.params();
        let f = self.f_of(pi);
        if f == 0.0 {
            return f64::INFINITY;
        }
        let theta = self.problem.theta(self.j);
        p.rho * p.cycles() * theta * p.valuation.derivative(pi) / (2.0 * p.cost_coefficient() * f.powi(3)) - 1.0
    }

    fn h_prime(&self, pi: f64) -> f64 {
        let p = self.params();
        let a = p.cost_coefficient();
        let theta = self.problem.theta(self.j);
        let f = self.f_of(pi);
        let v1 = p.valuation.derivative(pi);
        let v2 = p.valuation.second_derivative(pi);
        let df = theta * v1 / (2.0 * a * f);
        p.rho * p.cycles() * theta / (2.0 * a) * (v2 / f.powi(3) - 3.0 * v1 * df / f.powi(4))
    }

    /// Smallest admissible reward: the one giving `f = 0`.
    fn reward_floor(&self) -> f64 {
        let p = self.params();
        let u = self.v_prev - self.base / self.problem.theta(self.j);
        p.valuation.inverse(u).unwrap_or(-1.0).max(-1.0)
    }

    fn solve(&self, scheme: Scheme, start: f64) -> Result<(MenuItem, f64, usize), ContractError> {
        let no_bracket = |detail: String| ContractError::NoBracket { scheme, type_index: self.j, detail };
        let floor = self.reward_floor();
        let mut lo = start.max(floor);
        if !(self.h(lo) > 0.0) {
            // Step up from the admissible floor until the derivative is positive.
            lo = floor + 1e-12 * (1.0 + floor.abs());
            if !(self.h(lo) > 0.0) {
                return Err(no_bracket(format!("dU/dπ ≤ 0 at the smallest admissible reward {lo}")));
            }
        }
        let mut hi = (2.0 * lo.abs()).max(1.0);
        let mut iterations = 0;
        while self.h(hi) > 0.0 {
            hi *= 2.0;
            iterations += 1;
            if hi > REWARD_CAP {
                return Err(no_bracket(format!("dU/dπ still positive at π = {REWARD_CAP:e}")));
            }
        }
        let mut pi = bisect(|x| self.h(x), lo, hi, ROOT_TOL, 400)
            .ok_or_else(|| no_bracket(format!("no sign change on [{lo}, {hi}]")))?;
        // Newton polish, kept only when it improves the residual.
        for _ in 0..3 {
            let (r, d) = (self.h(pi), self.h_prime(pi));
            if !(d.is_finite() && d != 0.0) {
                break;
            }
            let next = pi - r / d;
            if next > lo && next < hi && self.h(next).abs() < r.abs() {
                pi = next;
            } else {
                break;
            }
        }
        iterations += 1;

        let p = self.params();
        let mut f = self.f_of(pi);
        if f > p.f_max {
            // Clamp and pay exactly the binding-constraint reward at f_max.
            f = p.f_max;
            let u = self.v_prev + (p.cost_coefficient() * f * f - self.base) / self.problem.theta(self.j);
            pi = p.valuation.inverse(u).ok_or_else(|| no_bracket("reward at f_max out of range".into()))?;
            return Ok((MenuItem { f, pi }, 0.0, iterations));
        }
        let residual = self.problem.beta(self.j) * self.problem.theta(self.j) * self.h(pi);
        Ok((MenuItem { f, pi }, residual.abs(), iterations))
    }
}

/// Each type is held to zero utility and its reward set by its own
/// first-order condition.
pub fn solve_complete_info(problem: &ContractProblem) -> Result<ContractMenu, ContractError> {
    let mut items = Vec::with_capacity(problem.n());
    let mut residual: f64 = 0.0;
    let mut iterations = 0;
    for j in 0..problem.n() {
        let s = ItemSolver { problem, j, base: 0.0, v_prev: 0.0 };
        let (item, r, it) = s.solve(Scheme::CompleteInfo, 0.0)?;
        items.push(item);
        residual = residual.max(r);
        iterations += it;
    }
    let mut menu = ContractMenu::new(items, Scheme::CompleteInfo);
    menu.residual = residual;
    menu.iterations = iterations;
    Ok(menu)
}

/// Types are solved in ascending order, each with the participation and
/// adjacent downward constraints binding given the previous item.
pub fn solve_local_asymmetric(problem: &ContractProblem) -> Result<ContractMenu, ContractError> {
    let a = problem.params.cost_coefficient();
    let v = problem.params.valuation;
    let mut items: Vec<MenuItem> = Vec::with_capacity(problem.n());
    let mut residual: f64 = 0.0;
    let mut iterations = 0;
    for j in 0..problem.n() {
        let (base, v_prev, start) = match items.last() {
            Some(prev) => (a * prev.f * prev.f, v.value(prev.pi), prev.pi),
            None => (0.0, 0.0, 0.0),
        };
        let s = ItemSolver { problem, j, base, v_prev };
        let (item, r, it) = s.solve(Scheme::LocalAsymmetric, start)?;
        items.push(item);
        residual = residual.max(r);
        iterations += it;
    }
    let mut menu = ContractMenu::new(items, Scheme::LocalAsymmetric);
    menu.residual = residual;
    menu.iterations = iterations;
    Ok(menu)
}

/// Rewards that make the participation constraint of type 1 and every
/// adjacent downward constraint bind for the given frequencies.
pub fn rewards_for(problem: &ContractProblem, f: &[f64]) -> Option<Vec<f64>> {
    let a = problem.params.cost_coefficient();
    let v = problem.params.valuation;
    let mut out = Vec::with_capacity(f.len());
    let mut v_prev = 0.0;
    let mut f_prev = 0.0;
    for (j, &fj) in f.iter().enumerate() {
        let u = v_prev + a * (fj * fj - f_prev * f_prev) / problem.theta(j);
        let pi = v.inverse(u)?;
        out.push(pi);
        v_prev = u;
        f_prev = fj;
    }
    Some(out)
}

/// Result of the backward recursion from one top-type frequency.
#[derive(Debug, Clone)]
struct Candidate {
    f: Vec<f64>,
    pi: Vec<f64>,
    omega: Vec<f64>,
}

impl Candidate {
    fn participation_slack(&self, problem: &ContractProblem) -> f64 {
        pv_utility(problem.theta(0), self.f[0], self.pi[0], &problem.params)
    }
}

/// Solves the stationarity conditions downward from `f_N`.
fn backward(problem: &ContractProblem, f_n: f64) -> Option<Candidate> {
    let p = &problem.params;
    let v = p.valuation;
    let a = p.cost_coefficient();
    let n = problem.n();
    // ρ / (2 e ε): the f-stationarity condition reads ω_j − ω_{j+1} = β_j θ_j k / f_j³.
    let k = p.rho / (2.0 * p.energy_price * p.epsilon);
    let mut f = vec![0.0; n];
    let mut pi = vec![0.0; n];
    let mut omega = vec![0.0; n];

    f[n - 1] = f_n;
    omega[n - 1] = problem.beta(n - 1) * problem.theta(n - 1) * k / f_n.powi(3);
    pi[n - 1] = v.derivative_inverse(problem.beta(n - 1) / omega[n - 1]);
    if !(pi[n - 1] > -1.0) || !pi[n - 1].is_finite() {
        return None;
    }

    for j in (0..n - 1).rev() {
        let (tj, tn) = (problem.theta(j), problem.theta(j + 1));
        let bj = problem.beta(j);
        let w_next = omega[j + 1];
        let target = a * f[j + 1].powi(2) - tn * v.value(pi[j + 1]);
        // Denominator of the reward condition; positive only below f_lim.
        let denom = |fj: f64| w_next * (tj - tn) + bj * tj * tj * k / fj.powi(3);
        let reward = |fj: f64| v.derivative_inverse(bj * tj / denom(fj));
        // g(f_j) = A f_j² − θ_{j+1} v(π_j(f_j)) − (A f_{j+1}² − θ_{j+1} v(π_{j+1})).
        let g = |fj: f64| {
            let d = denom(fj);
            if !(d > 0.0) {
                return f64::INFINITY;
            }
            let r = reward(fj);
            if !(r > -1.0) {
                return a * fj * fj - tn * v.lower_bound() - target;
            }
            a * fj * fj - tn * v.value(r) - target
        };
        let f_lim = if w_next > 0.0 && tn > tj {
            (bj * tj * tj * k / (w_next * (tn - tj))).cbrt()
        } else {
            p.f_max * 4.0
        };
        let hi = f_lim * (1.0 - 1e-12);
        let mut lo = hi * 1e-3;
        while g(lo) > 0.0 {
            lo *= 1e-3;
            if lo < 1e-30 * hi {
                return None;
            }
        }
        if !(g(hi) > 0.0) {
            return None;
        }
        let fj = bisect(g, lo, hi, ROOT_TOL, 400)?;
        f[j] = fj;
        pi[j] = reward(fj);
        omega[j] = w_next + bj * tj * k / fj.powi(3);
        if !(pi[j] > -1.0 && pi[j].is_finite()) {
            return None;
        }
    }
    Some(Candidate { f, pi, omega })
}

/// Pools every decreasing run of `f` to the common value that maximizes the
/// SR utility with rewards reassigned through the binding constraints.
fn iron(problem: &ContractProblem, f: &mut [f64], bunched: &mut Vec<(usize, usize)>) {
    let n = f.len();
    let f_max = problem.params.f_max;
    let total = |f: &[f64]| -> f64 {
        match rewards_for(problem, f) {
            Some(pi) => {
                let items: Vec<MenuItem> = f.iter().zip(&pi).map(|(&f, &pi)| MenuItem { f, pi }).collect();
                sr_utility_of(&items, problem)
            }
            None => f64::NEG_INFINITY,
        }
    };
    for _ in 0..n * n {
        // First index where the sequence drops.
        let Some(drop) = (1..n).find(|&j| f[j] < f[j - 1]) else { break };
        // Extend the pooled run over every neighbour still out of order with it.
        let (mut m, mut e) = (drop - 1, drop);
        loop {
            let mean = f[m..=e].iter().sum::<f64>() / (e - m + 1) as f64;
            let mut grew = false;
            if m > 0 && f[m - 1] > mean {
                m -= 1;
                grew = true;
            }
            if e + 1 < n && f[e + 1] < mean {
                e += 1;
                grew = true;
            }
            if !grew {
                break;
            }
        }
        let lo = if m > 0 { f[m - 1] } else { f[m..=e].iter().copied().fold(f64::INFINITY, f64::min) * 1e-3 };
        let hi = if e + 1 < n { f[e + 1] } else { f_max };
        let mut trial = f.to_vec();
        let (c, _) = golden_max(
            |c| {
                trial[m..=e].iter_mut().for_each(|x| *x = c);
                total(&trial)
            },
            lo,
            hi.max(lo),
            1e-12,
        );
        f[m..=e].iter_mut().for_each(|x| *x = c);
    }
    // Report maximal runs of equal frequency; a pooled value can land on a
    // neighbour's frequency and join its run.
    bunched.clear();
    let mut start = 0;
    for j in 1..=n {
        if j == n || f[j] != f[start] {
            if j - start > 1 {
                bunched.push((start, j - 1));
            }
            start = j;
        }
    }
}

fn menu_from(problem: &ContractProblem, mut f: Vec<f64>, bunched: &mut Vec<(usize, usize)>) -> Option<Vec<MenuItem>> {
    if f.windows(2).any(|w| w[1] < w[0]) {
        iron(problem, &mut f, bunched);
    }
    let pi = rewards_for(problem, &f)?;
    Some(f.into_iter().zip(pi).map(|(f, pi)| MenuItem { f, pi }).collect())
}

/// Grid search over the top type's frequency, backward recursion through the
/// stationarity conditions, and ironing of any decreasing frequency runs.
pub fn solve_lagrangian_iterative(problem: &ContractProblem, steps: usize) -> Result<ContractMenu, ContractError> {
    if steps < 10 {
        return Err(ContractError::InvalidParams(format!("step count {steps} must be at least 10")));
    }
    let n = problem.n();
    let complete = solve_complete_info(problem)?;
    if n == 1 {
        let mut menu = complete;
        menu.scheme = Scheme::Lagrangian;
        return Ok(menu);
    }
    let local = solve_local_asymmetric(problem)?;
    let f_bar = complete.items[n - 1].f;
    let f_dot = local.items[n - 1].f;
    let f_max = problem.params.f_max;
    let (mut lo, mut hi) = (f_bar.min(f_dot), f_bar.max(f_dot));
    if hi - lo < 1e-6 * hi {
        lo *= 0.9;
        hi = (hi * 1.1).min(f_max);
    }
    let delta = (hi - lo) / steps as f64;

    // Scan down from the top; the first sign change of the type-1 slack
    // (negative above, nonnegative below) brackets the binding point.
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    let mut evaluated = 0;
    let mut grid: Vec<(f64, Candidate)> = Vec::new();
    let mut fn_ = hi;
    // Start above the bracket while the top point is already slack.
    if let Some(c) = backward(problem, hi) {
        if c.participation_slack(problem) >= 0.0 {
            let mut up = hi;
            while up < f_max {
                let next = (up + delta).min(f_max);
                evaluated += 1;
                match backward(problem, next) {
                    Some(c) if c.participation_slack(problem) < 0.0 => {
                        bracket = Some((up, next));
                        break;
                    }
                    Some(c) => grid.push((next, c)),
                    None => break,
                }
                up = next;
            }
        }
    }
    if bracket.is_none() {
        let limit = 4 * steps;
        for _ in 0..=limit {
            if fn_ <= 0.0 {
                break;
            }
            evaluated += 1;
            if let Some(c) = backward(problem, fn_) {
                let slack = c.participation_slack(problem);
                if let Some((f_above, s_above)) = prev {
                    if s_above < 0.0 && slack >= 0.0 {
                        bracket = Some((fn_, f_above));
                        break;
                    }
                }
                prev = Some((fn_, slack));
                grid.push((fn_, c));
            } else {
                prev = None;
            }
            fn_ -= delta;
        }
    }

    let mut state = LagrangianState { delta, steps, candidates: evaluated, ..Default::default() };
    let mut bunched = Vec::new();
    let chosen: Option<(f64, Candidate)> = bracket.and_then(|(a, b)| {
        let root = bisect(
            |x| backward(problem, x).map_or(f64::NAN, |c| c.participation_slack(problem)),
            a,
            b,
            ROOT_TOL,
            400,
        )?;
        backward(problem, root).map(|c| (root, c))
    });

    let items = match chosen {
        Some((root, c)) => {
            state.refined = true;
            state.f_n = root;
            state.omega = c.omega.clone();
            let monotone = c.f.windows(2).all(|w| w[0] <= w[1]) && c.f[n - 1] <= f_max;
            if monotone {
                // Re-derive rewards from the frequencies so the binding
                // constraints hold to rounding.
                menu_from(problem, c.f, &mut bunched)
            } else {
                let mut f = c.f;
                f.iter_mut().for_each(|x| *x = x.min(f_max));
                menu_from(problem, f, &mut bunched)
            }
        }
        None => None,
    };

    let items = match items {
        Some(items) => items,
        None => {
            // Fallback: every grid candidate, repaired and priced through the
            // binding constraints; keep the best.
            let mut best: Option<(f64, Vec<MenuItem>, Vec<(usize, usize)>, f64, Vec<f64>)> = None;
            for (f_n, c) in grid {
                let mut b = Vec::new();
                let f: Vec<f64> = c.f.iter().map(|x| x.min(f_max)).collect();
                if let Some(items) = menu_from(problem, f, &mut b) {
                    let u = sr_utility_of(&items, problem);
                    if best.as_ref().is_none_or(|(bu, ..)| u > *bu) {
                        best = Some((u, items, b, f_n, c.omega));
                    }
                }
            }
            let (_, items, b, f_n, omega) = best.ok_or(ContractError::NoFeasibleCandidate {
                steps,
                detail: format!(
                    "no admissible candidate for f_N in [{lo:e}, {hi:e}]; increase the step count or widen the bracket"
                ),
            })?;
            bunched = b;
            state.f_n = f_n;
            state.omega = omega;
            items
        }
    };
    state.eta = state.omega.first().copied().unwrap_or(0.0);

    // A binding f_max cuts the stationarity path short and the clamped
    // candidate can fall below the sequential optimum, which is itself an
    // admissible menu of the same problem.
    let items = if sr_utility_of(&local.items, problem) > sr_utility_of(&items, problem) {
        bunched.clear();
        state.refined = false;
        local.items
    } else {
        items
    };

    let mut menu = ContractMenu::new(items, Scheme::Lagrangian);
    menu.iterations = evaluated;
    menu.bunched = bunched;
    menu.residual = menu.pv_utilities(problem)[0].abs();
    menu.lagrangian = Some(state);
    Ok(menu)
}
