//! Exhaustive search over monotone menus on a finite grid.

use super::menu::{ContractMenu, MenuItem, Scheme};
use super::params::{pv_utility, sr_term, ContractProblem};
use super::solve::solve_complete_info;
use super::ContractError;

pub const MAX_ORACLE_TYPES: usize = 4;
pub const MAX_GRID_POINTS: usize = 30;

/// Evenly spaced grids up to 1.5 times the largest complete-information item.
///
/// The frequency grid starts one step above zero: time saved is undefined at
/// `f = 0`, so every type is served.
pub fn default_grids(problem: &ContractProblem, points: usize) -> Result<(Vec<f64>, Vec<f64>), ContractError> {
    let complete = solve_complete_info(problem)?;
    let f_top = (1.5 * complete.items.iter().map(|i| i.f).fold(0.0, f64::max)).min(problem.params.f_max);
    let pi_top = 1.5 * complete.items.iter().map(|i| i.pi).fold(0.0, f64::max);
    let f_grid = (1..=points).map(|i| f_top * i as f64 / points as f64).collect();
    let pi_grid = (0..points).map(|i| pi_top * i as f64 / (points - 1) as f64).collect();
    Ok((f_grid, pi_grid))
}

struct Search<'a> {
    problem: &'a ContractProblem,
    cells: Vec<MenuItem>,
    /// Per type, the largest share-weighted SR term any cell could give.
    bound: Vec<f64>,
    chosen: Vec<usize>,
    best: f64,
    best_menu: Vec<usize>,
    visited: u64,
}

impl Search<'_> {
    fn utility(&self, theta: f64, c: usize) -> f64 {
        let it = self.cells[c];
        pv_utility(theta, it.f, it.pi, &self.problem.params)
    }

    fn term(&self, j: usize, c: usize) -> f64 {
        let it = self.cells[c];
        self.problem.beta(j) * sr_term(self.problem, j, it.f, it.pi)
    }

    fn dfs(&mut self, j: usize, start: usize, partial: f64) {
        let n = self.problem.n();
        if j == n {
            if partial > self.best {
                self.best = partial;
                self.best_menu = self.chosen.clone();
            }
            return;
        }
        if partial + self.bound[j..].iter().sum::<f64>() <= self.best {
            return;
        }
        let theta = self.problem.theta(j);
        let width = self.cells.len();
        for c in start..width {
            self.visited += 1;
            // Cells are ordered by (f, π); monotone π is enforced explicitly.
            if let Some(&prev) = self.chosen.last() {
                if self.cells[c].pi < self.cells[prev].pi {
                    continue;
                }
            }
            let own = self.utility(theta, c);
            if own < 0.0 {
                continue;
            }
            let compatible = self.chosen.iter().enumerate().all(|(k, &ck)| {
                let tk = self.problem.theta(k);
                own >= self.utility(theta, ck) && self.utility(tk, ck) >= self.utility(tk, c)
            });
            if !compatible {
                continue;
            }
            self.chosen.push(c);
            let t = self.term(j, c);
            self.dfs(j + 1, c, partial + t);
            self.chosen.pop();
        }
    }
}

/// Best menu with every item on `f_grid × pi_grid`, nondecreasing in both
/// coordinates and satisfying every IR and IC constraint exactly.
pub fn grid_oracle(problem: &ContractProblem, f_grid: &[f64], pi_grid: &[f64]) -> Result<ContractMenu, ContractError> {
    if problem.n() > MAX_ORACLE_TYPES {
        return Err(ContractError::TooManyTypes { n: problem.n(), max: MAX_ORACLE_TYPES });
    }
    if f_grid.len() > MAX_GRID_POINTS || pi_grid.len() > MAX_GRID_POINTS || f_grid.is_empty() || pi_grid.is_empty() {
        return Err(ContractError::InvalidParams(format!(
            "grids must have 1..={MAX_GRID_POINTS} points, got {} × {}",
            f_grid.len(),
            pi_grid.len()
        )));
    }
    let mut f_sorted = f_grid.to_vec();
    f_sorted.sort_by(f64::total_cmp);
    let mut pi_sorted = pi_grid.to_vec();
    pi_sorted.sort_by(f64::total_cmp);
    let cells: Vec<MenuItem> =
        f_sorted.iter().flat_map(|&f| pi_sorted.iter().map(move |&pi| MenuItem { f, pi })).collect();
    let bound = (0..problem.n())
        .map(|j| {
            cells
                .iter()
                .map(|it| problem.beta(j) * sr_term(problem, j, it.f, it.pi))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut search = Search {
        problem,
        cells,
        bound,
        chosen: Vec::with_capacity(problem.n()),
        best: f64::NEG_INFINITY,
        best_menu: Vec::new(),
        visited: 0,
    };
    search.dfs(0, 0, 0.0);
    // The all-zero menu is always on the grid when both grids contain 0; if
    // not, an empty search still yields the best feasible menu found.
    let items = search.best_menu.iter().map(|&c| search.cells[c]).collect::<Vec<_>>();
    if items.len() != problem.n() {
        return Err(ContractError::NoFeasibleCandidate {
            steps: f_grid.len() * pi_grid.len(),
            detail: "no feasible menu on the grid".into(),
        });
    }
    let mut menu = ContractMenu::new(items, Scheme::GridOracle);
    menu.iterations = search.visited as usize;
    Ok(menu)
}

/// Largest SR utility change from moving each item of `menu` by one grid
/// step: `Σ β_j θ_j (Δπ + ρκs·Δf / (f_j (f_j − Δf)))`.
pub fn one_cell_bound(problem: &ContractProblem, menu: &ContractMenu, df: f64, dpi: f64) -> f64 {
    let p = &problem.params;
    menu.items
        .iter()
        .enumerate()
        .map(|(j, it)| {
            let lower = (it.f - df).max(it.f * 1e-3);
            let saved = p.rho * p.cycles() * (1.0 / lower - 1.0 / it.f.max(lower));
            problem.beta(j) * problem.theta(j) * (dpi + saved)
        })
        .sum()
}
