use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::params::{pv_utility, sr_term, ContractProblem};
use super::ContractError;

/// Pricing scheme that produced a menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Complete information.
    CompleteInfo,
    /// Lagrangian iterative, asymmetric information.
    Lagrangian,
    /// Sequential local optimum, asymmetric information.
    LocalAsymmetric,
    /// Single-price Stackelberg game.
    Stackelberg,
    /// Break-even linear tariff.
    LinearPricing,
    /// Exhaustive grid search.
    GridOracle,
}

impl Scheme {
    pub fn tag(self) -> &'static str {
        match self {
            Scheme::CompleteInfo => "LC",
            Scheme::Lagrangian => "LIA",
            Scheme::LocalAsymmetric => "LA",
            Scheme::Stackelberg => "SA",
            Scheme::LinearPricing => "linear",
            Scheme::GridOracle => "oracle",
        }
    }

    pub const COMPARED: [Scheme; 5] = [
        Scheme::CompleteInfo,
        Scheme::Lagrangian,
        Scheme::LocalAsymmetric,
        Scheme::Stackelberg,
        Scheme::LinearPricing,
    ];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One contract item: contributed frequency and reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuItem {
    pub f: f64,
    pub pi: f64,
}

/// Multipliers and search state of the Lagrangian solver.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LagrangianState {
    /// `ω_1..ω_N`; `ω_1` is the type-1 participation multiplier `η`.
    pub omega: Vec<f64>,
    pub eta: f64,
    /// Grid step on `f_N`.
    pub delta: f64,
    /// Grid step count.
    pub steps: usize,
    /// Selected top-type frequency.
    pub f_n: f64,
    /// Grid candidates evaluated.
    pub candidates: usize,
    /// Whether the participation constraint was met by root refinement
    /// (`true`) or by the grid fallback (`false`).
    pub refined: bool,
}

/// Solver output: the menu plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractMenu {
    pub items: Vec<MenuItem>,
    pub scheme: Scheme,
    pub iterations: usize,
    /// Largest absolute first-order residual at the returned items.
    pub residual: f64,
    /// Inclusive index ranges whose items were pooled to a common value.
    pub bunched: Vec<(usize, usize)>,
    pub lagrangian: Option<LagrangianState>,
}

impl ContractMenu {
    pub fn new(items: Vec<MenuItem>, scheme: Scheme) -> Self {
        Self { items, scheme, iterations: 0, residual: 0.0, bunched: Vec::new(), lagrangian: None }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn f(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.f).collect()
    }

    pub fn pi(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.pi).collect()
    }

    /// True if `j` lies inside a pooled range.
    pub fn is_bunched(&self, j: usize) -> bool {
        self.bunched.iter().any(|&(m, n)| m <= j && j <= n)
    }

    /// `U_PV_j` for each type taking its own item.
    pub fn pv_utilities(&self, problem: &ContractProblem) -> Vec<f64> {
        self.items
            .iter()
            .enumerate()
            .map(|(j, it)| pv_utility(problem.theta(j), it.f, it.pi, &problem.params))
            .collect()
    }

    /// Share-weighted PV utility `Σ β_j U_PV_j`.
    pub fn expected_pv_utility(&self, problem: &ContractProblem) -> f64 {
        self.pv_utilities(problem).iter().enumerate().map(|(j, u)| problem.beta(j) * u).sum()
    }

    /// Writes the menu CSV `type,theta,beta,f_hz,pi,u_pv,u_sr_term,scheme`.
    pub fn write_csv<W: Write>(&self, problem: &ContractProblem, writer: W) -> Result<(), ContractError> {
        let io = |e: csv::Error| ContractError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["type", "theta", "beta", "f_hz", "pi", "u_pv", "u_sr_term", "scheme"]).map_err(io)?;
        for (j, it) in self.items.iter().enumerate() {
            let u_pv = pv_utility(problem.theta(j), it.f, it.pi, &problem.params);
            let u_sr = problem.beta(j) * sr_term(problem, j, it.f, it.pi);
            w.write_record([
                (j + 1).to_string(),
                format!("{:?}", problem.theta(j)),
                format!("{:?}", problem.beta(j)),
                format!("{:?}", it.f),
                format!("{:?}", it.pi),
                format!("{u_pv:?}"),
                format!("{u_sr:?}"),
                self.scheme.tag().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| ContractError::Io(e.to_string()))
    }
}

/// `U_SR = Σ β_j θ_j (S_j − π_j)`.
pub fn sr_expected_utility(menu: &ContractMenu, problem: &ContractProblem) -> f64 {
    sr_utility_of(&menu.items, problem)
}

pub(crate) fn sr_utility_of(items: &[MenuItem], problem: &ContractProblem) -> f64 {
    items.iter().enumerate().map(|(j, it)| problem.beta(j) * sr_term(problem, j, it.f, it.pi)).sum()
}

/// Constraint violations found by [`check_feasibility`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Types with negative utility for their own item.
    pub ir: Vec<usize>,
    /// `(j, k)`: type `j` strictly prefers item `k` to item `j`.
    pub ic: Vec<(usize, usize)>,
    /// `j`: `f_j` is below `f_{j−1}`, or outside `[0, f_max]`.
    pub monotonicity: Vec<usize>,
    /// Largest violation magnitude across all checks.
    pub worst: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.ir.is_empty() && self.ic.is_empty() && self.monotonicity.is_empty()
    }
}

/// Evaluates all `N` IR, `N(N−1)` IC and the ordering constraints.
pub fn check_feasibility(menu: &ContractMenu, problem: &ContractProblem, tol: f64) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    let params = &problem.params;
    let n = menu.len().min(problem.n());
    for j in 0..n {
        let theta = problem.theta(j);
        let own = pv_utility(theta, menu.items[j].f, menu.items[j].pi, params);
        if own < -tol {
            report.ir.push(j);
        }
        report.worst = report.worst.max(-own);
        for k in 0..n {
            if k == j {
                continue;
            }
            let other = pv_utility(theta, menu.items[k].f, menu.items[k].pi, params);
            if other - own > tol {
                report.ic.push((j, k));
            }
            report.worst = report.worst.max(other - own);
        }
        let f = menu.items[j].f;
        let below_prev = j > 0 && f < menu.items[j - 1].f * (1.0 - 1e-12) - tol;
        if below_prev || f < 0.0 || f > params.f_max * (1.0 + 1e-12) {
            report.monotonicity.push(j);
        }
    }
    if menu.len() != problem.n() {
        report.monotonicity.push(n);
    }
    report.worst = report.worst.max(0.0);
    report
}

/// Index of the item type `j` prefers; ties within `tie_tol` go to `j`.
pub fn preferred_item(menu: &ContractMenu, problem: &ContractProblem, j: usize, tie_tol: f64) -> usize {
    let theta = problem.theta(j);
    let own = pv_utility(theta, menu.items[j].f, menu.items[j].pi, &problem.params);
    let mut best = (j, own);
    for (k, it) in menu.items.iter().enumerate() {
        let u = pv_utility(theta, it.f, it.pi, &problem.params);
        if u > best.1 + tie_tol {
            best = (k, u);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::TaskParams;
    use crate::parking::TypeProfile;

    fn problem() -> ContractProblem {
        let types = TypeProfile::new(vec![0.4, 0.8], vec![0.5, 0.5]).unwrap();
        ContractProblem::new(types, TaskParams::default()).unwrap()
    }

    #[test]
    fn zero_menu_is_feasible() {
        let p = problem();
        let menu = ContractMenu::new(vec![MenuItem { f: 0.0, pi: 0.0 }; 2], Scheme::GridOracle);
        assert!(check_feasibility(&menu, &p, 1e-9).is_feasible());
        assert_eq!(sr_expected_utility(&menu, &p), 0.0);
    }

    #[test]
    fn overpaying_item_one_breaks_type_two_ic() {
        let p = problem();
        let a = p.params.cost_coefficient();
        // Both IR bind and type 2 is indifferent: feasible.
        let f1 = 0.6e9;
        let pi1 = p.params.valuation.inverse(a * f1 * f1 / 0.4).unwrap();
        let f2 = 1.0e9;
        let v2 = p.params.valuation.value(pi1) + a * (f2 * f2 - f1 * f1) / 0.8;
        let pi2 = p.params.valuation.inverse(v2).unwrap();
        let mut menu = ContractMenu::new(vec![MenuItem { f: f1, pi: pi1 }, MenuItem { f: f2, pi: pi2 }], Scheme::Lagrangian);
        assert!(check_feasibility(&menu, &p, 1e-9).is_feasible());
        menu.items[0].pi += 0.05;
        let r = check_feasibility(&menu, &p, 1e-9);
        assert_eq!(r.ic, vec![(1, 0)]);
        assert!(r.ir.is_empty() && r.monotonicity.is_empty());
    }

    #[test]
    fn single_term_sr_utility() {
        let types = TypeProfile::new(vec![1.0], vec![1.0]).unwrap();
        let mut params = TaskParams::default();
        params.rates = vec![params.task_bits / 0.8];
        let p = ContractProblem::new(types, params).unwrap();
        let menu = ContractMenu::new(vec![MenuItem { f: 1e9, pi: 1.0 }], Scheme::CompleteInfo);
        assert!((sr_expected_utility(&menu, &p) - 2.92).abs() < 1e-12);
    }

    #[test]
    fn csv_has_one_row_per_type() {
        let p = problem();
        let menu = ContractMenu::new(vec![MenuItem { f: 5e8, pi: 0.1 }, MenuItem { f: 8e8, pi: 0.3 }], Scheme::LocalAsymmetric);
        let mut buf = Vec::new();
        menu.write_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "type,theta,beta,f_hz,pi,u_pv,u_sr_term,scheme");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("2,0.8,0.5,800000000.0,0.3,") && lines[2].ends_with(",LA"));
    }
}
