use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ContractError;
use crate::parking::TypeProfile;

/// PV valuation of a reward, strictly increasing and concave with `v(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Valuation {
    /// `ln(1 + π)`.
    #[default]
    Log,
    /// `(1 + π)^k − 1` with `0 < k < 1`.
    Power { exponent: f64 },
}

impl Valuation {
    pub fn value(&self, pi: f64) -> f64 {
        match *self {
            Valuation::Log => pi.ln_1p(),
            Valuation::Power { exponent } => (1.0 + pi).powf(exponent) - 1.0,
        }
    }

    pub fn derivative(&self, pi: f64) -> f64 {
        match *self {
            Valuation::Log => 1.0 / (1.0 + pi),
            Valuation::Power { exponent } => exponent * (1.0 + pi).powf(exponent - 1.0),
        }
    }

    pub fn second_derivative(&self, pi: f64) -> f64 {
        match *self {
            Valuation::Log => -1.0 / (1.0 + pi).powi(2),
            Valuation::Power { exponent } => exponent * (exponent - 1.0) * (1.0 + pi).powf(exponent - 2.0),
        }
    }

    /// Reward whose valuation is `u`; `None` below the range of `v`.
    pub fn inverse(&self, u: f64) -> Option<f64> {
        match *self {
            Valuation::Log => Some(u.exp_m1()),
            Valuation::Power { exponent } => (u > -1.0).then(|| (1.0 + u).powf(1.0 / exponent) - 1.0),
        }
    }

    /// Reward at which `v′(π) = slope`, for `slope > 0`.
    pub fn derivative_inverse(&self, slope: f64) -> f64 {
        match *self {
            Valuation::Log => 1.0 / slope - 1.0,
            Valuation::Power { exponent } => (slope / exponent).powf(1.0 / (exponent - 1.0)) - 1.0,
        }
    }

    /// Infimum of `v` over `π > −1`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Valuation::Log => f64::NEG_INFINITY,
            Valuation::Power { .. } => -1.0,
        }
    }

    fn validate(&self) -> Result<(), ContractError> {
        match *self {
            Valuation::Log => Ok(()),
            Valuation::Power { exponent } if exponent > 0.0 && exponent < 1.0 => Ok(()),
            Valuation::Power { exponent } => Err(ContractError::InvalidParams(format!(
                "power valuation exponent {exponent} must lie in (0, 1)"
            ))),
        }
    }
}

/// Task, channel and energy parameters shared by all types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    /// Profit per second of time saved, `ρ`.
    pub rho: f64,
    /// CPU cycles per bit, `κ`.
    pub kappa: f64,
    /// Task size in bits, `s`.
    pub task_bits: f64,
    /// Local CPU frequency in Hz.
    pub f_local: f64,
    /// Transmission rate per type in bit/s; a single entry applies to all types.
    pub rates: Vec<f64>,
    /// Effective switched capacitance, `ε`.
    pub epsilon: f64,
    /// Price per joule, `e`.
    pub energy_price: f64,
    /// Upper bound on contributed frequency in Hz.
    pub f_max: f64,
    #[serde(default)]
    pub valuation: Valuation,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            kappa: 1e4,
            // 500 KB taken as 500·1000·8 bits.
            task_bits: 4e6,
            f_local: 0.5e9,
            rates: vec![5.5e6],
            epsilon: 1e-28,
            energy_price: 0.1,
            f_max: 3e9,
            valuation: Valuation::Log,
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<(), ContractError> {
        let named = [
            ("rho", self.rho),
            ("kappa", self.kappa),
            ("task_bits", self.task_bits),
            ("f_local", self.f_local),
            ("epsilon", self.epsilon),
            ("energy_price", self.energy_price),
            ("f_max", self.f_max),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ContractError::InvalidParams(format!("{name} = {v} must be positive and finite")));
            }
        }
        if self.rates.is_empty() {
            return Err(ContractError::InvalidParams("at least one transmission rate is required".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(ContractError::InvalidParams(format!("transmission rate {r} must be positive")));
        }
        self.valuation.validate()
    }

    /// `e·κ·s·ε`, the energy-cost coefficient of `f²`.
    pub fn cost_coefficient(&self) -> f64 {
        self.energy_price * self.kappa * self.task_bits * self.epsilon
    }

    pub fn rate(&self, j: usize) -> f64 {
        if self.rates.len() == 1 {
            self.rates[0]
        } else {
            self.rates[j]
        }
    }

    /// Total cycles `κ·s`.
    pub fn cycles(&self) -> f64 {
        self.kappa * self.task_bits
    }
}

/// A screening problem at one slot: type profile plus task parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractProblem {
    pub types: TypeProfile,
    pub params: TaskParams,
}

impl ContractProblem {
    pub fn new(types: TypeProfile, params: TaskParams) -> Result<Self, ContractError> {
        params.validate()?;
        if params.rates.len() != 1 && params.rates.len() != types.len() {
            return Err(ContractError::InvalidProblem(format!(
                "{} transmission rates for {} types",
                params.rates.len(),
                types.len()
            )));
        }
        Ok(Self { types, params })
    }

    pub fn n(&self) -> usize {
        self.types.len()
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.types.thetas()[j]
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.types.betas()[j]
    }

    /// Parses the TOML problem format (`[task]` and `[types]` tables).
    pub fn from_toml_str(text: &str) -> Result<Self, ContractError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Types {
            theta: Vec<f64>,
            beta: Vec<f64>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            #[serde(default)]
            task: Option<TaskParams>,
            types: Types,
        }
        let file: File = toml::from_str(text).map_err(|e| ContractError::Parse(e.to_string()))?;
        let types = TypeProfile::new(file.types.theta, file.types.beta)
            .map_err(|e| ContractError::InvalidProblem(e.to_string()))?;
        Self::new(types, file.task.unwrap_or_default())
    }

    pub fn load(path: &Path) -> Result<Self, ContractError> {
        let text = std::fs::read_to_string(path).map_err(|e| ContractError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        #[derive(Serialize)]
        struct Types<'a> {
            theta: &'a [f64],
            beta: &'a [f64],
        }
        #[derive(Serialize)]
        struct File<'a> {
            task: &'a TaskParams,
            types: Types<'a>,
        }
        toml::to_string(&File {
            task: &self.params,
            types: Types { theta: self.types.thetas(), beta: self.types.betas() },
        })
        .expect("problem serializes to TOML")
    }
}

/// Time saved for the SR when type `j` contributes `f` Hz, scaled by `ρ`.
pub fn time_saved(f: f64, params: &TaskParams, j: usize) -> Result<f64, ContractError> {
    if !(f > 0.0) {
        return Err(ContractError::NonPositiveResource(f));
    }
    let cycles = params.cycles();
    Ok(params.rho * (cycles / params.f_local - cycles / f - params.task_bits / params.rate(j)))
}

/// Energy cost `e·κ·s·ε·f²`.
pub fn energy_cost(f: f64, params: &TaskParams) -> f64 {
    params.cost_coefficient() * f * f
}

pub fn pv_utility(theta: f64, f: f64, pi: f64, params: &TaskParams) -> f64 {
    theta * params.valuation.value(pi) - energy_cost(f, params)
}

/// `θ_j (S_j − π_j)`; a zero-resource item saves no time.
pub fn sr_term(problem: &ContractProblem, j: usize, f: f64, pi: f64) -> f64 {
    let saved = if f > 0.0 { time_saved(f, &problem.params, j).expect("positive resource") } else { 0.0 };
    problem.theta(j) * (saved - pi)
}
