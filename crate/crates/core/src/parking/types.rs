use serde::{Deserialize, Serialize};

use super::mixture::{stay_probability, GammaMixtureParams, PvState};
use super::ParkingError;

const SHARE_TOLERANCE: f64 = 1e-9;

/// Sorted PV types and their population shares at one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeProfile {
    thetas: Vec<f64>,
    betas: Vec<f64>,
    /// Type count asked for; `len()` is lower when bins had to be merged.
    pub requested: usize,
    /// PVs excluded because their stay probability was zero.
    pub dropped: usize,
}

impl TypeProfile {
    pub fn new(thetas: Vec<f64>, betas: Vec<f64>) -> Result<Self, ParkingError> {
        let bad = |m: String| Err(ParkingError::InvalidProfile(m));
        if thetas.is_empty() || thetas.len() != betas.len() {
            return bad(format!("{} types but {} shares", thetas.len(), betas.len()));
        }
        for w in thetas.windows(2) {
            if !(w[0] < w[1]) {
                return bad(format!("types not strictly ascending: {} then {}", w[0], w[1]));
            }
        }
        if let Some(t) = thetas.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return bad(format!("type {t} outside (0, 1]"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b >= 0.0)) {
            return bad(format!("negative share {b}"));
        }
        let sum: f64 = betas.iter().sum();
        if (sum - 1.0).abs() > SHARE_TOLERANCE {
            return bad(format!("shares sum to {sum}"));
        }
        let requested = thetas.len();
        Ok(Self { thetas, betas, requested, dropped: 0 })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Population-weighted mean type `Σ β_j θ_j`.
    pub fn mean(&self) -> f64 {
        self.thetas.iter().zip(&self.betas).map(|(t, b)| t * b).sum()
    }
}

/// Bins sorted stay probabilities into `n` quantile groups.
///
/// Equal values never straddle a bin boundary; when there are fewer distinct
/// values than `n` the profile has fewer types than requested.
pub fn classify_types(pvs: &[PvState], params: &GammaMixtureParams, n: usize) -> Result<TypeProfile, ParkingError> {
    let values = pvs
        .iter()
        .map(|pv| stay_probability(pv, params))
        .collect::<Result<Vec<_>, _>>()?;
    classify_values(values, n)
}

pub(crate) fn classify_values(mut values: Vec<f64>, n: usize) -> Result<TypeProfile, ParkingError> {
    if n < 2 {
        return Err(ParkingError::TooFewTypes(n));
    }
    let before = values.len();
    values.retain(|v| *v > 0.0);
    let dropped = before - values.len();
    if values.is_empty() {
        return Err(ParkingError::EmptyPopulation);
    }
    values.sort_by(f64::total_cmp);
    let total = values.len();

    let mut thetas = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut start = 0;
    for k in 1..=n {
        if start >= total {
            break;
        }
        let mut end = (k * total / n).max(start);
        if end == start && k < n {
            continue;
        }
        // Push the boundary past any run of values equal to the last one.
        while end < total && end > 0 && values[end] == values[end - 1] {
            end += 1;
        }
        let bin = &values[start..end];
        thetas.push(bin.iter().sum::<f64>() / bin.len() as f64);
        counts.push(bin.len());
        start = end;
    }

    // Bin means of distinct runs are ascending; guard against rounding ties.
    let mut merged_t: Vec<f64> = Vec::with_capacity(thetas.len());
    let mut merged_c: Vec<usize> = Vec::with_capacity(thetas.len());
    for (t, c) in thetas.into_iter().zip(counts) {
        match (merged_t.last_mut(), merged_c.last_mut()) {
            (Some(pt), Some(pc)) if t <= *pt => {
                *pt = (*pt * *pc as f64 + t * c as f64) / (*pc + c) as f64;
                *pc += c;
            }
            _ => {
                merged_t.push(t);
                merged_c.push(c);
            }
        }
    }
    let betas = merged_c.iter().map(|c| *c as f64 / total as f64).collect();
    let mut profile = TypeProfile::new(merged_t.into_iter().map(|t| t.min(1.0)).collect(), betas)?;
    profile.requested = n;
    profile.dropped = dropped;
    Ok(profile)
}
