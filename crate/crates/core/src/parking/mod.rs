//! Parking-duration statistics and PV type profiles.
//!
//! Parking duration follows a two-component Gamma mixture (short-term and
//! long-term parkers) whose parameters depend on the arrival hour. A PV's
//! type is its probability of staying at least `τ` more hours given how long
//! it has already been parked.

mod gamma;
mod mixture;
mod trace;
mod types;

use thiserror::Error;

pub use gamma::{gamma_p, gamma_pq, gamma_q, ln_gamma, ln_gamma_q, INCOMPLETE_GAMMA_TOL};
pub use mixture::{
    density, leave_probability, stay_probability, GammaComponent, GammaMixtureParams, HourMixture, PvState, HOURS,
};
pub use trace::{
    default_arrival_weights, ingest_trace, read_trace, surviving_population, synthesize_population, write_trace,
    SampledPv, TraceRecord, TraceSummary,
};
pub use types::{classify_types, TypeProfile};

#[derive(Debug, Error)]
pub enum ParkingError {
    #[error("invalid mixture parameters for hour {hour}: {message}")]
    InvalidParams { hour: usize, message: String },
    #[error("parameter file: {0}")]
    ParamFile(String),
    #[error("arrival hour {0} outside 0..=23")]
    InvalidHour(u32),
    #[error("invalid PV state: {0}")]
    InvalidState(String),
    #[error("parking duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("parked time {parked} h is beyond the numeric support of the survival function")]
    OutsideSupport { parked: f64 },
    #[error("empty PV population")]
    EmptyPopulation,
    #[error("type count must be at least 2, got {0}")]
    TooFewTypes(usize),
    #[error("invalid type profile: {0}")]
    InvalidProfile(String),
    #[error("invalid arrival distribution: {0}")]
    InvalidArrivals(String),
    #[error("trace row {row}: {message}")]
    TraceRow { row: usize, message: String },
    #[error("trace I/O: {0}")]
    TraceIo(String),
}
