//! Parking trace ingestion and synthetic population generation.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::mixture::{GammaMixtureParams, PvState, HOURS};
use super::types::{classify_types, TypeProfile};
use super::ParkingError;
use crate::rng::{self, streams};

/// One row of a parking trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub arrival_hour: u8,
    pub duration_hours: f64,
}

/// Parsed trace with its arrival histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub records: Vec<TraceRecord>,
    pub histogram: [u64; HOURS],
}

impl TraceSummary {
    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        let mut histogram = [0u64; HOURS];
        for r in &records {
            histogram[r.arrival_hour as usize] += 1;
        }
        Self { records, histogram }
    }

    /// Empirical type profile of the vehicles still parked at clock hour `slot_hour`.
    pub fn types_at(
        &self,
        slot_hour: u8,
        horizon: f64,
        params: &GammaMixtureParams,
        n: usize,
    ) -> Result<TypeProfile, ParkingError> {
        let pvs = surviving_population(&self.records, slot_hour, horizon);
        classify_types(&pvs, params, n)
    }
}

/// Vehicles still parked at clock hour `slot_hour`, with their parked time.
///
/// Arrivals are taken at the start of their hour and the day wraps, so a
/// vehicle that arrived at 22 is two hours in at 0.
pub fn surviving_population(records: &[TraceRecord], slot_hour: u8, horizon: f64) -> Vec<PvState> {
    records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let parked = ((slot_hour as i32 - r.arrival_hour as i32).rem_euclid(HOURS as i32)) as f64;
            (r.duration_hours > parked).then_some(PvState {
                id: i as u32,
                arrival_hour: r.arrival_hour,
                parked,
                horizon,
            })
        })
        .collect()
}

/// Reads `arrival_hour,duration_hours` rows. Any malformed row rejects the file.
pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRecord>, ParkingError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| ParkingError::TraceIo(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "arrival_hour" || &headers[1] != "duration_hours" {
        return Err(ParkingError::TraceRow {
            row: 1,
            message: format!("expected header `arrival_hour,duration_hours`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Header is row 1.
        let row = i + 2;
        let err = |message: String| ParkingError::TraceRow { row, message };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(format!("expected 2 fields, got {}", rec.len())));
        }
        let hour: u8 = rec[0].parse().map_err(|_| err(format!("bad arrival hour `{}`", &rec[0])))?;
        if hour as usize >= HOURS {
            return Err(err(format!("arrival hour {hour} outside 0..=23")));
        }
        let duration: f64 = rec[1].parse().map_err(|_| err(format!("bad duration `{}`", &rec[1])))?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(err(format!("duration {duration} must be positive")));
        }
        out.push(TraceRecord { arrival_hour: hour, duration_hours: duration });
    }
    Ok(out)
}

pub fn ingest_trace<R: Read>(reader: R) -> Result<TraceSummary, ParkingError> {
    Ok(TraceSummary::from_records(read_trace(reader)?))
}

pub fn write_trace<W: Write>(writer: W, records: &[TraceRecord]) -> Result<(), ParkingError> {
    let io = |e: csv::Error| ParkingError::TraceIo(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["arrival_hour", "duration_hours"]).map_err(io)?;
    for r in records {
        w.write_record([r.arrival_hour.to_string(), format!("{:?}", r.duration_hours)]).map_err(io)?;
    }
    w.flush().map_err(|e| ParkingError::TraceIo(e.to_string()))
}

/// A sampled PV at its arrival together with its eventual parking duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPv {
    pub state: PvState,
    pub duration: f64,
}

impl SampledPv {
    pub fn record(&self) -> TraceRecord {
        TraceRecord { arrival_hour: self.state.arrival_hour, duration_hours: self.duration }
    }
}

/// Default synthetic arrival profile: a 9 AM peak, a smaller noon peak and a
/// low floor at every hour, on a circular clock.
pub fn default_arrival_weights() -> [f64; HOURS] {
    let bump = |h: usize, centre: f64, width: f64| {
        let d = (h as f64 - centre).abs();
        let d = d.min(HOURS as f64 - d);
        (-(d * d) / (2.0 * width * width)).exp()
    };
    let mut w = [0.0; HOURS];
    for (h, slot) in w.iter_mut().enumerate() {
        *slot = 0.02 + bump(h, 9.0, 1.2) + 0.7 * bump(h, 12.0, 1.0);
    }
    let total: f64 = w.iter().sum();
    w.map(|x| x / total)
}

/// Draws `count` PVs: arrival hour from `arrival_weights`, duration from the
/// hour's mixture. Deterministic for a fixed seed.
pub fn synthesize_population(
    params: &GammaMixtureParams,
    arrival_weights: &[f64],
    count: usize,
    horizon: f64,
    seed: u64,
) -> Result<Vec<SampledPv>, ParkingError> {
    if arrival_weights.len() != HOURS {
        return Err(ParkingError::InvalidArrivals(format!(
            "expected {HOURS} hourly weights, got {}",
            arrival_weights.len()
        )));
    }
    let hours = WeightedIndex::new(arrival_weights).map_err(|e| ParkingError::InvalidArrivals(e.to_string()))?;
    let mut rng = rng::stream(seed, streams::POPULATION);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let hour = hours.sample(&mut rng) as u8;
        let duration = params.hour(hour)?.sample(&mut rng);
        out.push(SampledPv {
            state: PvState { id: i as u32, arrival_hour: hour, parked: 0.0, horizon },
            duration,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parking::HourMixture;

    #[test]
    fn single_record_histogram() {
        let s = ingest_trace("arrival_hour,duration_hours\n9,4.0\n".as_bytes()).unwrap();
        assert_eq!(s.histogram[9], 1);
        assert_eq!(s.histogram.iter().sum::<u64>(), 1);
    }

    #[test]
    fn malformed_rows_report_row_number() {
        let cases = [
            ("arrival_hour,duration_hours\n9,4.0\n24,1.0\n", 3),
            ("arrival_hour,duration_hours\n9,4.0\n3,0\n", 3),
            ("arrival_hour,duration_hours\nx,4.0\n", 2),
            ("arrival_hour,duration_hours\n1,2\n2,3\n4\n", 4),
        ];
        for (text, row) in cases {
            match ingest_trace(text.as_bytes()) {
                Err(ParkingError::TraceRow { row: r, .. }) => assert_eq!(r, row, "{text}"),
                other => panic!("expected row error, got {other:?}"),
            }
        }
        assert!(ingest_trace("hour,dur\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn write_then_read_conserves_rows() {
        let pop = synthesize_population(&GammaMixtureParams::illustrative(), &default_arrival_weights(), 500, 1.0, 3)
            .unwrap();
        let records: Vec<_> = pop.iter().map(SampledPv::record).collect();
        let mut buf = Vec::new();
        write_trace(&mut buf, &records).unwrap();
        let s = ingest_trace(buf.as_slice()).unwrap();
        assert_eq!(s.records, records);
        assert_eq!(s.histogram.iter().sum::<u64>(), 500);
    }

    #[test]
    fn synthesis_is_deterministic_and_positive() {
        let p = GammaMixtureParams::illustrative();
        let w = default_arrival_weights();
        let a = synthesize_population(&p, &w, 1000, 1.0, 42).unwrap();
        let b = synthesize_population(&p, &w, 1000, 1.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.duration > 0.0));
        assert_ne!(a, synthesize_population(&p, &w, 1000, 1.0, 43).unwrap());
    }

    #[test]
    fn uniform_arrivals_give_flat_histogram() {
        let p = GammaMixtureParams::illustrative();
        let n = 24_000;
        let pop = synthesize_population(&p, &[1.0; HOURS], n, 1.0, 9).unwrap();
        let s = TraceSummary::from_records(pop.iter().map(SampledPv::record).collect());
        // Binomial(n, 1/24): sd ≈ 31; allow 4.5 sd.
        let sd = (n as f64 / 24.0 * (23.0 / 24.0)).sqrt();
        for c in s.histogram {
            assert!((c as f64 - 1000.0).abs() < 4.5 * sd, "{c}");
        }
    }

    #[test]
    fn duration_mean_matches_mixture_mean() {
        let m = HourMixture::new(0.4, 1.5, 0.8, 5.0, 1.6);
        let p = GammaMixtureParams::uniform(m).unwrap();
        let n = 10_000;
        let pop = synthesize_population(&p, &[1.0; HOURS], n, 1.0, 11).unwrap();
        let mean = pop.iter().map(|s| s.duration).sum::<f64>() / n as f64;
        // Mixture variance: E[X²] − mean², with E[X²] = Σ H κ(κ+1) ε².
        let second = m.short.weight * m.short.shape * (m.short.shape + 1.0) * m.short.scale.powi(2)
            + m.long.weight * m.long.shape * (m.long.shape + 1.0) * m.long.scale.powi(2);
        let sd = ((second - m.mean().powi(2)) / n as f64).sqrt();
        assert!((mean - m.mean()).abs() < 3.0 * sd, "{mean} vs {}", m.mean());
    }

    #[test]
    fn survivors_wrap_around_midnight() {
        let recs = [
            TraceRecord { arrival_hour: 22, duration_hours: 3.0 },
            TraceRecord { arrival_hour: 22, duration_hours: 1.5 },
            TraceRecord { arrival_hour: 1, duration_hours: 0.5 },
        ];
        let s = surviving_population(&recs, 0, 1.0);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].parked, 2.0);
        let s = surviving_population(&recs, 1, 1.0);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].parked, 0.0);
    }

    #[test]
    fn default_arrivals_peak_at_nine() {
        let w = default_arrival_weights();
        let peak = (0..HOURS).max_by(|a, b| w[*a].total_cmp(&w[*b])).unwrap();
        assert_eq!(peak, 9);
        assert!(w[12] > w[11] && w[12] > w[13]);
        assert!(w.iter().all(|x| *x > 0.0));
    }
}
