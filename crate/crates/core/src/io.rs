//! CSV readers and writers for traces, maps, shot logs, posteriors, cycle
//! logs, spectra and violation reports. Headers carry units.

use std::io::{Read, Write};

use thiserror::Error;

use crate::estimator::PosteriorGrid;
use crate::feedback::CycleLog;
use crate::markovianity::{Statistic, ViolationReport};
use crate::noise::NoiseTrace;
use crate::qubit::{ChevronMap, Outcome, RamseyMap, ShotRecord};
use crate::scalar::Real;
use crate::spectra::{DiffusionFit, PsdEstimate};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: u64, reason: String },
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>, IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn fmt<T: Real>(x: T) -> String {
    x.to_string()
}

fn outcome_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Down => "down",
        Outcome::Up => "up",
    }
}

/// `time_s,delta_f_hz`, one row per sample at `i * dt`.
pub fn write_trace<T: Real, W: Write>(trace: &NoiseTrace<T>, out: W) -> Result<(), IoError> {
    let mut w = writer(out, &["time_s", "delta_f_hz"])?;
    for (i, &s) in trace.samples.iter().enumerate() {
        w.write_record([fmt(T::from_count(i) * trace.dt), fmt(s)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `time_s,delta_f_hz` CSV. The sample period is taken from the
/// first two rows and every later row must sit on that grid.
pub fn read_trace<R: Read>(input: R, descriptor: &str) -> Result<NoiseTrace<f64>, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "delta_f_hz"] {
        return Err(IoError::Format {
            line: 1,
            reason: format!("expected header time_s,delta_f_hz, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for row in rdr.deserialize::<(f64, f64)>() {
        let (t, v) = row?;
        times.push(t);
        samples.push(v);
    }
    if times.len() < 2 {
        return Err(IoError::Format { line: 2, reason: "need at least two samples".into() });
    }
    let dt = times[1] - times[0];
    for (i, &t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if !(dt > 0.0) || (t - expected).abs() > 1e-6 * dt {
            return Err(IoError::Format {
                line: i as u64 + 2,
                reason: format!("time {t} s is off the uniform grid of step {dt} s"),
            });
        }
    }
    NoiseTrace::new(dt, samples, 0, descriptor).map_err(|e| IoError::Format {
        line: 0,
        reason: e.to_string(),
    })
}

/// Matrix CSV: the header row holds `corner` then the column axis values,
/// every following row starts with its row axis value.
pub fn write_matrix<T: Real, W: Write>(
    corner: &str,
    columns: &[T],
    rows: &[T],
    values: &[Vec<T>],
    out: W,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once(corner.to_string())
        .chain(columns.iter().map(|&c| fmt(c)))
        .collect();
    w.write_record(&header)?;
    for (&r, row) in rows.iter().zip(values) {
        let rec: Vec<String> = std::iter::once(fmt(r)).chain(row.iter().map(|&v| fmt(v))).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows are acquisition times, columns evolution times, cells P(↓).
pub fn write_ramsey_map<T: Real, W: Write>(map: &RamseyMap<T>, out: W) -> Result<(), IoError> {
    write_matrix(
        "row_time_s\\t_evolution_s",
        &map.evolution_times,
        &map.row_times,
        &map.probability,
        out,
    )
}

/// Same layout as [`write_ramsey_map`] with 1 for ↓ and 0 for ↑.
pub fn write_ramsey_outcomes<T: Real, W: Write>(map: &RamseyMap<T>, out: W) -> Result<(), IoError> {
    let values: Vec<Vec<T>> = map
        .outcomes
        .iter()
        .map(|row| {
            row.iter()
                .map(|&o| if o == Outcome::Down { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    write_matrix("row_time_s\\t_evolution_s", &map.evolution_times, &map.row_times, &values, out)
}

/// Rows are drive detunings, columns burst times, cells the measured P(↑).
pub fn write_chevron<T: Real, W: Write>(map: &ChevronMap<T>, out: W) -> Result<(), IoError> {
    write_matrix(
        "detuning_hz\\t_burst_s",
        &map.burst_times,
        &map.detunings,
        &map.measured_up,
        out,
    )
}

/// `timestamp_s,t_evolution_s,outcome` with outcome `down` or `up`.
pub fn write_shot_log<'a, T: Real + 'a, W: Write>(
    shots: impl IntoIterator<Item = &'a ShotRecord<T>>,
    out: W,
) -> Result<(), IoError> {
    let mut w = writer(out, &["timestamp_s", "t_evolution_s", "outcome"])?;
    for s in shots {
        w.write_record([fmt(s.timestamp), fmt(s.evolution_time), outcome_label(s.outcome).into()])?;
    }
    w.flush()?;
    Ok(())
}

/// `f_hz,probability` at bin centres.
pub fn write_posterior<T: Real, W: Write>(grid: &PosteriorGrid<T>, out: W) -> Result<(), IoError> {
    let mut w = writer(out, &["f_hz", "probability"])?;
    for (f, p) in grid.centers().into_iter().zip(grid.probabilities()) {
        w.write_record([fmt(f), fmt(p)])?;
    }
    w.flush()?;
    Ok(())
}

/// `cycle,start_time_s,f_est_hz,correction_hz,true_detuning_hz`; failed
/// estimates are written as empty `f_est_hz` cells.
pub fn write_cycle_log<T: Real, W: Write>(cycles: &[CycleLog<T>], out: W) -> Result<(), IoError> {
    let mut w = writer(
        out,
        &["cycle", "start_time_s", "f_est_hz", "correction_hz", "true_detuning_hz"],
    )?;
    for c in cycles {
        let est = if c.estimation_failed { String::new() } else { fmt(c.f_est) };
        w.write_record([
            c.cycle_index.to_string(),
            fmt(c.start_time),
            est,
            fmt(c.correction_applied),
            fmt(c.true_mean_detuning),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `f_hz,psd_hz2_per_hz`.
pub fn write_psd<T: Real, W: Write>(psd: &PsdEstimate<T>, out: W) -> Result<(), IoError> {
    let mut w = writer(out, &["f_hz", "psd_hz2_per_hz"])?;
    for (&f, &p) in psd.freqs.iter().zip(&psd.power) {
        w.write_record([fmt(f), fmt(p)])?;
    }
    w.flush()?;
    Ok(())
}

/// `interval_s,increment_variance_hz2`.
pub fn write_diffusion<T: Real, W: Write>(fit: &DiffusionFit<T>, out: W) -> Result<(), IoError> {
    let mut w = writer(out, &["interval_s", "increment_variance_hz2"])?;
    for (&t, &v) in fit.intervals.iter().zip(&fit.variances) {
        w.write_record([fmt(t), fmt(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// `t_s,value` for one-dimensional curves such as W(t) or P(↓).
pub fn write_curve<T: Real, W: Write>(value_header: &str, ts: &[T], ys: &[T], out: W) -> Result<(), IoError> {
    let mut w = writer(out, &["t_s", value_header])?;
    for (&t, &y) in ts.iter().zip(ys) {
        w.write_record([fmt(t), fmt(y)])?;
    }
    w.flush()?;
    Ok(())
}

/// `circuit_id,germ,L,k,two_delta_loglik,flag`; infinite evidence is `inf`.
pub fn write_violations<T: Real, W: Write>(report: &ViolationReport<T>, out: W) -> Result<(), IoError> {
    let mut w = writer(out, &["circuit_id", "germ", "L", "k", "two_delta_loglik", "flag"])?;
    for c in &report.per_circuit {
        let stat = match c.statistic {
            Statistic::Finite(v) => fmt(v),
            Statistic::InfiniteEvidence => "inf".into(),
        };
        let flag = match c.flag {
            crate::markovianity::Flag::Consistent => "consistent",
            crate::markovianity::Flag::Violation => "violation",
            crate::markovianity::Flag::Fluctuation => "fluctuation",
        };
        w.write_record([
            c.circuit_id.clone(),
            c.germ.clone(),
            c.max_length.to_string(),
            c.k.to_string(),
            stat,
            flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
