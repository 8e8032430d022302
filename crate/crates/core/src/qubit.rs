//! Single-shot Ramsey and Rabi measurements of a wandering two-level system.
//!
//! Within one shot the qubit frequency is frozen at the noise value found at
//! the shot's start timestamp. Ramsey decay is not imposed: it emerges from
//! averaging shots taken at different frequencies.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::{NoiseError, NoiseStack};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid {field}: {constraint}")]
    InvalidParams {
        field: &'static str,
        constraint: &'static str,
    },
    #[error("noise trace too short: simulation needs {required_s} s but trace covers {available_s} s")]
    Duration { required_s: f64, available_s: f64 },
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

fn check(ok: bool, field: &'static str, constraint: &'static str) -> Result<(), SimError> {
    if ok {
        Ok(())
    } else {
        Err(SimError::InvalidParams { field, constraint })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams<T> {
    /// Hz.
    pub rabi_frequency: T,
    /// s.
    pub t2_rabi: T,
    /// Rotation-axis error offset.
    pub alpha: T,
    /// Oscillation visibility.
    pub beta_vis: T,
    /// Initial Ramsey phase, rad.
    pub theta: T,
    /// P(report ↓ | ↓).
    pub readout_fidelity_down: T,
    /// P(report ↑ | ↑).
    pub readout_fidelity_up: T,
    /// Optional exponential envelope for dephasing faster than the noise
    /// trace resolves, s.
    pub white_dephasing_time: Option<T>,
}

impl<T: Real> Default for QubitParams<T> {
    fn default() -> Self {
        Self {
            rabi_frequency: T::lit(5e6),
            t2_rabi: T::lit(2.52e-6),
            alpha: T::zero(),
            beta_vis: T::one(),
            theta: T::zero(),
            readout_fidelity_down: T::one(),
            readout_fidelity_up: T::one(),
            white_dephasing_time: None,
        }
    }
}

impl<T: Real> QubitParams<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        check(unit(self.beta_vis), "beta_vis", "must lie in [0, 1]")?;
        check(
            self.alpha.abs() + self.beta_vis <= T::one() + T::lit(1e-12),
            "alpha",
            "|alpha| + beta_vis must not exceed 1",
        )?;
        let fid = |x: T| x >= T::lit(0.5) && x <= T::one();
        check(fid(self.readout_fidelity_down), "readout_fidelity_down", "must lie in [0.5, 1]")?;
        check(fid(self.readout_fidelity_up), "readout_fidelity_up", "must lie in [0.5, 1]")?;
        check(self.rabi_frequency > T::zero(), "rabi_frequency", "must be > 0")?;
        check(self.t2_rabi > T::zero(), "t2_rabi", "must be > 0")?;
        if let Some(tw) = self.white_dephasing_time {
            check(tw > T::zero(), "white_dephasing_time", "must be > 0")?;
        }
        Ok(())
    }
}

/// Probability of *reporting* ↓ after a Ramsey sequence of length `t` at the
/// given qubit-minus-drive detuning, including readout infidelity.
pub fn ramsey_probability<T: Real>(detuning: T, t: T, params: &QubitParams<T>) -> T {
    let half = T::lit(0.5);
    let envelope = params
        .white_dephasing_time
        .map_or(T::one(), |tw| (-t / tw).exp());
    let phase = T::TAU() * detuning * t + params.theta;
    let p_down = half * (T::one() + params.alpha + params.beta_vis * envelope * phase.cos());
    let p_down = p_down.max(T::zero()).min(T::one());
    let reported = p_down * params.readout_fidelity_down
        + (T::one() - p_down) * (T::one() - params.readout_fidelity_up);
    reported.max(T::zero()).min(T::one())
}

/// Probability of ↑ after a resonant-drive burst of length `t`.
///
/// `t2_rabi` may be infinite for undamped oscillations.
pub fn rabi_probability<T: Real>(rabi_freq: T, detuning: T, t: T, t2_rabi: T) -> T {
    let w2 = rabi_freq * rabi_freq + detuning * detuning;
    if w2 == T::zero() {
        return T::zero();
    }
    let generalized = w2.sqrt();
    let decay = (-t / t2_rabi).exp();
    let p = T::lit(0.5) * rabi_freq * rabi_freq / w2
        * (T::one() - (T::TAU() * generalized * t).cos() * decay);
    p.max(T::zero()).min(T::one())
}

/// Single-shot measurement result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Down,
    Up,
}

impl Outcome {
    /// `+1` for ↓, `-1` for ↑.
    pub fn sign(self) -> i8 {
        match self {
            Outcome::Down => 1,
            Outcome::Up => -1,
        }
    }
}

/// Bernoulli draw: ↓ with probability `p_report_down`.
pub fn sample_shot<T: Real, R: Rng + ?Sized>(p_report_down: T, rng: &mut R) -> Outcome {
    let u: f64 = rng.random();
    if u < p_report_down.to_f64_lossy() {
        Outcome::Down
    } else {
        Outcome::Up
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord<T> {
    /// Free evolution time, s.
    pub evolution_time: T,
    pub outcome: Outcome,
    /// Simulated wall clock at the start of the shot, s.
    pub timestamp: T,
    /// Drive frequency relative to the local oscillator, Hz.
    pub mw_detuning: T,
}

/// Wall-clock cost of one shot and of one estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotTiming<T> {
    /// Microwave burst plus heating wait, s.
    pub manipulation_and_wait: T,
    pub readout: T,
    /// Estimator compute time per cycle, s. The default cycle budget also
    /// reserves this much per shot, which gives 100 x 240 us = 24 ms.
    pub calculation: T,
}

impl<T: Real> Default for ShotTiming<T> {
    fn default() -> Self {
        Self {
            manipulation_and_wait: T::lit(60e-6),
            readout: T::lit(140e-6),
            calculation: T::lit(40e-6),
        }
    }
}

impl<T: Real> ShotTiming<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        check(self.manipulation_and_wait >= T::zero(), "manipulation_and_wait", "must be >= 0")?;
        check(self.readout >= T::zero(), "readout", "must be >= 0")?;
        check(self.calculation >= T::zero(), "calculation", "must be >= 0")
    }

    /// Time between consecutive shot starts.
    pub fn shot_period(&self) -> T {
        self.manipulation_and_wait + self.readout
    }

    /// Budget of one `n_shots` estimation cycle, calculation included.
    pub fn cycle_budget(&self, n_shots: usize) -> T {
        T::from_count(n_shots) * (self.shot_period() + self.calculation)
    }
}

/// `k * step` for `k = 1..=floor(t_max / step)`.
pub fn evolution_schedule<T: Real>(step: T, t_max: T) -> Vec<T> {
    let n = (t_max / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    (1..=n).map(|k| T::from_count(k) * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseySweep<T> {
    pub t_step: T,
    pub t_max: T,
    pub repetitions: usize,
    /// Drive frequency relative to the local oscillator, Hz. The measured
    /// detuning is the noise offset minus this value.
    pub mw_detuning: T,
    /// Sensor pulsing amplitude during manipulation, mV.
    pub epsilon_mv: T,
    /// Start-to-start spacing of rows; defaults to back-to-back rows.
    pub row_period: Option<T>,
}

/// Repeated-Ramsey map: rows are repetitions, columns evolution times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyMap<T> {
    pub evolution_times: Vec<T>,
    pub row_times: Vec<T>,
    /// Reported-↓ probability of every shot.
    pub probability: Vec<Vec<T>>,
    pub outcomes: Vec<Vec<Outcome>>,
}

impl<T: Real> RamseyMap<T> {
    /// Fraction of ↓ outcomes per column.
    pub fn column_down_fraction(&self) -> Vec<T> {
        let rows = T::from_count(self.outcomes.len().max(1));
        (0..self.evolution_times.len())
            .map(|j| {
                let downs = self
                    .outcomes
                    .iter()
                    .filter(|row| row[j] == Outcome::Down)
                    .count();
                T::from_count(downs) / rows
            })
            .collect()
    }

    /// Mean reported-↓ probability per column.
    pub fn column_mean_probability(&self) -> Vec<T> {
        let rows = T::from_count(self.probability.len().max(1));
        (0..self.evolution_times.len())
            .map(|j| self.probability.iter().map(|row| row[j]).sum::<T>() / rows)
            .collect()
    }
}

/// Simulates `repetitions` Ramsey sweeps against a noise stack.
pub fn simulate_repeated_ramsey<T: Real>(
    noise: &NoiseStack<T>,
    params: &QubitParams<T>,
    timing: &ShotTiming<T>,
    sweep: &RamseySweep<T>,
    seed: u64,
) -> Result<RamseyMap<T>, SimError> {
    params.validate()?;
    timing.validate()?;
    check(sweep.t_step > T::zero(), "t_step", "must be > 0")?;
    check(sweep.t_max >= sweep.t_step, "t_max", "must be >= t_step")?;
    check(sweep.repetitions >= 1, "repetitions", "must be >= 1")?;
    let times = evolution_schedule(sweep.t_step, sweep.t_max);
    let shot = timing.shot_period();
    let row_span = shot * T::from_count(times.len());
    let row_period = sweep.row_period.unwrap_or(row_span);
    check(row_period >= row_span, "row_period", "must cover one full row of shots")?;
    let row_times: Vec<T> = (0..sweep.repetitions)
        .map(|i| T::from_count(i) * row_period)
        .collect();
    let last_shot = row_times[row_times.len() - 1] + shot * T::from_count(times.len() - 1);
    if noise.offset_at(last_shot, sweep.epsilon_mv).is_err() {
        return Err(SimError::Duration {
            required_s: (last_shot + shot).to_f64_lossy(),
            available_s: noise.duration().to_f64_lossy(),
        });
    }

    type Row<T> = (Vec<T>, Vec<Outcome>);
    let rows: Result<Vec<Row<T>>, SimError> = row_times
        .par_iter()
        .enumerate()
        .map(|(i, &start)| {
            let mut rng = rng::stream(seed, "ramsey-row", i as u64);
            let mut probs = Vec::with_capacity(times.len());
            let mut outs = Vec::with_capacity(times.len());
            for (j, &t) in times.iter().enumerate() {
                let stamp = start + shot * T::from_count(j);
                let detuning = noise.offset_at(stamp, sweep.epsilon_mv)? - sweep.mw_detuning;
                let p = ramsey_probability(detuning, t, params);
                probs.push(p);
                outs.push(sample_shot(p, &mut rng));
            }
            Ok((probs, outs))
        })
        .collect();
    let (probability, outcomes) = rows?.into_iter().unzip();
    Ok(RamseyMap {
        evolution_times: times,
        row_times,
        probability,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChevronSweep<T> {
    /// Full drive-detuning span, centred on resonance, Hz.
    pub detuning_span: T,
    /// Longest burst, s.
    pub t_max: T,
    pub n_detuning: usize,
    pub n_time: usize,
    /// Noisy shots averaged per cell.
    pub repetitions: usize,
    pub epsilon_mv: T,
}

/// Rabi chevron: rows are drive detunings, columns burst times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChevronMap<T> {
    pub detunings: Vec<T>,
    pub burst_times: Vec<T>,
    /// Ensemble-averaged physical P(↑).
    pub probability: Vec<Vec<T>>,
    /// Fraction of shots reported ↑.
    pub measured_up: Vec<Vec<T>>,
}

/// Simulates a Rabi chevron acquired cell by cell; each cell averages
/// `repetitions` consecutive shots, each at the noise value of its start time.
pub fn simulate_rabi_chevron<T: Real>(
    noise: &NoiseStack<T>,
    params: &QubitParams<T>,
    timing: &ShotTiming<T>,
    sweep: &ChevronSweep<T>,
    seed: u64,
) -> Result<ChevronMap<T>, SimError> {
    params.validate()?;
    timing.validate()?;
    check(sweep.n_detuning >= 2, "n_detuning", "must be >= 2")?;
    check(sweep.n_time >= 2, "n_time", "must be >= 2")?;
    check(sweep.repetitions >= 1, "repetitions", "must be >= 1")?;
    check(sweep.t_max > T::zero(), "t_max", "must be > 0")?;
    check(sweep.detuning_span >= T::zero(), "detuning_span", "must be >= 0")?;

    let half = sweep.detuning_span / T::lit(2.0);
    let detunings: Vec<T> = (0..sweep.n_detuning)
        .map(|i| -half + sweep.detuning_span * T::from_count(i) / T::from_count(sweep.n_detuning - 1))
        .collect();
    let burst_times: Vec<T> = (0..sweep.n_time)
        .map(|j| sweep.t_max * T::from_count(j) / T::from_count(sweep.n_time - 1))
        .collect();
    let shot = timing.shot_period();
    let total_shots = sweep.n_detuning * sweep.n_time * sweep.repetitions;
    let last = shot * T::from_count(total_shots - 1);
    if noise.offset_at(last, sweep.epsilon_mv).is_err() {
        return Err(SimError::Duration {
            required_s: (last + shot).to_f64_lossy(),
            available_s: noise.duration().to_f64_lossy(),
        });
    }

    let cells: Result<Vec<(T, T)>, SimError> = (0..sweep.n_detuning * sweep.n_time)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / sweep.n_time, cell % sweep.n_time);
            let mut rng = rng::stream(seed, "chevron-cell", cell as u64);
            let mut p_sum = T::zero();
            let mut ups = 0usize;
            for r in 0..sweep.repetitions {
                let stamp = shot * T::from_count(cell * sweep.repetitions + r);
                let offset = noise.offset_at(stamp, sweep.epsilon_mv)?;
                let p_up = rabi_probability(
                    params.rabi_frequency,
                    detunings[i] - offset,
                    burst_times[j],
                    params.t2_rabi,
                );
                p_sum = p_sum + p_up;
                let p_report_up = p_up * params.readout_fidelity_up
                    + (T::one() - p_up) * (T::one() - params.readout_fidelity_down);
                if sample_shot(T::one() - p_report_up, &mut rng) == Outcome::Up {
                    ups += 1;
                }
            }
            let reps = T::from_count(sweep.repetitions);
            Ok((p_sum / reps, T::from_count(ups) / reps))
        })
        .collect();
    let cells = cells?;
    let rows = |pick: fn(&(T, T)) -> T| -> Vec<Vec<T>> {
        cells.chunks(sweep.n_time).map(|row| row.iter().map(pick).collect()).collect()
    };
    Ok(ChevronMap {
        probability: rows(|c| c.0),
        measured_up: rows(|c| c.1),
        detunings,
        burst_times,
    })
}
