//! Probe/operate frequency locking on the simulated qubit.
//!
//! Each cycle collects `n_shots` Ramsey outcomes at `t_k = k * t_step`,
//! estimates the detuning, and (in closed mode) shifts the drive so the next
//! cycle measures `f_target` again. The remainder of the cycle budget is the
//! operation phase: dead time, or Ramsey shots at the current drive frequency.
//!
//! Frequencies are relative to the local oscillator. The measured detuning of
//! a shot is the qubit offset minus the drive offset `mw_detuning`; the drive
//! starts at `-f_target`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{EstimatorConfig, EstimatorError};
use crate::noise::{NoiseError, NoiseStack};
use crate::qubit::{
    evolution_schedule, ramsey_probability, sample_shot, Outcome, QubitParams, ShotRecord,
    ShotTiming, SimError,
};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("invalid feedback configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

impl From<NoiseError> for FeedbackError {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::Exhausted {
                required_s,
                available_s,
            } => FeedbackError::Sim(SimError::Duration {
                required_s,
                available_s,
            }),
            other => FeedbackError::Sim(SimError::Noise(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopMode {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperationPhase<T> {
    /// Noise keeps evolving; nothing is measured.
    DeadTime,
    /// Ramsey shots at the current drive frequency, cycling through
    /// `t = step, 2 step, ..., n_points * step` across cycles.
    Ramsey { t_step: T, n_points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig<T> {
    pub n_shots: usize,
    pub t_step: T,
    /// Longest evolution time; `None` means `n_shots * t_step`.
    pub t_max: Option<T>,
    pub timing: ShotTiming<T>,
    pub f_target: T,
    pub mode: LoopMode,
    /// Sensor pulsing amplitude during manipulation, mV.
    pub passive_epsilon_mv: T,
    pub n_cycles: usize,
    pub estimator: EstimatorConfig<T>,
    /// Cycle length; `None` means `timing.cycle_budget(n_shots)`.
    pub cycle_budget: Option<T>,
    pub operation: OperationPhase<T>,
}

impl<T: Real> Default for FeedbackConfig<T> {
    fn default() -> Self {
        Self {
            n_shots: 100,
            t_step: T::lit(40e-9),
            t_max: None,
            timing: ShotTiming::default(),
            f_target: T::lit(2e6),
            mode: LoopMode::Closed,
            passive_epsilon_mv: T::lit(-6.0),
            n_cycles: 1,
            estimator: EstimatorConfig::default(),
            cycle_budget: None,
            operation: OperationPhase::DeadTime,
        }
    }
}

impl<T: Real> FeedbackConfig<T> {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        let bad = |m: &str| Err(FeedbackError::InvalidConfig(m.to_string()));
        if self.n_shots < 1 {
            return bad("n_shots must be >= 1");
        }
        if !(self.t_step > T::zero()) {
            return bad("t_step must be > 0");
        }
        if self.n_cycles < 1 {
            return bad("n_cycles must be >= 1");
        }
        if let Some(t) = self.t_max {
            if !(t > T::zero()) {
                return bad("t_max must be > 0");
            }
        }
        if let OperationPhase::Ramsey { t_step, n_points } = self.operation {
            if !(t_step > T::zero()) || n_points == 0 {
                return bad("operation Ramsey needs t_step > 0 and n_points >= 1");
            }
        }
        self.timing.validate()?;
        self.estimator.validate()?;
        if self.probe_duration() > self.budget() {
            return bad("probe phase does not fit in the cycle budget");
        }
        Ok(())
    }

    /// Evolution times of the probe shots.
    pub fn schedule(&self) -> Vec<T> {
        match self.t_max {
            None => (1..=self.n_shots)
                .map(|k| T::from_count(k) * self.t_step)
                .collect(),
            Some(t_max) => {
                let step = t_max / T::from_count(self.n_shots);
                (1..=self.n_shots).map(|k| T::from_count(k) * step).collect()
            }
        }
    }

    pub fn budget(&self) -> T {
        self.cycle_budget
            .unwrap_or_else(|| self.timing.cycle_budget(self.n_shots))
    }

    /// Shots plus one estimator computation.
    pub fn probe_duration(&self) -> T {
        T::from_count(self.n_shots) * self.timing.shot_period() + self.timing.calculation
    }

    /// Trace span needed for a full run.
    pub fn required_duration(&self) -> T {
        T::from_count(self.n_cycles) * self.budget()
    }
}

/// Simulated wall clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock<T> {
    pub now: T,
}

impl<T: Real> SimClock<T> {
    pub fn new(start: T) -> Self {
        Self { now: start }
    }

    pub fn advance(&mut self, by: T) {
        debug_assert!(by >= T::zero());
        self.now = self.now + by;
    }
}

/// `f_mw + (f_est - f_target)`: the drive follows the qubit so the next
/// measured detuning is back at `f_target`.
pub fn apply_correction<T: Real>(f_mw: T, f_est: T, f_target: T) -> T {
    f_mw + (f_est - f_target)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult<T> {
    /// `None` when the posterior degenerated.
    pub f_est: Option<T>,
    pub posterior_sigma: T,
    pub shots: Vec<ShotRecord<T>>,
    /// Mean true measured detuning over the probe shots.
    pub true_mean_detuning: T,
    pub compute_time: Duration,
}

/// Runs one probe phase starting at `clock.now` and advances the clock by
/// the shots plus one calculation time.
#[allow(clippy::too_many_arguments)]
pub fn run_probe<T: Real>(
    noise: &NoiseStack<T>,
    params: &QubitParams<T>,
    cfg: &FeedbackConfig<T>,
    previous_estimate: Option<T>,
    mw_detuning: T,
    clock: &mut SimClock<T>,
    rng: &mut rng::StreamRng,
) -> Result<ProbeResult<T>, FeedbackError> {
    let schedule = cfg.schedule();
    let mut shots = Vec::with_capacity(schedule.len());
    let mut truth = T::zero();
    for &t in &schedule {
        let offset = noise.offset_at(clock.now, cfg.passive_epsilon_mv)?;
        let detuning = offset - mw_detuning;
        truth = truth + detuning;
        let outcome = sample_shot(ramsey_probability(detuning, t, params), rng);
        shots.push(ShotRecord {
            evolution_time: t,
            outcome,
            timestamp: clock.now,
            mw_detuning,
        });
        clock.advance(cfg.timing.shot_period());
    }
    clock.advance(cfg.timing.calculation);
    let true_mean_detuning = truth / T::from_count(schedule.len());
    match cfg.estimator.run(&shots, previous_estimate) {
        Ok(est) => Ok(ProbeResult {
            f_est: Some(est.f_est),
            posterior_sigma: est.sigma,
            shots,
            true_mean_detuning,
            compute_time: est.compute_time,
        }),
        Err(EstimatorError::Degenerate) => Ok(ProbeResult {
            f_est: None,
            posterior_sigma: T::nan(),
            shots,
            true_mean_detuning,
            compute_time: Duration::ZERO,
        }),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleLog<T> {
    pub cycle_index: usize,
    pub start_time: T,
    /// Estimated measured detuning; NaN when estimation failed.
    pub f_est: T,
    pub correction_applied: T,
    /// Simulation-only ground truth.
    pub true_mean_detuning: T,
    /// Drive offset used during this cycle's probe.
    pub mw_detuning: T,
    pub posterior_sigma: T,
    pub estimation_failed: bool,
    pub shots: Vec<ShotRecord<T>>,
    pub compute_time: Duration,
}

/// Averaged operation-phase Ramsey data: one entry per evolution time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperationRamsey<T> {
    pub evolution_times: Vec<T>,
    pub downs: Vec<usize>,
    pub counts: Vec<usize>,
}

impl<T: Real> OperationRamsey<T> {
    pub fn down_fraction(&self) -> Vec<T> {
        self.downs
            .iter()
            .zip(&self.counts)
            .map(|(&d, &n)| T::from_count(d) / T::from_count(n.max(1)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun<T> {
    pub cycles: Vec<CycleLog<T>>,
    pub operation: Option<OperationRamsey<T>>,
    /// Simulated end time, `n_cycles * budget`.
    pub end_time: T,
}

impl<T: Real> ExperimentRun<T> {
    /// `f_est - f_target` per cycle, skipping failed estimates.
    pub fn residuals(&self, f_target: T) -> Vec<T> {
        self.cycles
            .iter()
            .filter(|c| !c.estimation_failed)
            .map(|c| c.f_est - f_target)
            .collect()
    }

    pub fn estimates(&self) -> Vec<T> {
        self.cycles
            .iter()
            .filter(|c| !c.estimation_failed)
            .map(|c| c.f_est)
            .collect()
    }
}

/// Runs `cfg.n_cycles` probe/operate cycles. Deterministic in `seed`.
pub fn run_experiment<T: Real>(
    cfg: &FeedbackConfig<T>,
    noise: &NoiseStack<T>,
    params: &QubitParams<T>,
    seed: u64,
) -> Result<ExperimentRun<T>, FeedbackError> {
    cfg.validate()?;
    params.validate()?;
    let budget = cfg.budget();
    let required = cfg.required_duration();
    if noise.duration() < required * (T::one() - T::lit(1e-9)) {
        return Err(SimError::Duration {
            required_s: required.to_f64_lossy(),
            available_s: noise.duration().to_f64_lossy(),
        }
        .into());
    }

    let mut operation = match cfg.operation {
        OperationPhase::DeadTime => None,
        OperationPhase::Ramsey { t_step, n_points } => Some(OperationRamsey {
            evolution_times: evolution_schedule(t_step, t_step * T::from_count(n_points)),
            downs: vec![0; n_points],
            counts: vec![0; n_points],
        }),
    };
    let mut op_index = 0usize;

    let mut mw = -cfg.f_target;
    let mut previous: Option<T> = None;
    let mut cycles = Vec::with_capacity(cfg.n_cycles);
    for c in 0..cfg.n_cycles {
        let start = T::from_count(c) * budget;
        let mut clock = SimClock::new(start);
        let mut shot_rng = rng::stream(seed, "probe-shots", c as u64);
        let probe = run_probe(noise, params, cfg, previous, mw, &mut clock, &mut shot_rng)?;
        let probe_mw = mw;
        let (f_est, correction) = match probe.f_est {
            Some(f_est) => {
                let correction = match cfg.mode {
                    LoopMode::Closed => f_est - cfg.f_target,
                    LoopMode::Open => T::zero(),
                };
                if cfg.mode == LoopMode::Closed {
                    mw = apply_correction(mw, f_est, cfg.f_target);
                }
                previous = Some(f_est - correction);
                (f_est, correction)
            }
            None => {
                previous = None;
                (T::nan(), T::zero())
            }
        };

        if let Some(op) = operation.as_mut() {
            let end = start + budget;
            let mut op_rng = rng::stream(seed, "operation-shots", c as u64);
            while clock.now + cfg.timing.shot_period() <= end + budget * T::lit(1e-12) {
                let k = op_index % op.evolution_times.len();
                let detuning = noise.offset_at(clock.now, cfg.passive_epsilon_mv)? - mw;
                let p = ramsey_probability(detuning, op.evolution_times[k], params);
                if sample_shot(p, &mut op_rng) == Outcome::Down {
                    op.downs[k] += 1;
                }
                op.counts[k] += 1;
                op_index += 1;
                clock.advance(cfg.timing.shot_period());
            }
        }

        cycles.push(CycleLog {
            cycle_index: c,
            start_time: start,
            f_est,
            correction_applied: correction,
            true_mean_detuning: probe.true_mean_detuning,
            mw_detuning: probe_mw,
            posterior_sigma: probe.posterior_sigma,
            estimation_failed: probe.f_est.is_none(),
            shots: probe.shots,
            compute_time: probe.compute_time,
        });
    }
    Ok(ExperimentRun {
        cycles,
        operation,
        end_time: T::from_count(cfg.n_cycles) * budget,
    })
}
