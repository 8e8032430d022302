//! Grid-based sequential Bayesian estimation of the Ramsey detuning.
//!
//! Each single-shot outcome `r` at evolution time `t` multiplies every bin by
//! `½[1 + r(α + β cos(2π f t + θ))]`, evaluated at the bin centre. Weights are
//! kept as logarithms and renormalized after each update; likelihood factors
//! are clamped to [`LIKELIHOOD_FLOOR`] so that one contradictory shot cannot
//! zero a bin permanently.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubit::ShotRecord;
use crate::scalar::Real;

pub const LIKELIHOOD_FLOOR: f64 = 1e-12;
/// Prior width used once a previous estimate exists, Hz.
pub const DEFAULT_PRIOR_SIGMA: f64 = 50e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid prior: {0}")]
    InvalidPrior(&'static str),
    #[error("invalid likelihood parameters: {0}")]
    InvalidLikelihood(&'static str),
    #[error("posterior degenerated (no finite mass left); estimator must be reset")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridShape<T> {
    pub f_min: T,
    pub f_max: T,
    pub n_bins: usize,
}

impl<T: Real> Default for GridShape<T> {
    /// `[0, 12.5 MHz]` in 5 kHz bins: Nyquist of a 40 ns time step.
    fn default() -> Self {
        Self {
            f_min: T::zero(),
            f_max: T::lit(12.5e6),
            n_bins: 2500,
        }
    }
}

impl<T: Real> GridShape<T> {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.f_min < self.f_max) {
            return Err(EstimatorError::InvalidGrid("f_min must be below f_max"));
        }
        if self.n_bins < 2 {
            return Err(EstimatorError::InvalidGrid("n_bins must be >= 2"));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> T {
        (self.f_max - self.f_min) / T::from_count(self.n_bins)
    }

    pub fn center(&self, i: usize) -> T {
        self.f_min + (T::from_count(i) + T::lit(0.5)) * self.bin_width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorSpec<T> {
    Uniform,
    Gaussian { mean: T, sigma: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodParams<T> {
    pub alpha: T,
    pub beta_vis: T,
    pub theta: T,
}

impl<T: Real> Default for LikelihoodParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::zero(),
            beta_vis: T::one(),
            theta: T::zero(),
        }
    }
}

impl<T: Real> LikelihoodParams<T> {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.beta_vis < T::zero() {
            return Err(EstimatorError::InvalidLikelihood("beta_vis must be >= 0"));
        }
        if self.alpha.abs() + self.beta_vis > T::one() + T::lit(1e-12) {
            return Err(EstimatorError::InvalidLikelihood(
                "|alpha| + beta_vis must not exceed 1",
            ));
        }
        Ok(())
    }
}

/// Unclamped single-shot likelihood `½[1 + r(α + β cos(2π f t + θ))]`.
pub fn likelihood<T: Real>(f: T, evolution_time: T, sign: i8, lk: &LikelihoodParams<T>) -> T {
    let r = if sign >= 0 { T::one() } else { -T::one() };
    let c = (T::TAU() * f * evolution_time + lk.theta).cos();
    T::lit(0.5) * (T::one() + r * (lk.alpha + lk.beta_vis * c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorWarning {
    /// Gaussian mean outside the grid; the prior is the truncated tail.
    MeanOutsideGrid { mean: f64, f_min: f64, f_max: f64 },
}

/// Discretized posterior over candidate detunings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGrid<T> {
    pub shape: GridShape<T>,
    /// Log probability mass per bin, normalized.
    pub log_weights: Vec<T>,
}

/// Builds a normalized prior on `shape`.
pub fn init_prior<T: Real>(
    spec: &PriorSpec<T>,
    shape: &GridShape<T>,
) -> Result<(PosteriorGrid<T>, Option<PriorWarning>), EstimatorError> {
    shape.validate()?;
    let mut warning = None;
    let log_weights = match *spec {
        PriorSpec::Uniform => vec![T::zero(); shape.n_bins],
        PriorSpec::Gaussian { mean, sigma } => {
            if !(sigma > T::zero()) {
                return Err(EstimatorError::InvalidPrior("gaussian sigma must be > 0"));
            }
            if mean < shape.f_min || mean > shape.f_max {
                warning = Some(PriorWarning::MeanOutsideGrid {
                    mean: mean.to_f64_lossy(),
                    f_min: shape.f_min.to_f64_lossy(),
                    f_max: shape.f_max.to_f64_lossy(),
                });
            }
            (0..shape.n_bins)
                .map(|i| {
                    let z = (shape.center(i) - mean) / sigma;
                    -T::lit(0.5) * z * z
                })
                .collect()
        }
    };
    let mut grid = PosteriorGrid {
        shape: *shape,
        log_weights,
    };
    grid.normalize()?;
    Ok((grid, warning))
}

fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

/// Visits `cos(2π f_i t + θ)` for every bin centre using a rotating phasor,
/// re-anchored with an exact evaluation every 64 bins.
fn for_each_cos<T: Real>(shape: &GridShape<T>, t: T, theta: T, mut f: impl FnMut(usize, T)) {
    const ANCHOR: usize = 64;
    let step = T::TAU() * shape.bin_width() * t;
    let (ds, dc) = step.sin_cos();
    let mut c = T::zero();
    let mut s = T::zero();
    for i in 0..shape.n_bins {
        if i % ANCHOR == 0 {
            let phase = T::TAU() * shape.center(i) * t + theta;
            (s, c) = phase.sin_cos();
        } else {
            (c, s) = (c * dc - s * ds, s * dc + c * ds);
        }
        f(i, c);
    }
}

/// Number of clamped likelihood factors whose product cannot underflow.
fn safe_chunk<T: Real>() -> usize {
    let floor_exp = T::min_positive_value().ln() / T::lit(LIKELIHOOD_FLOOR).ln();
    floor_exp.floor().to_usize().unwrap_or(2).saturating_sub(1).max(1)
}

impl<T: Real> PosteriorGrid<T> {
    pub fn n_bins(&self) -> usize {
        self.log_weights.len()
    }

    pub fn bin_width(&self) -> T {
        self.shape.bin_width()
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.n_bins()).map(|i| self.shape.center(i)).collect()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn total_mass(&self) -> T {
        self.log_weights.iter().map(|w| w.exp()).sum()
    }

    fn normalize(&mut self) -> Result<(), EstimatorError> {
        let lse = log_sum_exp(&self.log_weights);
        if !lse.is_finite() {
            return Err(EstimatorError::Degenerate);
        }
        for w in &mut self.log_weights {
            *w = *w - lse;
        }
        Ok(())
    }

    /// Folds one shot into the posterior.
    pub fn update(
        &mut self,
        shot: &ShotRecord<T>,
        lk: &LikelihoodParams<T>,
    ) -> Result<(), EstimatorError> {
        let r = T::lit(f64::from(shot.outcome.sign()));
        let floor = T::lit(LIKELIHOOD_FLOOR);
        let half = T::lit(0.5);
        let weights = &mut self.log_weights;
        for_each_cos(&self.shape, shot.evolution_time, lk.theta, |i, c| {
            let l = half * (T::one() + r * (lk.alpha + lk.beta_vis * c));
            weights[i] = weights[i] + l.max(floor).ln();
        });
        self.normalize()
    }

    /// Folds many shots at once. Equivalent to repeated [`Self::update`]
    /// up to rounding; takes one logarithm per chunk of shots instead of
    /// one per shot.
    pub fn update_batch(
        &mut self,
        shots: &[ShotRecord<T>],
        lk: &LikelihoodParams<T>,
    ) -> Result<(), EstimatorError> {
        let floor = T::lit(LIKELIHOOD_FLOOR);
        let half = T::lit(0.5);
        let mut product = vec![T::one(); self.n_bins()];
        for chunk in shots.chunks(safe_chunk::<T>()) {
            product.iter_mut().for_each(|p| *p = T::one());
            for shot in chunk {
                let r = T::lit(f64::from(shot.outcome.sign()));
                for_each_cos(&self.shape, shot.evolution_time, lk.theta, |i, c| {
                    let l = half * (T::one() + r * (lk.alpha + lk.beta_vis * c));
                    product[i] = product[i] * l.max(floor);
                });
            }
            for (w, p) in self.log_weights.iter_mut().zip(&product) {
                *w = *w + p.ln();
            }
        }
        self.normalize()
    }

    /// Centre of the most probable bin; ties go to the lowest frequency.
    pub fn estimate(&self) -> T {
        let mut best = 0;
        for (i, &w) in self.log_weights.iter().enumerate() {
            if w > self.log_weights[best] {
                best = i;
            }
        }
        self.shape.center(best)
    }

    pub fn mean(&self) -> T {
        self.log_weights
            .iter()
            .enumerate()
            .map(|(i, w)| w.exp() * self.shape.center(i))
            .sum()
    }

    /// Mass-weighted standard deviation of bin centres.
    pub fn sigma(&self) -> T {
        let m = self.mean();
        let var: T = self
            .log_weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let d = self.shape.center(i) - m;
                w.exp() * d * d
            })
            .sum();
        var.max(T::zero()).sqrt()
    }
}

/// Pure form of [`PosteriorGrid::update`].
pub fn bayes_update<T: Real>(
    grid: &PosteriorGrid<T>,
    shot: &ShotRecord<T>,
    lk: &LikelihoodParams<T>,
) -> Result<PosteriorGrid<T>, EstimatorError> {
    let mut next = grid.clone();
    next.update(shot, lk)?;
    Ok(next)
}

pub fn estimate<T: Real>(grid: &PosteriorGrid<T>) -> T {
    grid.estimate()
}

pub fn posterior_sigma<T: Real>(grid: &PosteriorGrid<T>) -> T {
    grid.sigma()
}

/// Result of one estimation cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub f_est: T,
    pub sigma: T,
    pub prior_warning: Option<PriorWarning>,
    /// Host time spent in the Bayesian update; not part of any simulated clock.
    pub compute_time: Duration,
}

/// Estimator configuration shared by every cycle of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T> {
    pub grid: GridShape<T>,
    pub likelihood: LikelihoodParams<T>,
    pub prior_sigma: T,
}

impl<T: Real> Default for EstimatorConfig<T> {
    fn default() -> Self {
        Self {
            grid: GridShape::default(),
            likelihood: LikelihoodParams::default(),
            prior_sigma: T::lit(DEFAULT_PRIOR_SIGMA),
        }
    }
}

impl<T: Real> EstimatorConfig<T> {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        self.grid.validate()?;
        self.likelihood.validate()?;
        if !(self.prior_sigma > T::zero()) {
            return Err(EstimatorError::InvalidPrior("prior sigma must be > 0"));
        }
        Ok(())
    }

    /// Uniform prior without a previous estimate, otherwise a Gaussian of
    /// width `prior_sigma` centred on it.
    pub fn prior(&self, previous: Option<T>) -> PriorSpec<T> {
        match previous {
            None => PriorSpec::Uniform,
            Some(mean) => PriorSpec::Gaussian {
                mean,
                sigma: self.prior_sigma,
            },
        }
    }

    pub fn run(
        &self,
        shots: &[ShotRecord<T>],
        previous: Option<T>,
    ) -> Result<Estimate<T>, EstimatorError> {
        let started = Instant::now();
        let (mut grid, prior_warning) = init_prior(&self.prior(previous), &self.grid)?;
        grid.update_batch(shots, &self.likelihood)?;
        Ok(Estimate {
            f_est: grid.estimate(),
            sigma: grid.sigma(),
            prior_warning,
            compute_time: started.elapsed(),
        })
    }
}
