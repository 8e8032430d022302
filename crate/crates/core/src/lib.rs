//! Transduced-noise toolkit for a drifting-frequency spin qubit.
//!
//! The crate synthesizes qubit-frequency noise ([`noise`]), simulates
//! single-shot Ramsey and Rabi measurements against it ([`qubit`]), tracks
//! the frequency with a grid Bayesian estimator ([`estimator`]) inside a
//! probe/operate locking loop ([`feedback`]), analyses the resulting series
//! ([`spectra`]) and computes the gate-set goodness-of-fit statistic
//! ([`markovianity`]).
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common types to one precision.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimator;
pub mod feedback;
pub mod io;
pub mod markovianity;
pub mod noise;
pub mod numerics;
pub mod qubit;
pub mod rng;
pub mod scalar;
pub mod spectra;
pub mod units;

pub use scalar::Real;

pub type NoiseTrace = noise::NoiseTrace<f64>;
pub type NoiseTraceF32 = noise::NoiseTrace<f32>;
pub type NoiseStack = noise::NoiseStack<f64>;
pub type PowerLawSpec = noise::PowerLawSpec<f64>;
pub type PowerLawSpecF32 = noise::PowerLawSpec<f32>;
pub type QubitParams = qubit::QubitParams<f64>;
pub type ShotRecord = qubit::ShotRecord<f64>;
pub type ShotTiming = qubit::ShotTiming<f64>;
pub type PosteriorGrid = estimator::PosteriorGrid<f64>;
pub type PosteriorGridF32 = estimator::PosteriorGrid<f32>;
pub type GridShape = estimator::GridShape<f64>;
pub type FeedbackConfig = feedback::FeedbackConfig<f64>;
pub type CycleLog = feedback::CycleLog<f64>;
pub type PsdEstimate = spectra::PsdEstimate<f64>;
pub type PsdEstimateF32 = spectra::PsdEstimate<f32>;
pub type PowerLawFit = spectra::PowerLawFit<f64>;
pub type DiffusionFit = spectra::DiffusionFit<f64>;
pub type DecoherencePrediction = spectra::DecoherencePrediction<f64>;
pub type CircuitRecord = markovianity::CircuitRecord<f64>;
pub type ViolationReport = markovianity::ViolationReport<f64>;
