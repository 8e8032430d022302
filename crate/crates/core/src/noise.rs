//! Stochastic frequency-drift processes.
//!
//! A [`NoiseTrace`] is a uniformly sampled series of qubit-frequency offsets
//! in Hz. Power-law traces are built by spectral shaping: complex Gaussian
//! amplitudes with variance set by the target one-sided PSD are placed on the
//! FFT grid (DC always zero) and inverse transformed. Drift slower than the
//! trace duration is not synthesized; use [`add_static_offset`] for it.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("invalid {field}: {constraint}")]
    InvalidSpec {
        field: &'static str,
        constraint: &'static str,
    },
    #[error("empty synthesis band: {bound} (lower {lower} Hz, upper {upper} Hz)")]
    EmptyBand {
        bound: &'static str,
        lower: f64,
        upper: f64,
    },
    #[error("cannot compose traces: {0}")]
    Composition(String),
    #[error("noise trace too short: time {required_s} s requested but trace covers {available_s} s")]
    Exhausted { required_s: f64, available_s: f64 },
}

fn check(ok: bool, field: &'static str, constraint: &'static str) -> Result<(), NoiseError> {
    if ok {
        Ok(())
    } else {
        Err(NoiseError::InvalidSpec { field, constraint })
    }
}

/// One-sided spectrum `S(f) = amplitude * f^-exponent` on `[f_low, f_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSpec<T> {
    /// Hz²/Hz at 1 Hz.
    pub amplitude: T,
    pub exponent: T,
    pub f_low: T,
    pub f_high: T,
}

impl<T: Real> PowerLawSpec<T> {
    pub fn new(amplitude: T, exponent: T, f_low: T, f_high: T) -> Result<Self, NoiseError> {
        let spec = Self {
            amplitude,
            exponent,
            f_low,
            f_high,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        check(self.amplitude >= T::zero(), "amplitude_A", "must be >= 0")?;
        check(
            self.exponent >= T::zero() && self.exponent <= T::lit(3.0),
            "exponent_beta",
            "must lie in [0, 3]",
        )?;
        check(self.f_low > T::zero(), "f_low", "must be > 0")?;
        check(self.f_low < self.f_high, "f_high", "must exceed f_low")
    }

    /// The power law itself, ignoring the synthesis band.
    /// `amplitude * int_lo^hi f^-exponent df`, logarithmic at exponent 1.
    pub fn integrated(&self, lo: T, hi: T) -> T {
        let g = T::one() - self.exponent;
        let ratio_ln = (hi / lo).ln();
        if g.abs() < T::lit(1e-12) {
            return self.amplitude * ratio_ln;
        }
        // lo^g * expm1(g ln(hi/lo)) / g stays accurate as exponent -> 1.
        self.amplitude * lo.powf(g) * (g * ratio_ln).exp_m1() / g
    }

    pub fn density(&self, f: T) -> T {
        self.amplitude * f.powf(-self.exponent)
    }
}

/// Symmetric two-state fluctuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphSpec<T> {
    /// Hz; the trace takes values ±amplitude.
    pub amplitude: T,
    /// Mean transition rate, Hz.
    pub switching_rate: T,
}

impl<T: Real> TelegraphSpec<T> {
    pub fn validate(&self) -> Result<(), NoiseError> {
        check(self.amplitude >= T::zero(), "amplitude", "must be >= 0")?;
        check(self.switching_rate > T::zero(), "switching_rate", "must be > 0")
    }
}

/// Coulomb-periodic coupling of the charge sensor to the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionModel<T> {
    pub peak_gain: T,
    pub period_mv: T,
    pub phase_mv: T,
}

impl<T: Real> Default for BackactionModel<T> {
    fn default() -> Self {
        Self {
            peak_gain: T::one(),
            period_mv: T::lit(12.0),
            phase_mv: T::zero(),
        }
    }
}

impl<T: Real> BackactionModel<T> {
    pub fn validate(&self) -> Result<(), NoiseError> {
        check(self.peak_gain >= T::zero(), "peak_gain", "must be >= 0")?;
        check(self.period_mv > T::zero(), "period_mV", "must be > 0")
    }
}

/// Raised-cosine sensor gain at pulsing amplitude `epsilon_mv`: maximal at
/// `phase_mv`, zero half a period away.
pub fn backaction_gain<T: Real>(epsilon_mv: T, model: &BackactionModel<T>) -> T {
    let cycles = (epsilon_mv - model.phase_mv) / model.period_mv;
    // Reducing to the fractional part makes the gain exactly periodic.
    let frac = cycles - cycles.floor();
    model.peak_gain * (T::one() + (T::TAU() * frac).cos()) / T::lit(2.0)
}

/// Micromagnet position-to-frequency conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransductionSpec<T> {
    /// mT/nm.
    pub gradient: T,
    /// MHz/mT.
    pub gyromagnetic_ratio: T,
}

impl<T: Real> Default for TransductionSpec<T> {
    fn default() -> Self {
        Self {
            gradient: T::lit(0.184),
            gyromagnetic_ratio: T::lit(28.025),
        }
    }
}

impl<T: Real> TransductionSpec<T> {
    pub fn validate(&self) -> Result<(), NoiseError> {
        check(self.gradient >= T::zero(), "gradient", "must be >= 0")?;
        check(
            self.gyromagnetic_ratio > T::zero(),
            "gyromagnetic_ratio",
            "must be > 0",
        )
    }

    /// Field shift in mT for a displacement in nm.
    pub fn field_shift(&self, displacement_nm: T) -> T {
        displacement_nm * self.gradient
    }

    /// Hz per nm.
    pub fn hz_per_nm(&self) -> T {
        self.gradient * self.gyromagnetic_ratio * T::lit(1e6)
    }
}

/// Uniformly sampled frequency-offset series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace<T> {
    /// Sample period, s.
    pub dt: T,
    /// Hz (nm for position traces fed to [`transduce`]).
    pub samples: Vec<T>,
    pub seed: u64,
    pub descriptor: String,
}

impl<T: Real> NoiseTrace<T> {
    pub fn new(
        dt: T,
        samples: Vec<T>,
        seed: u64,
        descriptor: impl Into<String>,
    ) -> Result<Self, NoiseError> {
        check(dt > T::zero(), "dt", "must be > 0")?;
        check(!samples.is_empty(), "samples", "must be non-empty")?;
        check(
            samples.iter().all(|s| s.is_finite()),
            "samples",
            "must be finite",
        )?;
        Ok(Self {
            dt,
            samples,
            seed,
            descriptor: descriptor.into(),
        })
    }

    pub fn zeros(dt: T, len: usize) -> Self {
        Self {
            dt,
            samples: vec![T::zero(); len.max(1)],
            seed: 0,
            descriptor: "zero".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time span covered, `len * dt`.
    pub fn duration(&self) -> T {
        self.dt * T::from_count(self.samples.len())
    }

    /// Zero-order-hold lookup of the sample active at `time`.
    pub fn value_at(&self, time: T) -> Result<T, NoiseError> {
        let pos = time / self.dt + T::lit(1e-6);
        let idx = if pos > T::zero() {
            pos.floor().to_usize().unwrap_or(usize::MAX)
        } else {
            0
        };
        self.samples
            .get(idx)
            .copied()
            .ok_or_else(|| NoiseError::Exhausted {
                required_s: time.to_f64_lossy(),
                available_s: self.duration().to_f64_lossy(),
            })
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * factor).collect(),
            ..self.clone()
        }
    }
}

fn sample_count<T: Real>(duration: T, dt: T) -> usize {
    (duration / dt).round().to_usize().unwrap_or(0)
}

/// Inclusive synthesis band `[max(f_low, 1/duration), min(f_high, 1/(2 dt))]`.
pub fn synthesis_band<T: Real>(
    spec: &PowerLawSpec<T>,
    duration: T,
    dt: T,
) -> Result<(T, T), NoiseError> {
    let rayleigh = T::one() / duration;
    let nyquist = T::one() / (T::lit(2.0) * dt);
    let lower = spec.f_low.max(rayleigh);
    let upper = spec.f_high.min(nyquist);
    if lower > upper {
        let bound = if spec.f_low > nyquist {
            "f_low above Nyquist frequency 1/(2 dt)"
        } else if rayleigh > spec.f_high {
            "f_high below resolution 1/duration"
        } else {
            "1/duration above Nyquist frequency 1/(2 dt)"
        };
        return Err(NoiseError::EmptyBand {
            bound,
            lower: lower.to_f64_lossy(),
            upper: upper.to_f64_lossy(),
        });
    }
    Ok((lower, upper))
}

/// Zero-mean Gaussian trace with one-sided PSD `spec.density` inside the
/// synthesis band and zero outside it.
pub fn synthesize_powerlaw<T: Real>(
    spec: &PowerLawSpec<T>,
    duration: T,
    dt: T,
    seed: u64,
) -> Result<NoiseTrace<T>, NoiseError> {
    spec.validate()?;
    check(dt > T::zero(), "dt", "must be > 0")?;
    check(duration >= T::lit(2.0) * dt, "duration", "must be >= 2 dt")?;
    let n = sample_count(duration, dt).max(2);
    let span = dt * T::from_count(n);
    let (lower, upper) = synthesis_band(spec, span, dt)?;
    let df = T::one() / span;
    let half = n / 2;
    if !(upper > lower) {
        return Err(NoiseError::EmptyBand {
            bound: "band edges coincide",
            lower: lower.to_f64_lossy(),
            upper: upper.to_f64_lossy(),
        });
    }

    let mut rng = rng::stream(seed, "powerlaw", 0);
    let nf = T::from_count(n);
    let mut spectrum = vec![Complex::new(T::zero(), T::zero()); n];
    for k in 1..=half {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let f = df * T::from_count(k);
        if spec.amplitude == T::zero() {
            continue;
        }
        // Each bin carries the exact band integral over its own extent, so
        // the trace variance equals the band integral of the law.
        let lo = (f - df / T::lit(2.0)).max(lower);
        let hi = if 2 * k == n { f } else { f + df / T::lit(2.0) }.min(upper);
        if !(hi > lo) {
            continue;
        }
        let power = spec.integrated(lo, hi);
        if 2 * k == n {
            // Nyquist bin is real and carries the full bin variance.
            spectrum[k] = Complex::new(T::lit(re) * power.sqrt() * nf, T::zero());
        } else {
            let scale = (power / T::lit(4.0)).sqrt() * nf;
            let c = Complex::new(T::lit(re) * scale, T::lit(im) * scale);
            spectrum[k] = c;
            spectrum[n - k] = c.conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let samples = spectrum.iter().map(|c| c.re / nf).collect();
    NoiseTrace::new(
        dt,
        samples,
        seed,
        format!(
            "powerlaw(A={} Hz^2/Hz, beta={}, band=[{}, {}] Hz)",
            spec.amplitude, spec.exponent, lower, upper
        ),
    )
}

/// Random telegraph noise with exponential dwell times.
pub fn synthesize_telegraph<T: Real>(
    spec: &TelegraphSpec<T>,
    duration: T,
    dt: T,
    seed: u64,
) -> Result<NoiseTrace<T>, NoiseError> {
    spec.validate()?;
    check(dt > T::zero(), "dt", "must be > 0")?;
    check(duration >= dt, "duration", "must be >= dt")?;
    let n = sample_count(duration, dt).max(1);
    let mut rng = rng::stream(seed, "telegraph", 0);
    let dwell = Exp::new(spec.switching_rate.to_f64_lossy()).map_err(|_| {
        NoiseError::InvalidSpec {
            field: "switching_rate",
            constraint: "must be > 0",
        }
    })?;
    let mut state = if rng.random::<bool>() { T::one() } else { -T::one() };
    let mut next_switch: f64 = dwell.sample(&mut rng);
    let dt64 = dt.to_f64_lossy();
    let samples = (0..n)
        .map(|j| {
            let t = j as f64 * dt64;
            while next_switch <= t {
                state = -state;
                next_switch += dwell.sample(&mut rng);
            }
            state * spec.amplitude
        })
        .collect();
    NoiseTrace::new(
        dt,
        samples,
        seed,
        format!(
            "telegraph(amplitude={} Hz, rate={} Hz)",
            spec.amplitude, spec.switching_rate
        ),
    )
}

/// Independent Gaussian samples of standard deviation `sigma`.
pub fn synthesize_white<T: Real>(
    sigma: T,
    duration: T,
    dt: T,
    seed: u64,
) -> Result<NoiseTrace<T>, NoiseError> {
    check(sigma >= T::zero(), "sigma", "must be >= 0")?;
    check(dt > T::zero(), "dt", "must be > 0")?;
    check(duration >= dt, "duration", "must be >= dt")?;
    let n = sample_count(duration, dt).max(1);
    let mut rng = rng::stream(seed, "white", 0);
    let samples = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z) * sigma
        })
        .collect();
    NoiseTrace::new(dt, samples, seed, format!("white(sigma={sigma} Hz)"))
}

/// Adds one Gaussian offset of standard deviation `sigma` to every sample,
/// standing in for drift slower than the trace duration.
pub fn add_static_offset<T: Real>(trace: &NoiseTrace<T>, sigma: T, seed: u64) -> NoiseTrace<T> {
    let mut rng = rng::stream(seed, "static-offset", 0);
    let z: f64 = StandardNormal.sample(&mut rng);
    let offset = T::lit(z) * sigma;
    NoiseTrace {
        samples: trace.samples.iter().map(|&s| s + offset).collect(),
        descriptor: format!("{}+static(sigma={} Hz)", trace.descriptor, sigma),
        ..trace.clone()
    }
}

/// Converts a displacement trace in nm to a frequency trace in Hz.
pub fn transduce<T: Real>(
    position: &NoiseTrace<T>,
    spec: &TransductionSpec<T>,
) -> Result<NoiseTrace<T>, NoiseError> {
    spec.validate()?;
    let k = spec.hz_per_nm();
    Ok(NoiseTrace {
        samples: position.samples.iter().map(|&x| x * k).collect(),
        ..position.clone()
    })
}

/// Pointwise sum of traces sharing `dt` and length.
pub fn compose<T: Real>(traces: &[NoiseTrace<T>]) -> Result<NoiseTrace<T>, NoiseError> {
    let first = traces
        .first()
        .ok_or_else(|| NoiseError::Composition("no traces given".into()))?;
    let mut samples = vec![T::zero(); first.len()];
    for t in traces {
        if t.dt != first.dt {
            return Err(NoiseError::Composition(format!(
                "dt mismatch: {} s vs {} s",
                t.dt, first.dt
            )));
        }
        if t.len() != first.len() {
            return Err(NoiseError::Composition(format!(
                "length mismatch: {} vs {} samples",
                t.len(),
                first.len()
            )));
        }
        for (acc, &s) in samples.iter_mut().zip(&t.samples) {
            *acc = *acc + s;
        }
    }
    let descriptor = traces
        .iter()
        .map(|t| t.descriptor.as_str())
        .collect::<Vec<_>>()
        .join(" + ");
    NoiseTrace::new(first.dt, samples, first.seed, descriptor)
}

/// Qubit-frequency noise as seen by the qubit: a base trace plus an optional
/// sensor-backaction component whose weight depends on the sensor operating
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStack<T> {
    pub base: NoiseTrace<T>,
    pub backaction: Option<NoiseTrace<T>>,
    pub backaction_model: BackactionModel<T>,
}

impl<T: Real> NoiseStack<T> {
    pub fn new(base: NoiseTrace<T>) -> Self {
        Self {
            base,
            backaction: None,
            backaction_model: BackactionModel::default(),
        }
    }

    pub fn with_backaction(mut self, trace: NoiseTrace<T>, model: BackactionModel<T>) -> Self {
        self.backaction = Some(trace);
        self.backaction_model = model;
        self
    }

    /// Frequency offset at `time` with the sensor pulsed by `epsilon_mv`.
    pub fn offset_at(&self, time: T, epsilon_mv: T) -> Result<T, NoiseError> {
        let mut v = self.base.value_at(time)?;
        if let Some(b) = &self.backaction {
            v = v + backaction_gain(epsilon_mv, &self.backaction_model) * b.value_at(time)?;
        }
        Ok(v)
    }

    /// Time span over which every component is defined.
    pub fn duration(&self) -> T {
        let d = self.base.duration();
        self.backaction.as_ref().map_or(d, |b| d.min(b.duration()))
    }
}

/// Telegraph-plus-white sensor backaction, before gain weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionNoise<T> {
    pub telegraph: TelegraphSpec<T>,
    pub white_sigma: T,
}

impl<T: Real> BackactionNoise<T> {
    pub fn synthesize(&self, duration: T, dt: T, seed: u64) -> Result<NoiseTrace<T>, NoiseError> {
        let rtn = synthesize_telegraph(&self.telegraph, duration, dt, rng::derive_seed(seed, "backaction-rtn", 0))?;
        let white = synthesize_white(self.white_sigma, duration, dt, rng::derive_seed(seed, "backaction-white", 0))?;
        let mut sum = compose(&[rtn, white])?;
        sum.seed = seed;
        Ok(sum)
    }
}
