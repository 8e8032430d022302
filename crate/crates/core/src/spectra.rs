//! Noise spectroscopy: PSD estimation and power-law fits, increment-variance
//! diffusion fits, the Ramsey filter function and decoherence integral, and
//! Gaussian-decay fits of Ramsey fringes.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::PowerLawSpec;
use crate::numerics::{self, NumericError};
use crate::scalar::{fit_line, mean, sinc, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("series too short: {0}")]
    TooShort(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("statistics error: {0}")]
    Statistics(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SpectraError> {
    Err(SpectraError::InvalidArgument(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdMethod {
    /// Single full-length periodogram.
    Periodogram,
    /// Mean of periodograms of contiguous, non-overlapping segments.
    AveragedSegments,
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate<T> {
    /// Hz, starting at 0 (DC) and strictly increasing.
    pub freqs: Vec<T>,
    /// Hz²/Hz for a series in Hz.
    pub power: Vec<T>,
    pub method: PsdMethod,
    pub n_segments: usize,
    pub dt: T,
}

fn periodogram<T: Real>(segment: &[T], dt: T, planner: &mut FftPlanner<T>) -> Vec<T> {
    let n = segment.len();
    let m = mean(segment).unwrap_or_else(T::zero);
    let mut buf: Vec<Complex<T>> = segment
        .iter()
        .map(|&x| Complex::new(x - m, T::zero()))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let scale = dt / T::from_count(n);
    (0..=n / 2)
        .map(|k| {
            let p = buf[k].norm_sqr() * scale;
            if k == 0 || 2 * k == n {
                p
            } else {
                p * T::lit(2.0)
            }
        })
        .collect()
}

/// Estimates the one-sided PSD of `series` sampled every `dt`.
///
/// The mean of each segment is removed, so the DC bin is zero. With one
/// segment, `sum(power) * df` equals the population variance exactly.
pub fn estimate_psd<T: Real>(
    series: &[T],
    dt: T,
    method: PsdMethod,
    n_segments: usize,
) -> Result<PsdEstimate<T>, SpectraError> {
    if !(dt > T::zero()) {
        return invalid("dt must be > 0");
    }
    let n_segments = match method {
        PsdMethod::Periodogram => 1,
        PsdMethod::AveragedSegments => n_segments.max(1),
    };
    if series.len() < 2 * n_segments {
        return Err(SpectraError::TooShort(format!(
            "{} samples cannot form {} segments of length >= 2",
            series.len(),
            n_segments
        )));
    }
    let seg_len = series.len() / n_segments;
    let mut planner = FftPlanner::new();
    let mut power = vec![T::zero(); seg_len / 2 + 1];
    for seg in series.chunks_exact(seg_len).take(n_segments) {
        for (acc, p) in power.iter_mut().zip(periodogram(seg, dt, &mut planner)) {
            *acc = *acc + p;
        }
    }
    let ns = T::from_count(n_segments);
    power.iter_mut().for_each(|p| *p = *p / ns);
    let df = T::one() / (dt * T::from_count(seg_len));
    let freqs = (0..power.len()).map(|k| T::from_count(k) * df).collect();
    Ok(PsdEstimate {
        freqs,
        power,
        method,
        n_segments,
        dt,
    })
}

impl<T: Real> PsdEstimate<T> {
    pub fn df(&self) -> T {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            T::zero()
        }
    }

    /// `sum(power) * df`.
    pub fn integrated_power(&self) -> T {
        self.power.iter().copied().sum::<T>() * self.df()
    }

    /// Bin-wise mean of estimates sharing one frequency grid.
    pub fn average(estimates: &[PsdEstimate<T>]) -> Result<PsdEstimate<T>, SpectraError> {
        let first = estimates
            .first()
            .ok_or_else(|| SpectraError::InvalidArgument("no estimates to average".into()))?;
        let mut power = vec![T::zero(); first.power.len()];
        for e in estimates {
            if e.freqs != first.freqs {
                return invalid("estimates do not share a frequency grid");
            }
            for (acc, &p) in power.iter_mut().zip(&e.power) {
                *acc = *acc + p;
            }
        }
        let n = T::from_count(estimates.len());
        power.iter_mut().for_each(|p| *p = *p / n);
        Ok(PsdEstimate {
            power,
            n_segments: first.n_segments * estimates.len(),
            ..first.clone()
        })
    }

    /// Mean power over bins with `0 < f < f_below`.
    pub fn plateau_below(&self, f_below: T) -> Option<T> {
        let vals: Vec<T> = self
            .freqs
            .iter()
            .zip(&self.power)
            .filter(|(&f, _)| f > T::zero() && f < f_below)
            .map(|(_, &p)| p)
            .collect();
        mean(&vals)
    }
}

/// One-sided PSD of white noise with variance `sigma^2` sampled every `dt`.
pub fn white_noise_floor<T: Real>(sigma: T, dt: T) -> T {
    T::lit(2.0) * sigma * sigma * dt
}

/// `S(f) = amplitude * f^-exponent`, fitted in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit<T> {
    /// Hz²/Hz at 1 Hz.
    pub amplitude: T,
    pub exponent: T,
    pub fit_band: (T, T),
    /// RMS residual of log10 power.
    pub residual: T,
    pub n_bins: usize,
}

impl<T: Real> PowerLawFit<T> {
    pub fn density(&self, f: T) -> T {
        self.amplitude * f.powf(-self.exponent)
    }
}

/// Unweighted least-squares line through `(log10 f, log10 S)` over the bins
/// inside `band`. Zero-frequency and non-positive bins are skipped.
pub fn fit_powerlaw<T: Real>(
    psd: &PsdEstimate<T>,
    band: (T, T),
) -> Result<PowerLawFit<T>, SpectraError> {
    let (lo, hi) = band;
    if !(lo < hi) {
        return invalid("band lower edge must be below upper edge");
    }
    let (xs, ys): (Vec<T>, Vec<T>) = psd
        .freqs
        .iter()
        .zip(&psd.power)
        .filter(|(&f, _)| f > T::zero() && f >= lo && f <= hi)
        .filter(|(_, &p)| p > T::min_positive_value())
        .map(|(&f, &p)| (f.log10(), p.log10()))
        .unzip();
    if xs.len() < 5 {
        return Err(SpectraError::Fit(format!(
            "power-law fit needs >= 5 positive bins in band, found {}",
            xs.len()
        )));
    }
    let line = fit_line(&xs, &ys)
        .ok_or_else(|| SpectraError::Fit("degenerate frequency support".into()))?;
    Ok(PowerLawFit {
        amplitude: T::lit(10.0).powf(line.intercept),
        exponent: -line.slope,
        fit_band: band,
        residual: line.rms_residual,
        n_bins: xs.len(),
    })
}

/// Sample variance of overlapping lag-`lag` increments `x[i + m] - x[i]`.
pub fn increment_variance<T: Real>(series: &[T], dt: T, lag: T) -> Result<T, SpectraError> {
    if !(dt > T::zero()) || !(lag > T::zero()) {
        return invalid("dt and lag must be > 0");
    }
    let ratio = lag / dt;
    let m = ratio.round();
    if m < T::one() || (ratio - m).abs() > T::lit(1e-6) * m {
        return invalid(format!("lag {lag} s is not a positive multiple of dt {dt} s"));
    }
    let m = m.to_usize().unwrap_or(usize::MAX);
    let count = series.len().saturating_sub(m);
    if count < 30 {
        return Err(SpectraError::Statistics(format!(
            "lag {lag} s leaves {count} increments; at least 30 are required"
        )));
    }
    let incs: Vec<T> = (0..count).map(|i| series[i + m] - series[i]).collect();
    let mu = mean(&incs).expect("non-empty");
    let ss: T = incs.iter().map(|&d| (d - mu) * (d - mu)).sum();
    Ok(ss / T::from_count(count - 1))
}

/// `sigma^2(T) = 2 D T^alpha` fitted in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit<T> {
    /// Raw regression slope; ~0 for uncorrelated noise, 1 for a random walk.
    pub alpha: T,
    /// Hz²/s^alpha.
    pub d_alpha: T,
    pub intervals: Vec<T>,
    pub variances: Vec<T>,
}

pub fn fit_diffusion<T: Real>(
    series: &[T],
    dt: T,
    intervals: &[T],
) -> Result<DiffusionFit<T>, SpectraError> {
    if intervals.len() < 4 {
        return invalid("diffusion fit needs >= 4 intervals");
    }
    let lo = intervals.iter().copied().fold(T::infinity(), T::min);
    let hi = intervals.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi >= T::lit(10.0) * lo * (T::one() - T::lit(1e-9))) {
        return invalid("intervals must span at least one decade");
    }
    let variances = intervals
        .iter()
        .map(|&lag| increment_variance(series, dt, lag))
        .collect::<Result<Vec<T>, _>>()?;
    if variances.iter().any(|&v| !(v > T::zero())) {
        return Err(SpectraError::Fit("zero increment variance; series is constant".into()));
    }
    let xs: Vec<T> = intervals.iter().map(|t| t.ln()).collect();
    let ys: Vec<T> = variances.iter().map(|v| v.ln()).collect();
    let line = fit_line(&xs, &ys).ok_or_else(|| SpectraError::Fit("degenerate intervals".into()))?;
    Ok(DiffusionFit {
        alpha: line.slope,
        d_alpha: line.intercept.exp() / T::lit(2.0),
        intervals: intervals.to_vec(),
        variances,
    })
}

/// Ramsey filter function `t^2 sinc^2(pi f t)`, in s².
pub fn filter_function<T: Real>(f: T, t: T) -> T {
    let s = sinc(T::PI() * f * t);
    t * t * s * s
}

/// A one-sided noise spectrum usable in the decoherence integral.
pub trait Spectrum<T: Real> {
    fn density(&self, f: T) -> T;

    /// Upper bound on `int_{f_max}^inf S(f) sinc^2(pi f t) df`, if known.
    fn tail_bound(&self, _f_max: T, _t: T) -> Option<T> {
        None
    }
}

/// The pure power law; the synthesis band of the spec is ignored here, the
/// integration limits are explicit arguments.
impl<T: Real> Spectrum<T> for PowerLawSpec<T> {
    fn density(&self, f: T) -> T {
        if self.amplitude == T::zero() {
            T::zero()
        } else {
            PowerLawSpec::density(self, f)
        }
    }

    fn tail_bound(&self, f_max: T, t: T) -> Option<T> {
        // sinc^2(pi f t) <= 1/(pi f t)^2
        let b1 = self.exponent + T::one();
        Some(self.amplitude / (T::PI() * t).powi(2) * f_max.powf(-b1) / b1)
    }
}

/// Linear interpolation between estimated bins; zero outside the support.
impl<T: Real> Spectrum<T> for PsdEstimate<T> {
    fn density(&self, f: T) -> T {
        let n = self.freqs.len();
        if n < 2 || f < self.freqs[1] || f > self.freqs[n - 1] {
            return T::zero();
        }
        let df = self.df();
        let pos = f / df;
        let k = pos.floor().to_usize().unwrap_or(n - 1).min(n - 2);
        let w = pos - T::from_count(k);
        self.power[k] * (T::one() - w) + self.power[k + 1] * w
    }

    fn tail_bound(&self, f_max: T, _t: T) -> Option<T> {
        let last = *self.freqs.last()?;
        (f_max >= last).then(T::zero)
    }
}

/// Outcome of the phase-variance integral `int_{f0}^{f_max} S(f) sinc^2(pi f t) df`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseIntegral<T> {
    /// Hz².
    pub value: T,
    pub abs_error: T,
    /// Bound on the neglected `[f_max, inf)` part, when the spectrum has one.
    pub tail_bound: Option<T>,
    pub evaluations: usize,
}

/// Default truncation of the infinite integral: 100 half-lobes of the sinc.
pub fn default_f_max<T: Real>(t: T) -> T {
    T::lit(100.0) / (T::lit(2.0) * t)
}

const QUAD_REL_TOL: f64 = 1e-10;
const MAX_LOBES: usize = 20_000;

/// Integrates `S(f) sinc^2(pi f t)` over `[f0, f_max]`, splitting the range
/// per decade below `1/t` and at every sinc zero `n/t` above it.
pub fn phase_integral<T: Real, S: Spectrum<T> + ?Sized>(
    t: T,
    spectrum: &S,
    f0: T,
    f_max: T,
) -> Result<PhaseIntegral<T>, SpectraError> {
    if !(t > T::zero()) {
        return invalid("t must be > 0");
    }
    if !(f0 > T::zero() && f0 < f_max) {
        return invalid("need 0 < f0 < f_max");
    }
    let first_zero = T::one() / t;
    let mut edges = vec![f0];
    let log_top = first_zero.min(f_max);
    let mut e = f0;
    while e * T::lit(10.0) < log_top {
        e = e * T::lit(10.0);
        edges.push(e);
    }
    if log_top > f0 {
        edges.push(log_top);
    }
    if f_max > first_zero {
        let lobes = (f_max * t).floor().to_usize().unwrap_or(usize::MAX);
        for n in 2..=lobes.min(MAX_LOBES) {
            edges.push(T::from_count(n) / t);
        }
        let last = *edges.last().expect("non-empty");
        if f_max > last {
            let mut e = last;
            while e * T::lit(10.0) < f_max {
                e = e * T::lit(10.0);
                edges.push(e);
            }
            edges.push(f_max);
        }
    }
    // Lobe and decade edges can nearly coincide; slivers only cost accuracy.
    edges.dedup_by(|b, a| (*b - *a).abs() <= T::lit(1e-12) * a.abs());
    let integrand = |f: T| spectrum.density(f) * filter_function(f, t) / (t * t);
    let mut value = T::zero();
    let mut abs_error = T::zero();
    let mut evaluations = 0;
    for w in edges.windows(2) {
        if !(w[1] > w[0]) {
            continue;
        }
        // Panels run upward from f0, where a power law carries most of its
        // weight, so the running total sets a sensible absolute floor.
        let abs_tol = value.abs() * T::lit(QUAD_REL_TOL * 1e-2);
        let q = numerics::integrate(integrand, w[0], w[1], T::lit(QUAD_REL_TOL), abs_tol, 400)?;
        value = value + q.value;
        abs_error = abs_error + q.abs_error;
        evaluations += q.evaluations;
    }
    Ok(PhaseIntegral {
        value,
        abs_error,
        tail_bound: spectrum.tail_bound(f_max, t),
        evaluations,
    })
}

fn w_from_integral<T: Real>(t: T, integral: T) -> T {
    (-(t * t) / T::lit(2.0) * T::TAU().powi(2) * integral).exp()
}

/// Decoherence function `W(t) = exp(-(t^2/2)(2 pi)^2 int S(f) sinc^2(pi f t) df)`.
pub fn decoherence_w<T: Real, S: Spectrum<T> + ?Sized>(
    t: T,
    spectrum: &S,
    f0: T,
    f_max: T,
) -> Result<T, SpectraError> {
    let q = phase_integral(t, spectrum, f0, f_max)?;
    Ok(w_from_integral(t, q.value))
}

/// `A int_{f0}^{f1} f^-beta df`, logarithmic at `beta = 1`.
pub fn quasi_static_variance<T: Real>(amplitude: T, exponent: T, f0: T, f1: T) -> T {
    PowerLawSpec {
        amplitude,
        exponent,
        f_low: f0,
        f_high: f1,
    }
    .integrated(f0, f1)
}

/// Quasi-static decoherence `exp(-(t^2/2)(2 pi)^2 sigma_static^2)`.
pub fn quasi_static_w<T: Real>(t: T, spec: &PowerLawSpec<T>, f0: T, f1: T) -> T {
    w_from_integral(t, quasi_static_variance(spec.amplitude, spec.exponent, f0, f1))
}

/// `sigma_static = 1 / (sqrt(2) pi T2*)`.
pub fn sigma_from_t2<T: Real>(t2_star: T) -> T {
    T::one() / (T::SQRT_2() * T::PI() * t2_star)
}

pub fn t2_from_sigma<T: Real>(sigma: T) -> T {
    T::one() / (T::SQRT_2() * T::PI() * sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PredictionMode<T> {
    /// `sinc^2 ~ 1` on `[f0, f1]`, closed form.
    QuasiStatic,
    /// Solve `W(t) = 1/e` on the full integral from `f0` to `f_max`
    /// (default [`default_f_max`] at each trial `t`).
    FullIntegral { f_max: Option<T> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherencePrediction<T> {
    pub t2_star: T,
    pub sigma_static: T,
    pub f0: T,
    /// Upper integration limit used (at the solution for full mode).
    pub f1: T,
    pub mode: PredictionMode<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Prediction<T> {
    Decoherence(DecoherencePrediction<T>),
    /// Zero spectrum: W(t) = 1 for all t.
    NoDecoherence,
}

impl<T: Real> Prediction<T> {
    pub fn decoherence(&self) -> Option<&DecoherencePrediction<T>> {
        match self {
            Prediction::Decoherence(d) => Some(d),
            Prediction::NoDecoherence => None,
        }
    }
}

/// Predicts T2* and sigma_static from a power-law spectrum.
pub fn predict_t2star<T: Real>(
    spec: &PowerLawSpec<T>,
    f0: T,
    f1: T,
    mode: PredictionMode<T>,
) -> Result<Prediction<T>, SpectraError> {
    if !(f0 > T::zero() && f0 < f1) {
        return invalid("need 0 < f0 < f1");
    }
    if spec.amplitude < T::zero() {
        return invalid("amplitude must be >= 0");
    }
    if spec.amplitude == T::zero() {
        return Ok(Prediction::NoDecoherence);
    }
    let sigma_qs = quasi_static_variance(spec.amplitude, spec.exponent, f0, f1).sqrt();
    let t_qs = t2_from_sigma(sigma_qs);
    match mode {
        PredictionMode::QuasiStatic => Ok(Prediction::Decoherence(DecoherencePrediction {
            t2_star: t_qs,
            sigma_static: sigma_qs,
            f0,
            f1,
            mode,
        })),
        PredictionMode::FullIntegral { f_max } => {
            let upper = |t: T| f_max.unwrap_or_else(|| default_f_max(t));
            // ln W(t) + 1 changes sign at T2*.
            let mut failure = None;
            let mut g = |t: T| match phase_integral(t, spec, f0, upper(t)) {
                Ok(q) => T::one() - t * t / T::lit(2.0) * T::TAU().powi(2) * q.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::nan()
                }
            };
            let (mut lo, mut hi) = (t_qs / T::lit(4.0), t_qs * T::lit(4.0));
            let mut tries = 0;
            while g(lo) <= T::zero() && tries < 60 {
                lo = lo / T::lit(4.0);
                tries += 1;
            }
            while g(hi) >= T::zero() && tries < 60 {
                hi = hi * T::lit(4.0);
                tries += 1;
            }
            let root = numerics::brent(&mut g, lo, hi, t_qs * T::lit(1e-12), 200);
            if let Some(e) = failure {
                return Err(e);
            }
            let t2 = root?;
            Ok(Prediction::Decoherence(DecoherencePrediction {
                t2_star: t2,
                sigma_static: sigma_from_t2(t2),
                f0,
                f1: upper(t2),
                mode,
            }))
        }
    }
}

/// `p(t) = offset + visibility * exp(-t^2/T2*^2) * cos(2 pi f t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDecayFit<T> {
    pub t2_star: T,
    pub frequency: T,
    pub phase: T,
    pub visibility: T,
    pub offset: T,
    pub rms_residual: T,
}

impl<T: Real> GaussianDecayFit<T> {
    pub fn eval(&self, t: T) -> T {
        let env = (-(t / self.t2_star).powi(2)).exp();
        self.offset + self.visibility * env * (T::TAU() * self.frequency * t + self.phase).cos()
    }
}

/// Model in scaled units: `[offset, visibility, t2, freq, phase]` with time
/// measured in units of the record span.
fn decay_model<T: Real>(p: &[T; 5], tau: T) -> (T, [T; 5]) {
    let [c, v, w, f, ph] = *p;
    let x = tau / w;
    let env = (-x * x).exp();
    let arg = T::TAU() * f * tau + ph;
    let (s, co) = arg.sin_cos();
    let val = c + v * env * co;
    let grad = [
        T::one(),
        env * co,
        v * env * co * T::lit(2.0) * x * x / w,
        -v * env * s * T::TAU() * tau,
        -v * env * s,
    ];
    (val, grad)
}

fn sum_sq<T: Real>(p: &[T; 5], tau: &[T], y: &[T]) -> T {
    tau.iter()
        .zip(y)
        .map(|(&t, &yi)| {
            let r = decay_model(p, t).0 - yi;
            r * r
        })
        .sum()
}

/// Levenberg-Marquardt from `start`; returns the parameters and whether the
/// relative improvement stalled below tolerance (converged).
fn levenberg_marquardt<T: Real>(start: [T; 5], tau: &[T], y: &[T]) -> ([T; 5], T, bool) {
    let mut p = start;
    let mut cost = sum_sq(&p, tau, y);
    let mut lambda = T::lit(1e-3);
    for _ in 0..500 {
        let mut jtj = vec![T::zero(); 25];
        let mut jtr = vec![T::zero(); 5];
        for (&t, &yi) in tau.iter().zip(y) {
            let (val, g) = decay_model(&p, t);
            let r = yi - val;
            for a in 0..5 {
                jtr[a] = jtr[a] + g[a] * r;
                for b in 0..5 {
                    jtj[a * 5 + b] = jtj[a * 5 + b] + g[a] * g[b];
                }
            }
        }
        let mut improved = false;
        while lambda < T::lit(1e12) {
            let mut m = jtj.clone();
            for a in 0..5 {
                m[a * 5 + a] = m[a * 5 + a] * (T::one() + lambda) + T::lit(1e-30);
            }
            let Ok(step) = numerics::solve_dense(m, jtr.clone()) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let mut trial = p;
            for a in 0..5 {
                trial[a] = trial[a] + step[a];
            }
            let trial_cost = sum_sq(&trial, tau, y);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(T::min_positive_value());
                p = trial;
                cost = trial_cost;
                lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                improved = true;
                if rel < T::lit(1e-14) || cost < T::lit(1e-28) {
                    return (p, cost, true);
                }
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !improved {
            return (p, cost, true);
        }
    }
    (p, cost, false)
}

/// Nonlinear least-squares fit of a Gaussian-damped Ramsey fringe.
pub fn fit_gaussian_decay<T: Real>(
    times: &[T],
    probability: &[T],
) -> Result<GaussianDecayFit<T>, SpectraError> {
    if times.len() != probability.len() {
        return invalid("times and probability lengths differ");
    }
    if times.len() < 8 {
        return Err(SpectraError::Fit(format!("need >= 8 points, got {}", times.len())));
    }
    let t0 = times.iter().copied().fold(T::infinity(), T::min);
    let t1 = times.iter().copied().fold(T::neg_infinity(), T::max);
    let span = t1 - t0;
    if !(span > T::zero()) {
        return invalid("times must span a positive interval");
    }
    let c0 = mean(probability).expect("non-empty");
    let spread = probability
        .iter()
        .map(|&p| (p - c0).abs())
        .fold(T::zero(), T::max);
    if spread <= T::lit(1e-12) * c0.abs().max(T::one()) {
        return Err(SpectraError::Fit("no oscillation: curve is flat".into()));
    }
    let tau: Vec<T> = times.iter().map(|&t| t / span).collect();
    let y = probability;

    // Coarse frequency from the largest Fourier component, in cycles per span.
    let min_gap = times
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .filter(|&g| g > T::zero())
        .fold(span, T::min);
    let f_hi = (span / min_gap / T::lit(2.0)).max(T::one());
    let n_grid = (f_hi * T::lit(20.0)).to_usize().unwrap_or(2000).clamp(50, 200_000);
    let component = |f: T| -> Complex<T> {
        tau.iter().zip(y).fold(Complex::new(T::zero(), T::zero()), |acc, (&t, &p)| {
            let (s, c) = (T::TAU() * f * t).sin_cos();
            acc + Complex::new(c, -s) * (p - c0)
        })
    };
    let (f_guess, z) = (1..=n_grid)
        .map(|k| {
            let f = f_hi * T::from_count(k) / T::from_count(n_grid);
            (f, component(f))
        })
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty grid");
    if f_guess < T::one() {
        return Err(SpectraError::Fit(
            "record spans less than one oscillation period".into(),
        ));
    }

    let mut best: Option<([T; 5], T, bool)> = None;
    for w0 in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let start = [c0, spread, T::lit(w0), f_guess, z.arg()];
        let fit = levenberg_marquardt(start, &tau, y);
        if best.as_ref().is_none_or(|b| fit.1 < b.1) {
            best = Some(fit);
        }
    }
    let (p, cost, converged) = best.expect("restarts ran");
    let [c, mut v, w, f, mut ph] = p;
    if v < T::zero() {
        v = -v;
        ph = ph + T::PI();
    }
    ph = ph - T::TAU() * ((ph + T::PI()) / T::TAU()).floor();
    let fit = GaussianDecayFit {
        t2_star: w.abs() * span,
        frequency: f / span,
        phase: ph,
        visibility: v,
        offset: c,
        rms_residual: (cost / T::from_count(times.len())).sqrt(),
    };
    if !converged || !fit.t2_star.is_finite() {
        return Err(SpectraError::Fit(format!(
            "Levenberg-Marquardt did not converge; best so far {fit:?}"
        )));
    }
    if fit.visibility <= T::lit(1e-9) {
        return Err(SpectraError::Fit("no oscillation: fitted visibility is zero".into()));
    }
    Ok(fit)
}
