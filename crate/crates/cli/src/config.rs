//! JSON scenario configuration. Every physical quantity is a string with a
//! unit suffix; bare numbers are rejected with the offending field path.

use std::fmt;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use driftlock_core::units::{parse_quantity, Dimension, UnitError};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: field `{field}`: {message}")]
    Field {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("field `{field}` {invariant} (got {value})")]
    Range {
        field: String,
        invariant: String,
        value: String,
    },
    #[error("unknown scenario `{0}`; expected one of {list}", list = SCENARIOS.join(", "))]
    UnknownScenario(String),
}

pub const SCENARIOS: [&str; 8] = [
    "synthesize-noise",
    "repeated-ramsey",
    "rabi-chevron",
    "feedback-run",
    "psd-analysis",
    "diffusion-analysis",
    "predict-t2",
    "gst-violation",
];

/// Marker types tying a [`Quantity`] to its physical dimension.
pub trait Dim {
    const DIMENSION: Dimension;
}

macro_rules! dims {
    ($($name:ident => $dim:ident),* $(,)?) => {$(
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name;
        impl Dim for $name {
            const DIMENSION: Dimension = Dimension::$dim;
        }
    )*};
}

dims! {
    FreqDim => Frequency,
    TimeDim => Time,
    VoltDim => Voltage,
    DensityDim => SpectralDensity,
}

/// A value parsed from `"<number> <unit>"`, stored in the canonical unit.
#[derive(Clone, Copy, PartialEq)]
pub struct Quantity<D> {
    pub value: f64,
    dim: PhantomData<D>,
}

pub type Frequency = Quantity<FreqDim>;
pub type Time = Quantity<TimeDim>;
pub type Voltage = Quantity<VoltDim>;
pub type Density = Quantity<DensityDim>;

impl<D: Dim> Quantity<D> {
    pub const fn new(value: f64) -> Self {
        Self {
            value,
            dim: PhantomData,
        }
    }
}

impl<D: Dim> fmt::Debug for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, D::DIMENSION.canonical_unit())
    }
}

impl<D: Dim> Serialize for Quantity<D> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:?}", self))
    }
}

struct QuantityVisitor<D>(PhantomData<D>);

impl<D: Dim> QuantityVisitor<D> {
    fn missing<E: de::Error>(&self) -> E {
        E::custom(driftlock_core::units::missing_unit(D::DIMENSION))
    }
}

impl<D: Dim> Visitor<'_> for QuantityVisitor<D> {
    type Value = Quantity<D>;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a {} with a unit suffix", D::DIMENSION)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
        parse_quantity(v, D::DIMENSION)
            .map(Quantity::new)
            .map_err(|e: UnitError| E::custom(e))
    }

    fn visit_f64<E: de::Error>(self, _: f64) -> Result<Self::Value, E> {
        Err(self.missing())
    }

    fn visit_i64<E: de::Error>(self, _: i64) -> Result<Self::Value, E> {
        Err(self.missing())
    }

    fn visit_u64<E: de::Error>(self, _: u64) -> Result<Self::Value, E> {
        Err(self.missing())
    }
}

impl<'de, D: Dim> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(d: De) -> Result<Self, De::Error> {
        d.deserialize_any(QuantityVisitor(PhantomData))
    }
}

/// Power-law frequency noise, optionally with a static offset and a
/// sensor-backaction source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub amplitude: Density,
    pub exponent: f64,
    pub f_low: Frequency,
    pub f_high: Frequency,
    pub duration: Time,
    pub dt: Time,
    pub static_offset_sigma: Option<Frequency>,
    pub backaction: Option<BackactionConfig>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            amplitude: Density::new(2.96e9),
            exponent: 1.34,
            f_low: Frequency::new(1.0 / 300.0),
            f_high: Frequency::new(1e5),
            duration: Time::new(60.0),
            dt: Time::new(100e-6),
            static_offset_sigma: None,
            backaction: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackactionConfig {
    pub telegraph_amplitude: Frequency,
    pub switching_rate: Frequency,
    pub white_sigma: Frequency,
    pub peak_gain: f64,
    pub period: Voltage,
    pub phase: Voltage,
}

impl Default for BackactionConfig {
    fn default() -> Self {
        Self {
            telegraph_amplitude: Frequency::new(300e3),
            switching_rate: Frequency::new(100.0),
            white_sigma: Frequency::new(100e3),
            peak_gain: 1.0,
            period: Voltage::new(12.0),
            phase: Voltage::new(0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitConfig {
    pub rabi_frequency: Frequency,
    pub t2_rabi: Time,
    pub alpha: f64,
    pub beta_vis: f64,
    pub theta: f64,
    pub readout_fidelity_down: f64,
    pub readout_fidelity_up: f64,
    pub white_dephasing_time: Option<Time>,
}

impl Default for QubitConfig {
    fn default() -> Self {
        Self {
            rabi_frequency: Frequency::new(5e6),
            t2_rabi: Time::new(2.52e-6),
            alpha: 0.0,
            beta_vis: 1.0,
            theta: 0.0,
            readout_fidelity_down: 1.0,
            readout_fidelity_up: 1.0,
            white_dephasing_time: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    pub manipulation_and_wait: Time,
    pub readout: Time,
    pub calculation: Time,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            manipulation_and_wait: Time::new(60e-6),
            readout: Time::new(140e-6),
            calculation: Time::new(40e-6),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesizeParams {
    pub noise: NoiseConfig,
    /// Sensor voltage at which the backaction gain is evaluated.
    pub epsilon: Option<Voltage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseyParams {
    pub noise: NoiseConfig,
    pub qubit: QubitConfig,
    pub timing: TimingConfig,
    pub t_step: Time,
    pub t_max: Time,
    pub repetitions: usize,
    pub mw_detuning: Frequency,
    pub epsilon: Voltage,
    pub row_period: Option<Time>,
}

impl Default for RamseyParams {
    fn default() -> Self {
        Self {
            noise: NoiseConfig::default(),
            qubit: QubitConfig::default(),
            timing: TimingConfig::default(),
            t_step: Time::new(40e-9),
            t_max: Time::new(4e-6),
            repetitions: 2000,
            mw_detuning: Frequency::new(-2e6),
            epsilon: Voltage::new(-6.0),
            row_period: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChevronParams {
    pub noise: NoiseConfig,
    pub qubit: QubitConfig,
    pub timing: TimingConfig,
    pub detuning_span: Frequency,
    pub t_max: Time,
    pub n_detuning: usize,
    pub n_time: usize,
    pub repetitions: usize,
    pub epsilon: Voltage,
}

impl Default for ChevronParams {
    fn default() -> Self {
        Self {
            noise: NoiseConfig::default(),
            qubit: QubitConfig::default(),
            timing: TimingConfig::default(),
            detuning_span: Frequency::new(10e6),
            t_max: Time::new(1e-6),
            n_detuning: 41,
            n_time: 51,
            repetitions: 20,
            epsilon: Voltage::new(-6.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub f_min: Frequency,
    pub f_max: Frequency,
    pub n_bins: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            f_min: Frequency::new(0.0),
            f_max: Frequency::new(12.5e6),
            n_bins: 2500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackParams {
    pub noise: NoiseConfig,
    pub qubit: QubitConfig,
    pub timing: TimingConfig,
    pub n_shots: usize,
    pub t_step: Time,
    pub f_target: Frequency,
    pub n_cycles: usize,
    pub epsilon: Voltage,
    pub prior_sigma: Frequency,
    pub grid: GridConfig,
    /// Cycles whose shots are written to the shot logs.
    pub logged_shot_cycles: usize,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        Self {
            noise: NoiseConfig {
                amplitude: Density::new(1.75e9),
                exponent: 1.17,
                duration: Time::new(130.0),
                ..NoiseConfig::default()
            },
            qubit: QubitConfig::default(),
            timing: TimingConfig::default(),
            n_shots: 100,
            t_step: Time::new(40e-9),
            f_target: Frequency::new(2e6),
            n_cycles: 5000,
            epsilon: Voltage::new(-6.0),
            prior_sigma: Frequency::new(50e3),
            grid: GridConfig::default(),
            logged_shot_cycles: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdParams {
    /// CSV trace with header `time_s,delta_f_hz`; synthesized from `noise`
    /// when absent. Relative paths resolve against the config file.
    pub input_trace: Option<PathBuf>,
    pub noise: NoiseConfig,
    /// Period at which the trace is sampled before analysis.
    pub sample_period: Time,
    pub segments: usize,
    pub fit_low: Frequency,
    pub fit_high: Frequency,
}

impl Default for PsdParams {
    fn default() -> Self {
        Self {
            input_trace: None,
            noise: NoiseConfig {
                duration: Time::new(1572.864),
                dt: Time::new(24e-3),
                ..NoiseConfig::default()
            },
            sample_period: Time::new(24e-3),
            segments: 1,
            fit_low: Frequency::new(0.0),
            fit_high: Frequency::new(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionParams {
    pub input_trace: Option<PathBuf>,
    pub noise: NoiseConfig,
    pub sample_period: Time,
    pub intervals: Vec<Time>,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            input_trace: None,
            noise: NoiseConfig {
                duration: Time::new(1572.864),
                dt: Time::new(24e-3),
                ..NoiseConfig::default()
            },
            sample_period: Time::new(24e-3),
            intervals: [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
                .iter()
                .map(|m| Time::new(m * 24e-3))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumEntry {
    pub label: String,
    pub amplitude: Density,
    pub exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictParams {
    pub spectra: Vec<SpectrumEntry>,
    pub f0: Frequency,
    pub f1: Frequency,
    /// Upper limit of the full integral; `100 / (2 t)` at each `t` if absent.
    pub f_max: Option<Frequency>,
    pub curve_points: usize,
    pub curve_t_max: Time,
}

impl Default for PredictParams {
    fn default() -> Self {
        Self {
            spectra: vec![
                SpectrumEntry {
                    label: "eps0".into(),
                    amplitude: Density::new(2.96e9),
                    exponent: 1.34,
                },
                SpectrumEntry {
                    label: "eps-6".into(),
                    amplitude: Density::new(1.75e9),
                    exponent: 1.17,
                },
            ],
            f0: Frequency::new(1.0 / 300.0),
            f1: Frequency::new(1e5),
            f_max: None,
            curve_points: 100,
            curve_t_max: Time::new(4e-6),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GstParams {
    /// CSV `circuit_id,germ,L,outcome,count,model_prob`, relative to the
    /// config file.
    pub dataset: PathBuf,
    /// Degrees of freedom per circuit; never inferred.
    pub k: u32,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ScenarioParams {
    SynthesizeNoise(SynthesizeParams),
    RepeatedRamsey(RamseyParams),
    RabiChevron(ChevronParams),
    FeedbackRun(FeedbackParams),
    PsdAnalysis(PsdParams),
    DiffusionAnalysis(DiffusionParams),
    PredictT2(PredictParams),
    GstViolation(GstParams),
}

/// Resolved configuration, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    /// Not echoed: outputs must not depend on where they are written.
    #[serde(skip)]
    pub output_directory: PathBuf,
    pub params: ScenarioParams,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    seed: Option<u64>,
    output_directory: Option<PathBuf>,
    #[serde(default)]
    params: serde_json::Value,
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scenario: Option<String>,
    pub out: Option<PathBuf>,
}

fn field_error(path: &Path, prefix: &str, err: serde_path_to_error::Error<serde_json::Error>) -> ConfigError {
    let inner = err.path().to_string();
    let field = match (prefix.is_empty(), inner.as_str()) {
        (true, p) => p.to_string(),
        (false, ".") => prefix.to_string(),
        (false, p) => format!("{prefix}.{p}"),
    };
    ConfigError::Field {
        path: path.to_path_buf(),
        field,
        message: err.into_inner().to_string(),
    }
}

fn params_from<T: for<'de> Deserialize<'de>>(path: &Path, value: serde_json::Value) -> Result<T, ConfigError> {
    let value = if value.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        value
    };
    serde_path_to_error::deserialize(value).map_err(|e| field_error(path, "params", e))
}

pub fn parse_config(text: &str, path: &Path, overrides: &Overrides) -> Result<ScenarioConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        if inner.is_syntax() || inner.is_eof() {
            ConfigError::Syntax {
                path: path.to_path_buf(),
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        } else {
            field_error(path, "", e)
        }
    })?;
    let scenario = overrides.scenario.clone().unwrap_or(raw.scenario);
    let seed = overrides.seed.or(raw.seed).ok_or_else(|| ConfigError::Field {
        path: path.to_path_buf(),
        field: "seed".into(),
        message: "missing seed (set it in the config or pass --seed)".into(),
    })?;
    let params = match scenario.as_str() {
        "synthesize-noise" => ScenarioParams::SynthesizeNoise(params_from(path, raw.params)?),
        "repeated-ramsey" => ScenarioParams::RepeatedRamsey(params_from(path, raw.params)?),
        "rabi-chevron" => ScenarioParams::RabiChevron(params_from(path, raw.params)?),
        "feedback-run" => ScenarioParams::FeedbackRun(params_from(path, raw.params)?),
        "psd-analysis" => ScenarioParams::PsdAnalysis(params_from(path, raw.params)?),
        "diffusion-analysis" => ScenarioParams::DiffusionAnalysis(params_from(path, raw.params)?),
        "predict-t2" => ScenarioParams::PredictT2(params_from(path, raw.params)?),
        "gst-violation" => ScenarioParams::GstViolation(params_from(path, raw.params)?),
        other => return Err(ConfigError::UnknownScenario(other.to_string())),
    };
    let output_directory = overrides
        .out
        .clone()
        .or(raw.output_directory)
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario));
    let cfg = ScenarioConfig {
        scenario,
        seed,
        output_directory,
        params,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path, overrides)
}

fn ensure(ok: bool, field: &str, invariant: &str, value: impl fmt::Debug) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range {
            field: field.to_string(),
            invariant: invariant.to_string(),
            value: format!("{value:?}"),
        })
    }
}

fn positive<D: Dim>(q: Quantity<D>, field: &str) -> Result<(), ConfigError> {
    ensure(q.value > 0.0 && q.value.is_finite(), field, "must be > 0 and finite", q)
}

impl NoiseConfig {
    fn validate(&self, at: &str) -> Result<(), ConfigError> {
        let f = |name: &str| format!("{at}.{name}");
        ensure(self.amplitude.value >= 0.0, &f("amplitude"), "must be >= 0", self.amplitude)?;
        ensure(
            (0.0..=3.0).contains(&self.exponent),
            &f("exponent"),
            "must lie in [0, 3]",
            self.exponent,
        )?;
        positive(self.f_low, &f("f_low"))?;
        ensure(self.f_high.value > self.f_low.value, &f("f_high"), "must exceed f_low", self.f_high)?;
        positive(self.dt, &f("dt"))?;
        ensure(
            self.duration.value >= 2.0 * self.dt.value,
            &f("duration"),
            "must cover at least two samples",
            self.duration,
        )?;
        ensure(
            self.duration.value / self.dt.value <= 5e7,
            &f("duration"),
            "must not exceed 5e7 samples of dt",
            self.duration,
        )?;
        if let Some(s) = self.static_offset_sigma {
            ensure(s.value >= 0.0, &f("static_offset_sigma"), "must be >= 0", s)?;
        }
        if let Some(b) = &self.backaction {
            let f = |name: &str| format!("{at}.backaction.{name}");
            ensure(b.telegraph_amplitude.value >= 0.0, &f("telegraph_amplitude"), "must be >= 0", b.telegraph_amplitude)?;
            positive(b.switching_rate, &f("switching_rate"))?;
            ensure(b.white_sigma.value >= 0.0, &f("white_sigma"), "must be >= 0", b.white_sigma)?;
            ensure(b.peak_gain >= 0.0, &f("peak_gain"), "must be >= 0", b.peak_gain)?;
            positive(b.period, &f("period"))?;
        }
        Ok(())
    }
}

impl QubitConfig {
    fn validate(&self, at: &str) -> Result<(), ConfigError> {
        let f = |name: &str| format!("{at}.{name}");
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        ensure(unit(self.beta_vis), &f("beta_vis"), "must lie in [0, 1]", self.beta_vis)?;
        ensure(
            self.alpha.abs() + self.beta_vis <= 1.0 + 1e-12,
            &f("alpha"),
            "must satisfy |alpha| + beta_vis <= 1",
            self.alpha,
        )?;
        ensure(unit(self.readout_fidelity_down), &f("readout_fidelity_down"), "must lie in [0, 1]", self.readout_fidelity_down)?;
        ensure(unit(self.readout_fidelity_up), &f("readout_fidelity_up"), "must lie in [0, 1]", self.readout_fidelity_up)?;
        ensure(self.rabi_frequency.value >= 0.0, &f("rabi_frequency"), "must be >= 0", self.rabi_frequency)?;
        positive(self.t2_rabi, &f("t2_rabi")).or_else(|e| {
            if self.t2_rabi.value == f64::INFINITY {
                Ok(())
            } else {
                Err(e)
            }
        })?;
        if let Some(t) = self.white_dephasing_time {
            positive(t, &f("white_dephasing_time"))?;
        }
        Ok(())
    }
}

impl TimingConfig {
    fn validate(&self, at: &str) -> Result<(), ConfigError> {
        for (name, q) in [
            ("manipulation_and_wait", self.manipulation_and_wait),
            ("readout", self.readout),
            ("calculation", self.calculation),
        ] {
            ensure(q.value >= 0.0, &format!("{at}.{name}"), "must be >= 0", q)?;
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.params {
            ScenarioParams::SynthesizeNoise(p) => p.noise.validate("params.noise"),
            ScenarioParams::RepeatedRamsey(p) => {
                p.noise.validate("params.noise")?;
                p.qubit.validate("params.qubit")?;
                p.timing.validate("params.timing")?;
                positive(p.t_step, "params.t_step")?;
                ensure(p.t_max.value >= p.t_step.value, "params.t_max", "must be >= t_step", p.t_max)?;
                ensure(p.repetitions >= 1, "params.repetitions", "must be >= 1", p.repetitions)
            }
            ScenarioParams::RabiChevron(p) => {
                p.noise.validate("params.noise")?;
                p.qubit.validate("params.qubit")?;
                p.timing.validate("params.timing")?;
                ensure(p.detuning_span.value >= 0.0, "params.detuning_span", "must be >= 0", p.detuning_span)?;
                positive(p.t_max, "params.t_max")?;
                ensure(p.n_detuning >= 2, "params.n_detuning", "must be >= 2", p.n_detuning)?;
                ensure(p.n_time >= 2, "params.n_time", "must be >= 2", p.n_time)?;
                ensure(p.repetitions >= 1, "params.repetitions", "must be >= 1", p.repetitions)
            }
            ScenarioParams::FeedbackRun(p) => {
                p.noise.validate("params.noise")?;
                p.qubit.validate("params.qubit")?;
                p.timing.validate("params.timing")?;
                ensure(p.n_shots >= 1, "params.n_shots", "must be >= 1", p.n_shots)?;
                positive(p.t_step, "params.t_step")?;
                ensure(p.n_cycles >= 2, "params.n_cycles", "must be >= 2", p.n_cycles)?;
                positive(p.prior_sigma, "params.prior_sigma")?;
                ensure(p.grid.n_bins >= 2, "params.grid.n_bins", "must be >= 2", p.grid.n_bins)?;
                ensure(
                    p.grid.f_max.value > p.grid.f_min.value,
                    "params.grid.f_max",
                    "must exceed grid.f_min",
                    p.grid.f_max,
                )
            }
            ScenarioParams::PsdAnalysis(p) => {
                if p.input_trace.is_none() {
                    p.noise.validate("params.noise")?;
                }
                positive(p.sample_period, "params.sample_period")?;
                ensure(p.segments >= 1, "params.segments", "must be >= 1", p.segments)?;
                ensure(p.fit_high.value > p.fit_low.value, "params.fit_high", "must exceed fit_low", p.fit_high)
            }
            ScenarioParams::DiffusionAnalysis(p) => {
                if p.input_trace.is_none() {
                    p.noise.validate("params.noise")?;
                }
                positive(p.sample_period, "params.sample_period")?;
                ensure(p.intervals.len() >= 4, "params.intervals", "must list at least 4 intervals", p.intervals.len())?;
                for (i, q) in p.intervals.iter().enumerate() {
                    positive(*q, &format!("params.intervals[{i}]"))?;
                }
                Ok(())
            }
            ScenarioParams::PredictT2(p) => {
                ensure(!p.spectra.is_empty(), "params.spectra", "must not be empty", p.spectra.len())?;
                for (i, s) in p.spectra.iter().enumerate() {
                    let at = format!("params.spectra[{i}]");
                    ensure(s.amplitude.value >= 0.0, &format!("{at}.amplitude"), "must be >= 0", s.amplitude)?;
                    ensure(
                        (0.0..=3.0).contains(&s.exponent),
                        &format!("{at}.exponent"),
                        "must lie in [0, 3]",
                        s.exponent,
                    )?;
                }
                positive(p.f0, "params.f0")?;
                ensure(p.f1.value > p.f0.value, "params.f1", "must exceed f0", p.f1)?;
                if let Some(f) = p.f_max {
                    ensure(f.value > p.f0.value, "params.f_max", "must exceed f0", f)?;
                }
                ensure(p.curve_points >= 2, "params.curve_points", "must be >= 2", p.curve_points)?;
                positive(p.curve_t_max, "params.curve_t_max")
            }
            ScenarioParams::GstViolation(p) => {
                ensure(p.k >= 1, "params.k", "must be >= 1", p.k)?;
                ensure(
                    p.confidence > 0.5 && p.confidence < 1.0,
                    "params.confidence",
                    "must lie in (0.5, 1)",
                    p.confidence,
                )
            }
        }
    }

    /// Resolves a path from the config relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        parse_config(text, Path::new("test.json"), &Overrides::default())
    }

    #[test]
    fn quantities_parse_with_units() {
        let cfg = parse(r#"{"scenario": "predict-t2", "seed": 1, "params": {"f1": "0.1 MHz", "f0": "3.3333333333 mHz"}}"#).unwrap();
        let ScenarioParams::PredictT2(p) = cfg.params else { panic!() };
        assert_eq!(p.f1.value, 1e5);
        assert!((p.f0.value - 1.0 / 300.0).abs() < 1e-12);
    }

    #[test]
    fn bare_number_names_field() {
        let err = parse(r#"{"scenario": "feedback-run", "seed": 1, "params": {"f_target": 2}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("params.f_target"), "{msg}");
        assert!(msg.contains("missing unit"), "{msg}");
    }

    #[test]
    fn negative_exponent_is_range_error() {
        let err = parse(
            r#"{"scenario": "predict-t2", "seed": 1, "params": {"spectra": [{"label": "x", "amplitude": "1 MHz^2/Hz", "exponent": -1}]}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Range { .. }));
        assert!(err.to_string().contains("params.spectra[0].exponent"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse(r#"{"scenario": "predict-t2", "seed": 1, "params": {"fzero": "1 Hz"}}"#).unwrap_err();
        assert!(err.to_string().contains("fzero"));
        assert!(parse(r#"{"scenario": "predict-t2", "seed": 1, "colour": 2}"#).is_err());
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse("{\n\"scenario\": \"predict-t2\",\n\"seed\": ,\n}").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }), "{err}");
    }

    #[test]
    fn seed_required_unless_overridden() {
        assert!(parse(r#"{"scenario": "predict-t2"}"#).is_err());
        let o = Overrides { seed: Some(9), ..Overrides::default() };
        let cfg = parse_config(r#"{"scenario": "predict-t2"}"#, Path::new("x.json"), &o).unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn scenario_override_and_unknown() {
        let o = Overrides { scenario: Some("bogus".into()), ..Overrides::default() };
        let err = parse_config(r#"{"scenario": "predict-t2", "seed": 1}"#, Path::new("x.json"), &o).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownScenario(_)));
    }
}
