//! Scenario execution. Each scenario returns its artifacts in memory plus a
//! JSON summary; writing happens in one place so the manifest stays complete.

use std::path::Path;

use driftlock_core::estimator::{EstimatorConfig, GridShape, LikelihoodParams};
use driftlock_core::feedback::{run_experiment, FeedbackConfig, FeedbackError, LoopMode, OperationPhase};
use driftlock_core::io::{self, IoError};
use driftlock_core::markovianity::{self, Flag, MarkovError};
use driftlock_core::noise::{
    add_static_offset, backaction_gain, synthesis_band, synthesize_powerlaw, BackactionModel, BackactionNoise,
    NoiseError, NoiseStack, NoiseTrace, PowerLawSpec, TelegraphSpec,
};
use driftlock_core::qubit::{
    simulate_rabi_chevron, simulate_repeated_ramsey, ChevronSweep, QubitParams, RamseySweep, ShotTiming, SimError,
};
use driftlock_core::rng::derive_seed;
use driftlock_core::scalar::{mean, sample_std};
use driftlock_core::spectra::{
    self, decoherence_w, default_f_max, estimate_psd, fit_diffusion, fit_gaussian_decay, fit_powerlaw,
    predict_t2star, quasi_static_w, PredictionMode, PsdMethod, SpectraError,
};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{
    ChevronParams, DiffusionParams, FeedbackParams, GstParams, NoiseConfig, PredictParams, PsdParams, QubitConfig,
    RamseyParams, ScenarioConfig, ScenarioParams, SynthesizeParams, TimingConfig,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("noise: {0}")]
    Noise(#[from] NoiseError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("feedback: {0}")]
    Feedback(#[from] FeedbackError),
    #[error("analysis: {0}")]
    Spectra(#[from] SpectraError),
    #[error("markovianity: {0}")]
    Markov(#[from] MarkovError),
    #[error("output: {0}")]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Input {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

pub struct Artifact {
    pub name: String,
    pub description: &'static str,
    pub bytes: Vec<u8>,
}

#[derive(Default)]
pub struct Outputs {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

impl Outputs {
    fn add(
        &mut self,
        name: impl Into<String>,
        description: &'static str,
        write: impl FnOnce(&mut Vec<u8>) -> Result<(), IoError>,
    ) -> Result<(), RunError> {
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.artifacts.push(Artifact {
            name: name.into(),
            description,
            bytes,
        });
        Ok(())
    }

    fn add_json(&mut self, name: &str, description: &'static str, value: &impl serde::Serialize) -> Result<(), RunError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| RunError::Invalid(e.to_string()))?;
        bytes.push(b'\n');
        self.artifacts.push(Artifact {
            name: name.into(),
            description,
            bytes,
        });
        Ok(())
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<Outputs, RunError> {
    let seed = cfg.seed;
    match &cfg.params {
        ScenarioParams::SynthesizeNoise(p) => synthesize(p, seed),
        ScenarioParams::RepeatedRamsey(p) => repeated_ramsey(p, seed),
        ScenarioParams::RabiChevron(p) => rabi_chevron(p, seed),
        ScenarioParams::FeedbackRun(p) => feedback_run(p, seed),
        ScenarioParams::PsdAnalysis(p) => psd_analysis(cfg, p, seed),
        ScenarioParams::DiffusionAnalysis(p) => diffusion_analysis(cfg, p, seed),
        ScenarioParams::PredictT2(p) => predict_t2(p),
        ScenarioParams::GstViolation(p) => gst_violation(cfg, p),
    }
}

fn powerlaw(n: &NoiseConfig) -> Result<PowerLawSpec<f64>, NoiseError> {
    PowerLawSpec::new(n.amplitude.value, n.exponent, n.f_low.value, n.f_high.value)
}

struct BuiltNoise {
    stack: NoiseStack<f64>,
    band: (f64, f64),
    /// Quasi-static variance of the power-law part over the synthesis band.
    sigma_static: f64,
}

fn build_noise(n: &NoiseConfig, seed: u64) -> Result<BuiltNoise, RunError> {
    let spec = powerlaw(n)?;
    let mut trace = synthesize_powerlaw(&spec, n.duration.value, n.dt.value, derive_seed(seed, "noise", 0))?;
    let band = synthesis_band(&spec, trace.duration(), n.dt.value)?;
    if let Some(s) = n.static_offset_sigma {
        trace = add_static_offset(&trace, s.value, derive_seed(seed, "static-offset", 0));
    }
    let mut stack = NoiseStack::new(trace);
    if let Some(b) = &n.backaction {
        let source = BackactionNoise {
            telegraph: TelegraphSpec {
                amplitude: b.telegraph_amplitude.value,
                switching_rate: b.switching_rate.value,
            },
            white_sigma: b.white_sigma.value,
        };
        let back = source.synthesize(n.duration.value, n.dt.value, derive_seed(seed, "backaction", 0))?;
        let model = BackactionModel {
            peak_gain: b.peak_gain,
            period_mv: b.period.value,
            phase_mv: b.phase.value,
        };
        model.validate()?;
        stack = stack.with_backaction(back, model);
    }
    let sigma_static = spectra::quasi_static_variance(spec.amplitude, spec.exponent, band.0, band.1).sqrt();
    Ok(BuiltNoise {
        stack,
        band,
        sigma_static,
    })
}

fn qubit(q: &QubitConfig) -> QubitParams<f64> {
    QubitParams {
        rabi_frequency: q.rabi_frequency.value,
        t2_rabi: q.t2_rabi.value,
        alpha: q.alpha,
        beta_vis: q.beta_vis,
        theta: q.theta,
        readout_fidelity_down: q.readout_fidelity_down,
        readout_fidelity_up: q.readout_fidelity_up,
        white_dephasing_time: q.white_dephasing_time.map(|t| t.value),
    }
}

fn timing(t: &TimingConfig) -> ShotTiming<f64> {
    ShotTiming {
        manipulation_and_wait: t.manipulation_and_wait.value,
        readout: t.readout.value,
        calculation: t.calculation.value,
    }
}

/// Offset series actually seen by the qubit at `epsilon`.
fn effective_trace(noise: &BuiltNoise, epsilon: f64) -> Result<NoiseTrace<f64>, NoiseError> {
    let base = &noise.stack.base;
    let samples = (0..base.len())
        .map(|i| noise.stack.offset_at(base.dt * i as f64, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    NoiseTrace::new(base.dt, samples, base.seed, base.descriptor.clone())
}

fn synthesize(p: &SynthesizeParams, seed: u64) -> Result<Outputs, RunError> {
    let noise = build_noise(&p.noise, seed)?;
    let trace = match (p.epsilon, &p.noise.backaction) {
        (Some(eps), Some(_)) => effective_trace(&noise, eps.value)?,
        _ => noise.stack.base.clone(),
    };
    let mut out = Outputs::default();
    out.add("trace.csv", "frequency-offset trace", |w| io::write_trace(&trace, w))?;
    out.add_json("trace.json", "trace envelope with dt, seed, descriptor and samples", &trace)?;
    out.summary = json!({
        "n_samples": trace.len(),
        "dt_s": trace.dt,
        "duration_s": trace.duration(),
        "std_hz": sample_std(&trace.samples),
        "synthesis_band_hz": [noise.band.0, noise.band.1],
        "sigma_static_predicted_hz": noise.sigma_static,
        "descriptor": trace.descriptor,
    });
    Ok(out)
}

fn repeated_ramsey(p: &RamseyParams, seed: u64) -> Result<Outputs, RunError> {
    let noise = build_noise(&p.noise, seed)?;
    let sweep = RamseySweep {
        t_step: p.t_step.value,
        t_max: p.t_max.value,
        repetitions: p.repetitions,
        mw_detuning: p.mw_detuning.value,
        epsilon_mv: p.epsilon.value,
        row_period: p.row_period.map(|t| t.value),
    };
    let map = simulate_repeated_ramsey(
        &noise.stack,
        &qubit(&p.qubit),
        &timing(&p.timing),
        &sweep,
        derive_seed(seed, "ramsey", 0),
    )?;
    let down = map.column_down_fraction();
    let mut out = Outputs::default();
    out.add("ramsey_map.csv", "P(down) per row and evolution time", |w| io::write_ramsey_map(&map, w))?;
    out.add("ramsey_outcomes.csv", "single-shot outcomes, 1 = down", |w| {
        io::write_ramsey_outcomes(&map, w)
    })?;
    out.add("ramsey_average.csv", "row-averaged down fraction", |w| {
        io::write_curve("down_fraction", &map.evolution_times, &down, w)
    })?;
    let predicted = spectra::t2_from_sigma(noise.sigma_static);
    let fit = fit_gaussian_decay(&map.evolution_times, &down);
    out.summary = json!({
        "rows": map.row_times.len(),
        "columns": map.evolution_times.len(),
        "t2_star_predicted_s": predicted,
        "t2_star_fit_s": fit.as_ref().ok().map(|f| f.t2_star),
        "fringe_frequency_fit_hz": fit.as_ref().ok().map(|f| f.frequency),
        "visibility_fit": fit.as_ref().ok().map(|f| f.visibility),
        "fit_error": fit.as_ref().err().map(ToString::to_string),
    });
    Ok(out)
}

fn rabi_chevron(p: &ChevronParams, seed: u64) -> Result<Outputs, RunError> {
    let noise = build_noise(&p.noise, seed)?;
    let sweep = ChevronSweep {
        detuning_span: p.detuning_span.value,
        t_max: p.t_max.value,
        n_detuning: p.n_detuning,
        n_time: p.n_time,
        repetitions: p.repetitions,
        epsilon_mv: p.epsilon.value,
    };
    let map = simulate_rabi_chevron(
        &noise.stack,
        &qubit(&p.qubit),
        &timing(&p.timing),
        &sweep,
        derive_seed(seed, "chevron", 0),
    )?;
    let mut out = Outputs::default();
    out.add("chevron.csv", "measured P(up) per drive detuning and burst time", |w| {
        io::write_chevron(&map, w)
    })?;
    out.add("chevron_probability.csv", "ensemble P(up) without shot noise", |w| {
        io::write_matrix("detuning_hz\\t_burst_s", &map.burst_times, &map.detunings, &map.probability, w)
    })?;
    let centre = p.n_detuning / 2;
    let row = &map.measured_up[centre];
    let contrast = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - row.iter().copied().fold(f64::INFINITY, f64::min);
    let gain = p.noise.backaction.as_ref().map(|b| {
        backaction_gain(
            p.epsilon.value,
            &BackactionModel {
                peak_gain: b.peak_gain,
                period_mv: b.period.value,
                phase_mv: b.phase.value,
            },
        )
    });
    out.summary = json!({
        "n_detuning": map.detunings.len(),
        "n_time": map.burst_times.len(),
        "resonant_row_detuning_hz": map.detunings[centre],
        "resonant_row_contrast": contrast,
        "mean_measured_up": mean(&map.measured_up.concat()),
        "backaction_gain": gain,
    });
    Ok(out)
}

fn feedback_run(p: &FeedbackParams, seed: u64) -> Result<Outputs, RunError> {
    let noise = build_noise(&p.noise, seed)?;
    let params = qubit(&p.qubit);
    let base = FeedbackConfig {
        n_shots: p.n_shots,
        t_step: p.t_step.value,
        t_max: None,
        timing: timing(&p.timing),
        f_target: p.f_target.value,
        mode: LoopMode::Closed,
        passive_epsilon_mv: p.epsilon.value,
        n_cycles: p.n_cycles,
        estimator: EstimatorConfig {
            grid: GridShape {
                f_min: p.grid.f_min.value,
                f_max: p.grid.f_max.value,
                n_bins: p.grid.n_bins,
            },
            likelihood: LikelihoodParams {
                alpha: p.qubit.alpha,
                beta_vis: p.qubit.beta_vis,
                theta: p.qubit.theta,
            },
            prior_sigma: p.prior_sigma.value,
        },
        cycle_budget: None,
        operation: OperationPhase::DeadTime,
    };
    let run_seed = derive_seed(seed, "feedback", 0);
    let mut out = Outputs::default();
    let mut stats = serde_json::Map::new();
    let mut psds = Vec::new();
    for (mode, label) in [(LoopMode::Closed, "closed"), (LoopMode::Open, "open")] {
        let cfg = FeedbackConfig { mode, ..base };
        let run = run_experiment(&cfg, &noise.stack, &params, run_seed)?;
        let residuals = run.residuals(cfg.f_target);
        out.add(format!("cycles_{label}.csv"), "per-cycle estimates and corrections", |w| {
            io::write_cycle_log(&run.cycles, w)
        })?;
        out.add(format!("shots_{label}.csv"), "probe shots of the first logged cycles", |w| {
            io::write_shot_log(run.cycles.iter().take(p.logged_shot_cycles).flat_map(|c| &c.shots), w)
        })?;
        let psd = estimate_psd(&residuals, cfg.budget(), PsdMethod::Periodogram, 1)?;
        out.add(format!("psd_{label}.csv"), "PSD of f_est - f_target", |w| io::write_psd(&psd, w))?;
        stats.insert(
            label.into(),
            json!({
                "residual_std_hz": sample_std(&residuals),
                "residual_mean_hz": mean(&residuals),
                "failed_estimates": run.cycles.iter().filter(|c| c.estimation_failed).count(),
                "cycles": run.cycles.len(),
            }),
        );
        psds.push((residuals, psd));
    }
    let closed_std = sample_std(&psds[0].0).unwrap_or(f64::NAN);
    let open_std = sample_std(&psds[1].0).unwrap_or(f64::NAN);
    let (pc, po) = (&psds[0].1, &psds[1].1);
    let low: Vec<usize> = (1..pc.freqs.len()).filter(|&k| pc.freqs[k] < 0.1).collect();
    let suppressed = low.iter().filter(|&&k| pc.power[k] <= 0.5 * po.power[k]).count();
    stats.insert("sigma_static_predicted_hz".into(), json!(noise.sigma_static));
    stats.insert("closed_over_sigma_static".into(), json!(closed_std / noise.sigma_static));
    stats.insert("closed_over_open".into(), json!(closed_std / open_std));
    stats.insert("cycle_budget_s".into(), json!(base.budget()));
    stats.insert(
        "low_frequency_suppression".into(),
        json!({
            "below_hz": 0.1,
            "bins": low.len(),
            "bins_halved": suppressed,
        }),
    );
    out.summary = Value::Object(stats);
    Ok(out)
}

fn load_series(
    cfg: &ScenarioConfig,
    input: &Option<std::path::PathBuf>,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<(NoiseTrace<f64>, Option<f64>), RunError> {
    match input {
        Some(path) => {
            let full = cfg.resolve(path);
            let file = std::fs::File::open(&full).map_err(|source| RunError::Input {
                path: full.display().to_string(),
                source,
            })?;
            Ok((io::read_trace(file, &full.display().to_string())?, None))
        }
        None => {
            let built = build_noise(noise, seed)?;
            Ok((built.stack.base, Some(built.sigma_static)))
        }
    }
}

fn decimate(trace: &NoiseTrace<f64>, period: f64) -> Result<Vec<f64>, RunError> {
    let ratio = period / trace.dt;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-6 * m {
        return Err(RunError::Invalid(format!(
            "sample_period {period} s is not a positive multiple of the trace dt {} s",
            trace.dt
        )));
    }
    Ok(trace.samples.iter().step_by(m as usize).copied().collect())
}

fn psd_analysis(cfg: &ScenarioConfig, p: &PsdParams, seed: u64) -> Result<Outputs, RunError> {
    let (trace, _) = load_series(cfg, &p.input_trace, &p.noise, seed)?;
    let series = decimate(&trace, p.sample_period.value)?;
    let method = if p.segments > 1 {
        PsdMethod::AveragedSegments
    } else {
        PsdMethod::Periodogram
    };
    let psd = estimate_psd(&series, p.sample_period.value, method, p.segments)?;
    let fit = fit_powerlaw(&psd, (p.fit_low.value, p.fit_high.value))?;
    let mut out = Outputs::default();
    out.add("psd.csv", "one-sided PSD of the sampled series", |w| io::write_psd(&psd, w))?;
    out.add_json("fit.json", "power-law fit S(f) = A f^-beta", &fit)?;
    out.summary = json!({
        "n_samples": series.len(),
        "sample_period_s": p.sample_period.value,
        "amplitude_hz2_per_hz": fit.amplitude,
        "exponent": fit.exponent,
        "fit_bins": fit.n_bins,
        "log10_rms_residual": fit.residual,
        "method": method,
        "segments": psd.n_segments,
    });
    Ok(out)
}

fn diffusion_analysis(cfg: &ScenarioConfig, p: &DiffusionParams, seed: u64) -> Result<Outputs, RunError> {
    let (trace, _) = load_series(cfg, &p.input_trace, &p.noise, seed)?;
    let series = decimate(&trace, p.sample_period.value)?;
    let intervals: Vec<f64> = p.intervals.iter().map(|t| t.value).collect();
    let fit = fit_diffusion(&series, p.sample_period.value, &intervals)?;
    let mut out = Outputs::default();
    out.add("diffusion.csv", "increment variance per interval", |w| io::write_diffusion(&fit, w))?;
    out.summary = json!({
        "n_samples": series.len(),
        "alpha": fit.alpha,
        "d_alpha_hz2_per_s_alpha": fit.d_alpha,
    });
    Ok(out)
}

fn predict_t2(p: &PredictParams) -> Result<Outputs, RunError> {
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    let (f0, f1) = (p.f0.value, p.f1.value);
    for s in &p.spectra {
        let spec = PowerLawSpec::new(s.amplitude.value, s.exponent, f0, f1)?;
        let qs = predict_t2star(&spec, f0, f1, PredictionMode::QuasiStatic)?;
        let full = predict_t2star(
            &spec,
            f0,
            f1,
            PredictionMode::FullIntegral {
                f_max: p.f_max.map(|f| f.value),
            },
        )?;
        let qs = qs.decoherence().copied();
        let full = full.decoherence().copied();
        let ts: Vec<f64> = (1..=p.curve_points)
            .map(|i| p.curve_t_max.value * i as f64 / p.curve_points as f64)
            .collect();
        let mut w_full = Vec::with_capacity(ts.len());
        for &t in &ts {
            let upper = p.f_max.map_or_else(|| default_f_max(t), |f| f.value);
            w_full.push(decoherence_w(t, &spec, f0, upper)?);
        }
        let w_qs: Vec<f64> = ts.iter().map(|&t| quasi_static_w(t, &spec, f0, f1)).collect();
        out.add(
            format!("decoherence_{}.csv", s.label),
            "W(t) from the full integral and the quasi-static limit",
            |w| {
                let mut wr = csv::Writer::from_writer(w);
                wr.write_record(["t_s", "w_full", "w_quasi_static"])?;
                for ((t, a), b) in ts.iter().zip(&w_full).zip(&w_qs) {
                    wr.write_record([t.to_string(), a.to_string(), b.to_string()])?;
                }
                wr.flush()?;
                Ok(())
            },
        )?;
        summary.insert(
            s.label.clone(),
            json!({
                "amplitude_hz2_per_hz": s.amplitude.value,
                "exponent": s.exponent,
                "sigma_static_hz": qs.map(|d| d.sigma_static),
                "t2_star_quasi_static_s": qs.map(|d| d.t2_star),
                "t2_star_full_integral_s": full.map(|d| d.t2_star),
                "decoheres": qs.is_some(),
            }),
        );
        rows.push((s.label.clone(), qs, full));
    }
    out.add("predictions.csv", "sigma_static and T2* per spectrum", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["label", "sigma_static_hz", "t2_quasi_static_s", "t2_full_integral_s"])?;
        let cell = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        for (label, qs, full) in &rows {
            wr.write_record([
                label.clone(),
                cell(qs.map(|d| d.sigma_static)),
                cell(qs.map(|d| d.t2_star)),
                cell(full.map(|d| d.t2_star)),
            ])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    out.summary = json!({
        "f0_hz": f0,
        "f1_hz": f1,
        "spectra": Value::Object(summary),
    });
    Ok(out)
}

fn gst_violation(cfg: &ScenarioConfig, p: &GstParams) -> Result<Outputs, RunError> {
    let path = cfg.resolve(&p.dataset);
    let file = std::fs::File::open(&path).map_err(|source| RunError::Input {
        path: path.display().to_string(),
        source,
    })?;
    let records = markovianity::read_dataset::<f64, _>(file, p.k)?;
    let report = markovianity::aggregate(&records, p.confidence)?;
    let mut out = Outputs::default();
    out.add("violations.csv", "per-circuit statistic and flag", |w| io::write_violations(&report, w))?;
    out.add("totals.csv", "summed statistic per max length", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["L", "two_delta_loglik_total", "n_circuits", "n_infinite"])?;
        for (l, total) in &report.aggregate_by_length {
            let n = report.per_circuit.iter().filter(|c| c.max_length == *l).count();
            let inf = report.infinite_by_length.get(l).copied().unwrap_or(0);
            wr.write_record([l.to_string(), total.to_string(), n.to_string(), inf.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    out.add_json("report.json", "full violation report", &report)?;
    let totals: serde_json::Map<String, Value> = report
        .aggregate_by_length
        .iter()
        .map(|(l, v)| (l.to_string(), json!(v)))
        .collect();
    out.summary = json!({
        "circuits": report.per_circuit.len(),
        "k": p.k,
        "confidence": p.confidence,
        "violation_threshold": report.thresholds.first().map(|t| t.violation_above),
        "totals_by_length": totals,
        "totals_rendered": markovianity::render_totals(&report),
        "total": report.total(),
        "flags": {
            "consistent": report.count(Flag::Consistent),
            "fluctuation": report.count(Flag::Fluctuation),
            "violation": report.count(Flag::Violation),
        },
    });
    Ok(out)
}

/// Writes artifacts, `summary.json` and `manifest.json` into `dir`.
pub fn write_outputs(cfg: &ScenarioConfig, outputs: Outputs, dir: &Path) -> Result<Vec<String>, RunError> {
    let io_err = |source: std::io::Error| RunError::Input {
        path: dir.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut files = Vec::new();
    let mut write = |name: &str, description: &str, bytes: &[u8]| -> Result<(), RunError> {
        std::fs::write(dir.join(name), bytes).map_err(|source| RunError::Input {
            path: dir.join(name).display().to_string(),
            source,
        })?;
        files.push(json!({ "name": name, "bytes": bytes.len(), "description": description }));
        Ok(())
    };
    for a in &outputs.artifacts {
        write(&a.name, a.description, &a.bytes)?;
    }
    let mut summary = serde_json::to_vec_pretty(&json!({
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "results": outputs.summary,
    }))
    .map_err(|e| RunError::Invalid(e.to_string()))?;
    summary.push(b'\n');
    write("summary.json", "headline numbers", &summary)?;
    let names: Vec<String> = files.iter().map(|f| f["name"].as_str().unwrap_or_default().to_string()).collect();
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config": cfg,
        "files": files,
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Invalid(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(dir.join("manifest.json"), bytes).map_err(io_err)?;
    Ok(names)
}
