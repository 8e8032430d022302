use driftlock_core::estimator::{init_prior, likelihood, GridShape, LikelihoodParams, PriorSpec};
use driftlock_core::markovianity::{aggregate, chi2_cdf, chi2_quantile, two_delta_loglik, CircuitRecord, Statistic};
use driftlock_core::noise::{compose, synthesize_powerlaw, synthesize_white, PowerLawSpec};
use driftlock_core::qubit::{Outcome, ShotRecord};
use driftlock_core::spectra::{
    estimate_psd, fit_powerlaw, phase_integral, quasi_static_variance, quasi_static_w, PsdEstimate, PsdMethod,
};
use proptest::prelude::*;

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn shots(times: &[f64], downs: &[bool]) -> Vec<ShotRecord<f64>> {
    times
        .iter()
        .zip(downs)
        .map(|(&t, &d)| ShotRecord {
            evolution_time: t,
            outcome: if d { Outcome::Down } else { Outcome::Up },
            timestamp: 0.0,
            mw_detuning: 0.0,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodogram_preserves_variance(xs in prop::collection::vec(-1e3f64..1e3, 4..300), dt in 1e-4f64..1.0) {
        let psd = estimate_psd(&xs, dt, PsdMethod::Periodogram, 1).unwrap();
        let var = population_variance(&xs);
        prop_assert!((psd.integrated_power() - var).abs() <= 1e-9 * var.max(1e-12));
    }

    #[test]
    fn exact_power_law_fit_recovers_parameters(a in 1e-3f64..1e6, beta in 0.0f64..3.0) {
        let df = 0.01;
        let freqs: Vec<f64> = (0..2000).map(|k| k as f64 * df).collect();
        let power = freqs.iter().map(|&f| if f > 0.0 { a * f.powf(-beta) } else { 0.0 }).collect();
        let psd = PsdEstimate { freqs, power, method: PsdMethod::Periodogram, n_segments: 1, dt: 1.0 / (2.0 * 2000.0 * df) };
        let fit = fit_powerlaw(&psd, (0.05, 10.0)).unwrap();
        prop_assert!((fit.exponent - beta).abs() < 1e-9);
        prop_assert!((fit.amplitude / a - 1.0).abs() < 1e-9);
    }

    #[test]
    fn likelihood_is_periodic_in_frequency(f in -1e7f64..1e7, t in 40e-9f64..4e-6, n in -5i32..5, down in any::<bool>()) {
        let lk = LikelihoodParams { alpha: 0.1, beta_vis: 0.8, theta: 0.3 };
        let sign = if down { 1 } else { -1 };
        let a = likelihood(f, t, sign, &lk);
        let b = likelihood(f + f64::from(n) / t, t, sign, &lk);
        prop_assert!((a - b).abs() < 1e-6);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn compose_is_pointwise_sum(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = synthesize_white(3.0, 1.0, 0.01, s1).unwrap();
        let b = synthesize_white(5.0, 1.0, 0.01, s2).unwrap();
        let c = compose(&[a.clone(), b.clone()]).unwrap();
        for ((x, y), z) in a.samples.iter().zip(&b.samples).zip(&c.samples) {
            prop_assert_eq!(x + y, *z);
        }
    }

    #[test]
    fn synthesis_scales_with_square_root_of_amplitude(seed in any::<u64>(), a in 1e-3f64..1e3) {
        let base = PowerLawSpec::new(1.0, 1.2, 0.01, 50.0).unwrap();
        let scaled = PowerLawSpec::new(a, 1.2, 0.01, 50.0).unwrap();
        let x = synthesize_powerlaw(&base, 20.0, 0.01, seed).unwrap();
        let y = synthesize_powerlaw(&scaled, 20.0, 0.01, seed).unwrap();
        for (p, q) in x.samples.iter().zip(&y.samples) {
            prop_assert!((p * a.sqrt() - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn posterior_stays_normalized(
        mean in 0.0f64..12.5e6,
        times in prop::collection::vec(40e-9f64..4e-6, 1..60),
        downs in prop::collection::vec(any::<bool>(), 60),
    ) {
        let lk = LikelihoodParams { alpha: 0.05, beta_vis: 0.9, theta: 0.0 };
        let (mut grid, _) = init_prior(&PriorSpec::Gaussian { mean, sigma: 1e6 }, &GridShape::default()).unwrap();
        let mut batch = grid.clone();
        let record = shots(&times, &downs);
        for s in &record {
            grid.update(s, &lk).unwrap();
        }
        batch.update_batch(&record, &lk).unwrap();
        prop_assert!((grid.total_mass() - 1.0).abs() < 1e-9);
        prop_assert!((batch.total_mass() - 1.0).abs() < 1e-9);
        for (p, q) in grid.log_weights.iter().zip(&batch.log_weights) {
            if *p > -30.0 {
                prop_assert!((p - q).abs() < 1e-6, "{} vs {}", p, q);
            }
        }
    }

    #[test]
    fn quasi_static_w_decreases_below_half_period(beta in 0.0f64..3.0, t1 in 1e-8f64..1e-5, r in 1.0f64..10.0) {
        // Band [f0, f1] with f0 t < 1/2 for both times.
        let spec = PowerLawSpec::new(1e9, beta, 1e-3, 1e3).unwrap();
        let t2 = t1 * r;
        let w1 = quasi_static_w(t1, &spec, 1e-3, 1e3);
        let w2 = quasi_static_w(t2, &spec, 1e-3, 1e3);
        prop_assert!(w2 <= w1);
        prop_assert!((0.0..=1.0).contains(&w1));
    }

    #[test]
    fn filtered_integral_never_exceeds_quasi_static(beta in 0.0f64..3.0, t in 1e-7f64..1e-2, decades in 1.0f64..6.0) {
        let f0 = 1e-2;
        let f1 = f0 * 10f64.powf(decades);
        let spec = PowerLawSpec::new(1.0, beta, f0, f1).unwrap();
        let full = phase_integral(t, &spec, f0, f1).unwrap().value;
        let quasi = quasi_static_variance(1.0, beta, f0, f1);
        prop_assert!(full <= quasi * (1.0 + 1e-9));
        prop_assert!(full > 0.0);
    }

    #[test]
    fn log_likelihood_ratio_is_non_negative(
        counts in prop::collection::vec(0u64..5000, 2..6),
        raw in prop::collection::vec(0.01f64..1.0, 6),
    ) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let raw = &raw[..counts.len()];
        let total: f64 = raw.iter().sum();
        let record = CircuitRecord {
            circuit_id: "c".into(),
            germ: "g".into(),
            max_length: 1,
            model_probs: raw.iter().map(|p| p / total).collect(),
            counts,
            k: 1,
        };
        match two_delta_loglik(&record).unwrap() {
            Statistic::Finite(v) => prop_assert!(v >= 0.0),
            Statistic::InfiniteEvidence => prop_assert!(false, "positive probabilities"),
        }
    }

    #[test]
    fn aggregate_totals_are_additive(stats in prop::collection::vec((1u32..5, 0u64..1000), 1..30)) {
        let records: Vec<CircuitRecord<f64>> = stats
            .iter()
            .enumerate()
            .map(|(i, &(l, n0))| CircuitRecord {
                circuit_id: format!("c{i}"),
                germ: "g".into(),
                max_length: 1 << l,
                counts: vec![n0, 1000 - n0],
                model_probs: vec![0.5, 0.5],
                k: 1,
            })
            .collect();
        let report = aggregate(&records, 0.95).unwrap();
        for (&l, &total) in &report.aggregate_by_length {
            let sum: f64 = records
                .iter()
                .filter(|r| r.max_length == l)
                .map(|r| two_delta_loglik(r).unwrap().finite().unwrap())
                .sum();
            prop_assert!((total - sum).abs() <= 1e-9 * sum.max(1.0));
        }
        let grand: f64 = report.aggregate_by_length.values().sum();
        prop_assert!((report.total() - grand).abs() <= 1e-9 * grand.max(1.0));
    }

    #[test]
    fn chi2_quantile_inverts_cdf(k in 1u32..40, c in 0.01f64..0.999) {
        let q = chi2_quantile(c, k).unwrap();
        prop_assert!((chi2_cdf(q, k) - c).abs() < 1e-8);
    }
}

#[test]
fn synthesized_variance_matches_band_integral() {
    let spec = PowerLawSpec::new(1.75e9, 1.17, 1e-3, 1e9).unwrap();
    let (duration, dt) = (100.0, 1e-3);
    let (f0, f1) = (1.0 / duration, 1.0 / (2.0 * dt));
    let expected = spec.integrated(f0, f1);
    let seeds = 200;
    let mean: f64 = (0..seeds)
        .map(|s| population_variance(&synthesize_powerlaw(&spec, duration, dt, s).unwrap().samples))
        .sum::<f64>()
        / seeds as f64;
    // The lowest bins dominate, so the spread per seed is large; 200 seeds
    // put the mean within a few percent.
    assert!((mean / expected - 1.0).abs() < 0.1, "{mean} vs {expected}");
}

#[test]
fn synthesis_is_seed_deterministic() {
    let spec = PowerLawSpec::new(1.0, 1.0, 0.1, 100.0).unwrap();
    let a = synthesize_powerlaw(&spec, 10.0, 1e-3, 9).unwrap();
    let b = synthesize_powerlaw(&spec, 10.0, 1e-3, 9).unwrap();
    let c = synthesize_powerlaw(&spec, 10.0, 1e-3, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.samples, c.samples);
}

#[test]
fn single_precision_matches_double() {
    let spec64 = PowerLawSpec::new(1.75e9, 1.17, 1e-3, 1e3).unwrap();
    let spec32 = PowerLawSpec::<f32>::new(1.75e9, 1.17, 1e-3, 1e3).unwrap();
    let a = quasi_static_variance(spec64.amplitude, spec64.exponent, 0.01, 500.0);
    let b = quasi_static_variance(spec32.amplitude, spec32.exponent, 0.01, 500.0);
    assert!((f64::from(b) / a - 1.0).abs() < 1e-5);
}
