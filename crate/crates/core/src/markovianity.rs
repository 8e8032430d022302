//! Gate-set goodness-of-fit: per-circuit log-likelihood-ratio statistic,
//! chi-squared classification and per-length aggregation.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Model probabilities of observed outcomes are clamped to this value.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("circuit {circuit_id}: {reason}")]
    InvalidRecord { circuit_id: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("no circuits to aggregate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord<T> {
    pub circuit_id: String,
    pub germ: String,
    pub max_length: u32,
    pub counts: Vec<u64>,
    pub model_probs: Vec<T>,
    /// Degrees of freedom; always supplied by the caller.
    pub k: u32,
}

impl<T: Real> CircuitRecord<T> {
    pub fn validate(&self) -> Result<(), MarkovError> {
        let fail = |reason: String| {
            Err(MarkovError::InvalidRecord {
                circuit_id: self.circuit_id.clone(),
                reason,
            })
        };
        if self.counts.len() != self.model_probs.len() {
            return fail(format!(
                "{} counts but {} model probabilities",
                self.counts.len(),
                self.model_probs.len()
            ));
        }
        if self.counts.iter().sum::<u64>() == 0 {
            return fail("total count must be >= 1".into());
        }
        if self.k == 0 {
            return fail("k must be >= 1".into());
        }
        if self.model_probs.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return fail("model probabilities must lie in [0, 1]".into());
        }
        let total: f64 = self.model_probs.iter().map(|p| p.to_f64_lossy()).sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("model probabilities sum to {total}, not 1"));
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// `2 Delta log L` for one circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Statistic<T> {
    Finite(T),
    /// An outcome was observed that the model forbids outright.
    InfiniteEvidence,
}

impl<T: Real> Statistic<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Statistic::Finite(v) => Some(v),
            Statistic::InfiniteEvidence => None,
        }
    }
}

/// `2 sum_o N_o ln(f_o / p_o)` with `f_o = N_o / N`; zero counts contribute 0.
pub fn two_delta_loglik<T: Real>(record: &CircuitRecord<T>) -> Result<Statistic<T>, MarkovError> {
    record.validate()?;
    let n = record.total() as f64;
    let mut acc = 0.0_f64;
    for (&c, &p) in record.counts.iter().zip(&record.model_probs) {
        if c == 0 {
            continue;
        }
        let p = p.to_f64_lossy();
        if p == 0.0 {
            return Ok(Statistic::InfiniteEvidence);
        }
        let c = c as f64;
        acc += c * ((c / n) / p.max(PROBABILITY_FLOOR)).ln();
    }
    // Rounding can leave tiny negatives when f == p.
    Ok(Statistic::Finite(T::lit((2.0 * acc).max(0.0))))
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn regularized_gamma_p(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefix = s * x.ln() - x - ln_gamma(s);
    if x < s + 1.0 {
        // Series.
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut a = s;
        for _ in 0..10_000 {
            a += 1.0;
            term *= x / a;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // Continued fraction for Q (modified Lentz).
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - (log_prefix.exp() * h)).max(0.0)
    }
}

pub fn chi2_cdf(x: f64, k: u32) -> f64 {
    regularized_gamma_p(k as f64 / 2.0, x / 2.0)
}

/// Upper `confidence` quantile of chi-squared with `k` degrees of freedom.
pub fn chi2_quantile(confidence: f64, k: u32) -> Result<f64, MarkovError> {
    if k == 0 {
        return Err(MarkovError::InvalidArgument("k must be >= 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MarkovError::InvalidArgument("confidence must lie in (0, 1)".into()));
    }
    let kf = k as f64;
    let mut lo = 0.0;
    let mut hi = kf + 10.0 * (2.0 * kf).sqrt() + 10.0;
    while chi2_cdf(hi, k) < confidence {
        hi *= 2.0;
    }
    // Bisection to relative 1e-12, far inside the required 1e-8.
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, k) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Strictly inside `k -/+ sqrt(2k)`.
    Consistent,
    /// Above the chi-squared quantile at the requested confidence.
    Violation,
    /// Outside the band but not significant.
    Fluctuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub k: u32,
    pub confidence: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub violation_above: f64,
}

impl Thresholds {
    pub fn new(k: u32, confidence: f64) -> Result<Self, MarkovError> {
        if !(confidence > 0.5 && confidence < 1.0) {
            return Err(MarkovError::InvalidArgument(
                "confidence must lie in (0.5, 1)".into(),
            ));
        }
        let kf = k as f64;
        let half = (2.0 * kf).sqrt();
        Ok(Self {
            k,
            confidence,
            band_low: kf - half,
            band_high: kf + half,
            violation_above: chi2_quantile(confidence, k)?,
        })
    }

    pub fn classify(&self, statistic: f64) -> Flag {
        if statistic > self.band_low && statistic < self.band_high {
            Flag::Consistent
        } else if statistic > self.violation_above {
            Flag::Violation
        } else {
            Flag::Fluctuation
        }
    }
}

pub fn classify(statistic: f64, k: u32, confidence: f64) -> Result<Flag, MarkovError> {
    Ok(Thresholds::new(k, confidence)?.classify(statistic))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitResult<T> {
    pub circuit_id: String,
    pub germ: String,
    pub max_length: u32,
    pub k: u32,
    pub statistic: Statistic<T>,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport<T> {
    pub per_circuit: Vec<CircuitResult<T>>,
    pub confidence: f64,
    /// One entry per distinct k in the dataset.
    pub thresholds: Vec<Thresholds>,
    /// `L -> sum of finite statistics`.
    pub aggregate_by_length: BTreeMap<u32, T>,
    /// `L -> number of circuits with infinite evidence`.
    pub infinite_by_length: BTreeMap<u32, usize>,
}

impl<T: Real> ViolationReport<T> {
    pub fn total(&self) -> T {
        self.aggregate_by_length.values().copied().sum()
    }

    pub fn count(&self, flag: Flag) -> usize {
        self.per_circuit.iter().filter(|c| c.flag == flag).count()
    }
}

/// Scores every record and sums the statistics per max length.
/// Circuits are reported in `(L, circuit_id)` order.
pub fn aggregate<T: Real>(
    records: &[CircuitRecord<T>],
    confidence: f64,
) -> Result<ViolationReport<T>, MarkovError> {
    if records.is_empty() {
        return Err(MarkovError::Empty);
    }
    let mut order: Vec<&CircuitRecord<T>> = records.iter().collect();
    order.sort_by(|a, b| (a.max_length, &a.circuit_id).cmp(&(b.max_length, &b.circuit_id)));

    let mut thresholds: BTreeMap<u32, Thresholds> = BTreeMap::new();
    let mut per_circuit = Vec::with_capacity(order.len());
    let mut aggregate_by_length = BTreeMap::new();
    let mut infinite_by_length = BTreeMap::new();
    for r in order {
        let th = match thresholds.get(&r.k) {
            Some(t) => *t,
            None => *thresholds.entry(r.k).or_insert(Thresholds::new(r.k, confidence)?),
        };
        let statistic = two_delta_loglik(r)?;
        let flag = match statistic {
            Statistic::Finite(v) => th.classify(v.to_f64_lossy()),
            Statistic::InfiniteEvidence => Flag::Violation,
        };
        let sum = aggregate_by_length.entry(r.max_length).or_insert_with(T::zero);
        match statistic {
            Statistic::Finite(v) => *sum = *sum + v,
            Statistic::InfiniteEvidence => *infinite_by_length.entry(r.max_length).or_insert(0) += 1,
        }
        per_circuit.push(CircuitResult {
            circuit_id: r.circuit_id.clone(),
            germ: r.germ.clone(),
            max_length: r.max_length,
            k: r.k,
            statistic,
            flag,
        });
    }
    Ok(ViolationReport {
        per_circuit,
        confidence,
        thresholds: thresholds.into_values().collect(),
        aggregate_by_length,
        infinite_by_length,
    })
}

/// Per-length totals as `"a, b, c, and d"`, one decimal, trailing `.0` dropped.
pub fn render_totals<T: Real>(report: &ViolationReport<T>) -> String {
    let parts: Vec<String> = report
        .aggregate_by_length
        .values()
        .map(|v| {
            let s = format!("{:.1}", v.to_f64_lossy());
            s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
        })
        .collect();
    match parts.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

#[derive(Debug, Deserialize)]
struct DatasetRow {
    circuit_id: String,
    germ: String,
    #[serde(rename = "L")]
    max_length: u32,
    outcome: String,
    count: u64,
    model_prob: f64,
}

/// Reads `circuit_id,germ,L,outcome,count,model_prob` rows, one per outcome.
/// Rows of a circuit may be interleaved; outcome order follows first
/// appearance. The degrees of freedom `k` apply to every circuit.
pub fn read_dataset<T: Real, R: Read>(reader: R, k: u32) -> Result<Vec<CircuitRecord<T>>, MarkovError> {
    if k == 0 {
        return Err(MarkovError::InvalidArgument("k must be >= 1".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut records: Vec<CircuitRecord<T>> = Vec::new();
    let mut index: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
    for row in rdr.deserialize::<DatasetRow>() {
        let row = row.map_err(|e| MarkovError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let (idx, outcomes) = index.entry(row.circuit_id.clone()).or_insert_with(|| {
            records.push(CircuitRecord {
                circuit_id: row.circuit_id.clone(),
                germ: row.germ.clone(),
                max_length: row.max_length,
                counts: Vec::new(),
                model_probs: Vec::new(),
                k,
            });
            (records.len() - 1, Vec::new())
        });
        let rec = &mut records[*idx];
        if rec.germ != row.germ || rec.max_length != row.max_length {
            return Err(MarkovError::InvalidRecord {
                circuit_id: row.circuit_id,
                reason: "germ or L differs between rows".into(),
            });
        }
        if outcomes.contains(&row.outcome) {
            return Err(MarkovError::InvalidRecord {
                circuit_id: row.circuit_id,
                reason: format!("outcome {:?} listed twice", row.outcome),
            });
        }
        outcomes.push(row.outcome);
        rec.counts.push(row.count);
        rec.model_probs.push(T::lit(row.model_prob));
    }
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(counts: &[u64], probs: &[f64], k: u32) -> CircuitRecord<f64> {
        CircuitRecord {
            circuit_id: "c".into(),
            germ: "Gx".into(),
            max_length: 1,
            counts: counts.to_vec(),
            model_probs: probs.to_vec(),
            k,
        }
    }

    #[test]
    fn hand_values() {
        let v = two_delta_loglik(&rec(&[60, 40], &[0.5, 0.5], 1)).unwrap().finite().unwrap();
        assert!((v - 4.027).abs() < 1e-3);
        let v = two_delta_loglik(&rec(&[100, 0], &[0.5, 0.5], 1)).unwrap().finite().unwrap();
        assert!((v - 138.629).abs() < 1e-3);
        let v = two_delta_loglik(&rec(&[30, 70], &[0.3, 0.7], 1)).unwrap().finite().unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn forbidden_outcome_is_infinite_evidence() {
        let s = two_delta_loglik(&rec(&[5, 1], &[1.0, 0.0], 1)).unwrap();
        assert_eq!(s, Statistic::InfiniteEvidence);
    }

    #[test]
    fn invalid_records() {
        assert!(two_delta_loglik(&rec(&[1, 1], &[0.5, 0.4], 1)).is_err());
        assert!(two_delta_loglik(&rec(&[0, 0], &[0.5, 0.5], 1)).is_err());
        assert!(two_delta_loglik(&rec(&[1, 1], &[0.5, 0.5], 0)).is_err());
        assert!(two_delta_loglik(&rec(&[1], &[0.5, 0.5], 1)).is_err());
    }

    #[test]
    fn gamma_and_quantiles() {
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
        assert!((chi2_quantile(0.95, 1).unwrap() - 3.841_458_820_694_124).abs() < 1e-8);
        assert!((chi2_quantile(0.95, 9).unwrap() - 16.918_977_604_620_45).abs() < 1e-7);
        assert!((chi2_quantile(0.99, 5).unwrap() - 15.086_272_469_388_99).abs() < 1e-7);
        assert!((chi2_quantile(0.95, 100).unwrap() - 124.342_113_404_047_6).abs() < 1e-6);
    }

    #[test]
    fn classification_edges() {
        let k = 8;
        let th = Thresholds::new(k, 0.95).unwrap();
        assert_eq!(th.classify(8.0), Flag::Consistent);
        assert_eq!(th.classify(th.band_low), Flag::Fluctuation);
        assert_eq!(th.classify(th.band_high), Flag::Fluctuation);
        assert_eq!(th.classify(th.violation_above + 1e-9), Flag::Violation);
        assert_eq!(classify(0.0, 4, 0.95).unwrap(), Flag::Fluctuation);
        // k - sqrt(2k) < 0 for k = 1, so zero sits inside the band.
        assert_eq!(classify(0.0, 1, 0.95).unwrap(), Flag::Consistent);
        assert!(classify(1.0, 1, 0.4).is_err());
    }

    #[test]
    fn aggregation_orders_and_sums() {
        let mut a = rec(&[60, 40], &[0.5, 0.5], 1);
        a.circuit_id = "b".into();
        a.max_length = 2;
        let mut b = rec(&[50, 50], &[0.5, 0.5], 1);
        b.circuit_id = "a".into();
        b.max_length = 2;
        let c = rec(&[100, 0], &[0.5, 0.5], 1);
        let report = aggregate(&[a, b, c], 0.95).unwrap();
        let ids: Vec<_> = report.per_circuit.iter().map(|c| c.circuit_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(report.aggregate_by_length.len(), 2);
        assert!((report.aggregate_by_length[&1] - 138.629).abs() < 1e-3);
        assert!(aggregate::<f64>(&[], 0.95).is_err());
    }

    #[test]
    fn rendering() {
        let mut report = aggregate(&[rec(&[60, 40], &[0.5, 0.5], 1)], 0.95).unwrap();
        report.aggregate_by_length = [(1, 475.7), (2, 3122.8), (4, 4805.3), (8, 6169.1), (16, 8445.5)]
            .into_iter()
            .collect();
        assert_eq!(render_totals(&report), "475.7, 3122.8, 4805.3, 6169.1, and 8445.5");
        report.aggregate_by_length = [(1, 3.0), (2, 2.3)].into_iter().collect();
        assert_eq!(render_totals(&report), "3 and 2.3");
    }

    #[test]
    fn dataset_parsing() {
        let text = "circuit_id,germ,L,outcome,count,model_prob\n\
                    s1,Gx,1,0,60,0.5\n\
                    s2,Gy,2,0,10,0.25\n\
                    s1,Gx,1,1,40,0.5\n\
                    s2,Gy,2,1,30,0.75\n";
        let recs: Vec<CircuitRecord<f64>> = read_dataset(text.as_bytes(), 1).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].counts, [60, 40]);
        assert_eq!(recs[1].model_probs, [0.25, 0.75]);
        let bad = "circuit_id,germ,L,outcome,count,model_prob\ns1,Gx,1,0,sixty,0.5\n";
        assert!(matches!(
            read_dataset::<f64, _>(bad.as_bytes(), 1),
            Err(MarkovError::Parse { line: 2, .. })
        ));
    }
}
