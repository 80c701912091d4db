//! Attribute-level comparison of two datasets: moments of `[0,1]`-normalized
//! numerics, two-sample Kolmogorov–Smirnov tests, and Hellinger distances
//! between category frequencies.

use serde::{Deserialize, Serialize};

use crate::dataset::{ensure_same_schema, AttributeKind, Dataset, DatasetError};

/// Significance level for counting KS rejections.
pub const KS_ALPHA: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample is degenerate (fewer than 2 values or zero variance)")]
    DegenerateSample,
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
}

/// Sample moments. `std` uses divisor `n - 1`; skewness is `m3 / m2^1.5`
/// and kurtosis is the excess `m4 / m2^2 - 3`, with central moments `m_k`
/// taken with divisor `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn moments(values: &[f64]) -> Result<Moments, StatsError> {
    let n = values.len();
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if n < 2 {
        return Err(StatsError::DegenerateSample);
    }
    let m = mean(values);
    let nf = n as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 == 0.0 {
        return Err(StatsError::DegenerateSample);
    }
    let std = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    Ok(Moments { mean: m, std, skewness: m3 / m2.powf(1.5), kurtosis: m4 / (m2 * m2) - 3.0 })
}

/// `(1/sqrt 2) * || sqrt(p) - sqrt(q) ||_2`.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    for (name, d) in [("p", p), ("q", q)] {
        if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(StatsError::NotADistribution(format!("{name} has a negative or non-finite entry")));
        }
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(StatsError::NotADistribution(format!("{name} sums to {s}")));
        }
    }
    if p.len() != q.len() {
        return Err(StatsError::NotADistribution("p and q have different supports".into()));
    }
    let ss: f64 = p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((ss / 2.0).sqrt().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (a * kf * kf).exp();
        sum += term;
        if term.abs() < 1e-12 {
            return (2.0 * sum).clamp(0.0, 1.0);
        }
        sign = -sign;
    }
    // the alternating series does not settle for tiny lambda, where Q ~ 1
    1.0
}

/// Two-sample KS test. The statistic is the largest ECDF gap evaluated at
/// every distinct pooled value; the p-value uses the asymptotic Kolmogorov
/// distribution with the small-sample correction
/// `lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D`, `ne = n1 n2 / (n1 + n2)`.
pub fn ks_test(x: &[f64], y: &[f64]) -> Result<KsResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < n1 && j < n2 {
        let v = xs[i].min(ys[j]);
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// Per-attribute detail of a comparison. Differences are `first - second`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeComparison {
    pub name: String,
    pub kind: AttributeKind,
    pub delta_mean: Option<f64>,
    pub delta_std: Option<f64>,
    pub delta_skewness: Option<f64>,
    pub delta_kurtosis: Option<f64>,
    pub ks: Option<KsResult>,
    pub hellinger: Option<f64>,
}

/// Averages over attributes. Fields are `None` when no attribute of the
/// relevant kind exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub delta_mean: Option<f64>,
    pub delta_std: Option<f64>,
    /// Averaged over attributes where skewness is defined in both datasets.
    pub delta_skew: Option<f64>,
    pub delta_kurt: Option<f64>,
    /// Percentage of numeric attributes with KS p-value below [`KS_ALPHA`].
    pub ks_reject_pct: Option<f64>,
    pub mean_hellinger: Option<f64>,
    pub attributes: Vec<AttributeComparison>,
}

fn average(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Compare every non-class attribute of two datasets with the same schema.
/// Numeric attributes are normalized with the pooled min/max of both
/// datasets; missing cells are ignored.
pub fn compare(d1: &Dataset, d2: &Dataset) -> Result<StatsSummary, DatasetError> {
    ensure_same_schema(d1, d2)?;
    let schema = d1.schema();
    let mut attributes = Vec::new();
    for j in schema.feature_indices() {
        let attr = &schema.attributes()[j];
        let mut cmp = AttributeComparison {
            name: attr.name.clone(),
            kind: attr.kind,
            delta_mean: None,
            delta_std: None,
            delta_skewness: None,
            delta_kurtosis: None,
            ks: None,
            hellinger: None,
        };
        match attr.kind {
            AttributeKind::Numeric => {
                let a: Vec<f64> = d1.rows().iter().filter_map(|r| r[j].as_numeric()).collect();
                let b: Vec<f64> = d2.rows().iter().filter_map(|r| r[j].as_numeric()).collect();
                if !a.is_empty() && !b.is_empty() {
                    let lo = a.iter().chain(&b).copied().fold(f64::INFINITY, f64::min);
                    let hi = a.iter().chain(&b).copied().fold(f64::NEG_INFINITY, f64::max);
                    let span = hi - lo;
                    let norm = |v: &Vec<f64>| -> Vec<f64> { v.iter().map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 }).collect() };
                    let (a, b) = (norm(&a), norm(&b));
                    cmp.delta_mean = Some(mean(&a) - mean(&b));
                    cmp.delta_std = Some(sample_std(&a) - sample_std(&b));
                    if let (Ok(ma), Ok(mb)) = (moments(&a), moments(&b)) {
                        cmp.delta_skewness = Some(ma.skewness - mb.skewness);
                        cmp.delta_kurtosis = Some(ma.kurtosis - mb.kurtosis);
                    }
                    cmp.ks = ks_test(&a, &b).ok();
                }
            }
            AttributeKind::Nominal => {
                let freq = |d: &Dataset| -> Option<Vec<f64>> {
                    let mut counts = vec![0.0; attr.categories.len()];
                    let mut n = 0.0;
                    for r in d.rows() {
                        if let Some(c) = r[j].as_category() {
                            counts[c] += 1.0;
                            n += 1.0;
                        }
                    }
                    (n > 0.0).then(|| counts.into_iter().map(|c| c / n).collect())
                };
                if let (Some(p), Some(q)) = (freq(d1), freq(d2)) {
                    cmp.hellinger = hellinger(&p, &q).ok();
                }
            }
        }
        attributes.push(cmp);
    }

    let ks: Vec<&KsResult> = attributes.iter().filter_map(|a| a.ks.as_ref()).collect();
    let ks_reject_pct = (!ks.is_empty()).then(|| 100.0 * ks.iter().filter(|k| k.p_value < KS_ALPHA).count() as f64 / ks.len() as f64);
    Ok(StatsSummary {
        delta_mean: average(attributes.iter().filter_map(|a| a.delta_mean)),
        delta_std: average(attributes.iter().filter_map(|a| a.delta_std)),
        delta_skew: average(attributes.iter().filter_map(|a| a.delta_skewness)),
        delta_kurt: average(attributes.iter().filter_map(|a| a.delta_kurtosis)),
        ks_reject_pct,
        mean_hellinger: average(attributes.iter().filter_map(|a| a.hellinger)),
        attributes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_examples() {
        let m = moments(&[0.0, 1.0]).unwrap();
        assert_eq!(m.mean, 0.5);
        assert!((m.std - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(moments(&[0.0, 0.5, 1.0]).unwrap().skewness, 0.0);
        assert_eq!(moments(&[0.3, 0.3, 0.3]), Err(StatsError::DegenerateSample));
        assert_eq!(moments(&[0.3]), Err(StatsError::DegenerateSample));
        assert_eq!(moments(&[]), Err(StatsError::EmptySample));
    }

    #[test]
    fn kurtosis_of_two_point_sample() {
        // symmetric two-point distribution: m4 / m2^2 = 1
        let m = moments(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!((m.kurtosis - (1.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn hellinger_examples() {
        assert_eq!(hellinger(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(hellinger(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        // sqrt((sqrt .5 - sqrt .25)^2 + (sqrt .5 - sqrt .75)^2) / sqrt 2
        let h = hellinger(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((h - 0.184_591_9).abs() < 1e-6, "{h}");
        assert!(matches!(hellinger(&[0.5, 0.4], &[0.5, 0.5]), Err(StatsError::NotADistribution(_))));
    }

    #[test]
    fn ks_examples() {
        let r = ks_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(ks_test(&[0.0, 0.1], &[1.0, 2.0, 3.0]).unwrap().statistic, 1.0);
        assert_eq!(ks_test(&[1.0, 2.0], &[1.5, 2.5]).unwrap().statistic, 0.5);
        assert_eq!(ks_test(&[], &[1.0]), Err(StatsError::EmptySample));
    }

    #[test]
    fn kolmogorov_q_reference_points() {
        // Q(1) = 0.26999967..., Q(0.5) = 0.96394524...
        assert!((kolmogorov_q(1.0) - 0.269_999_67).abs() < 1e-7);
        assert!((kolmogorov_q(0.5) - 0.963_945_24).abs() < 1e-7);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }
}
