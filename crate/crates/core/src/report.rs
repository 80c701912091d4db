//! One-row quality summary of a generated dataset against its original.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classeval::{cross_performance, ClassEvalError, ClassEvalResult, ForestConfig};
use crate::clustering::{cross_compare, ClusteringError};
use crate::dataset::{ensure_same_schema, Dataset, DatasetError};
use crate::generator::GeneratorSpec;
use crate::rng::derive_seed;
use crate::sampler::{equal_fraction, generate, SamplingConfig, SamplingError};
use crate::stats::{compare, StatsSummary};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    ClassEval(#[from] ClassEvalError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    /// Generated datasets whose ARI is averaged. Only used when a generator
    /// is available to draw the extra datasets.
    pub repeats_ari: usize,
    pub repeats_cv: usize,
    pub seed: u64,
    pub forest: ForestConfig,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { repeats_ari: 10, repeats_cv: 5, seed: 0, forest: ForestConfig::default() }
    }
}

/// Generator provenance recorded in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub kernel_count: usize,
    pub build_seconds: f64,
    pub min_w: usize,
    pub nominal_as_binary: bool,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub build_seed: u64,
}

impl From<&GeneratorSpec> for GeneratorInfo {
    fn from(spec: &GeneratorSpec) -> Self {
        Self {
            kernel_count: spec.kernel_count(),
            build_seconds: spec.meta.build_seconds,
            min_w: spec.meta.min_w,
            nominal_as_binary: spec.meta.nominal_as_binary,
            theta_plus: spec.meta.theta_plus,
            theta_minus: spec.meta.theta_minus,
            build_seed: spec.meta.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub dataset: String,
    pub generator: Option<GeneratorInfo>,
    /// Fraction of generated rows equal to some original row.
    pub equal_fraction: f64,
    pub stats: StatsSummary,
    /// Mean ARI over `ari_runs` generated datasets.
    pub ari: f64,
    pub ari_runs: Vec<f64>,
    pub classification: ClassEvalResult,
    pub params: EvalParams,
    /// Seed of the sampling configuration that produced the extra
    /// generated datasets, if any.
    pub sampling_seed: Option<u64>,
    pub original_size: usize,
    pub generated_size: usize,
}

/// Compare `generated` with `original` using the statistical, clustering
/// and classification workflows. With `regenerate`, `params.repeats_ari - 1`
/// further datasets are drawn from the generator (seeds derived from the
/// sampling seed) and the ARI is averaged over all of them.
pub fn evaluate(
    name: &str,
    original: &Dataset,
    generated: &Dataset,
    params: &EvalParams,
    regenerate: Option<(&GeneratorSpec, &SamplingConfig)>,
) -> Result<QualityReport, ReportError> {
    ensure_same_schema(original, generated)?;
    let stats = compare(original, generated)?;
    let equal = equal_fraction(original, generated)?;
    let mut ari_runs = vec![cross_compare(original, generated, params.seed)?];
    if let Some((spec, cfg)) = regenerate {
        for r in 1..params.repeats_ari.max(1) {
            let cfg = SamplingConfig { seed: derive_seed(cfg.seed, r as u64), ..cfg.clone() };
            ari_runs.push(cross_compare(original, &generate(spec, &cfg)?, params.seed)?);
        }
    }
    let ari = ari_runs.iter().sum::<f64>() / ari_runs.len() as f64;
    let classification = cross_performance(original, generated, params.repeats_cv, &params.forest, params.seed)?;
    Ok(QualityReport {
        dataset: name.to_string(),
        generator: regenerate.map(|(spec, _)| GeneratorInfo::from(spec)),
        equal_fraction: equal,
        stats,
        ari,
        ari_runs,
        classification,
        params: params.clone(),
        sampling_seed: regenerate.map(|(_, cfg)| cfg.seed),
        original_size: original.len(),
        generated_size: generated.len(),
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

impl QualityReport {
    /// Header plus one row, accuracies in percent with one decimal.
    pub fn table(&self) -> String {
        let c = &self.classification;
        let g = self.generator.as_ref();
        let cols = [
            ("dataset", self.dataset.clone()),
            ("G", g.map_or("-".into(), |g| g.kernel_count.to_string())),
            ("t", g.map_or("-".into(), |g| format!("{:.2}", g.build_seconds))),
            ("=", format!("{:.3}", self.equal_fraction)),
            ("dmean", opt(self.stats.delta_mean, 3)),
            ("dstd", opt(self.stats.delta_std, 3)),
            ("KSp", opt(self.stats.ks_reject_pct, 1)),
            ("H", opt(self.stats.mean_hellinger, 3)),
            ("ARI", format!("{:.3}", self.ari)),
            ("m1d1", format!("{:.1}", 100.0 * c.m1d1)),
            ("m1d2", format!("{:.1}", 100.0 * c.m1d2)),
            ("m2d1", format!("{:.1}", 100.0 * c.m2d1)),
            ("m2d2", format!("{:.1}", 100.0 * c.m2d2)),
            ("dd1", format!("{:.1}", 100.0 * c.delta_d1)),
        ];
        let mut head = String::new();
        let mut row = String::new();
        for (i, (h, v)) in cols.iter().enumerate() {
            let w = h.len().max(v.len());
            let sep = if i == 0 { "" } else { "  " };
            let _ = write!(head, "{sep}{h:>w$}");
            let _ = write!(row, "{sep}{v:>w$}");
        }
        format!("{head}\n{row}\n")
    }
}
