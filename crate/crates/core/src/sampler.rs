//! Drawing new instances from a [`GeneratorSpec`].
//!
//! Each kernel receives a share of the requested size proportional to its
//! weight within its class times the desired class probability. Rows are
//! drawn from the kernel's diagonal Gaussian conditioned on every numeric
//! encoded column lying in `[0,1]` (values outside are rejected and
//! redrawn), then decoded back to the source schema.
//! Nominal columns are never rejected; decoding snaps them to a category.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ensure_same_schema, Cell, Dataset, DatasetError};
use crate::generator::GeneratorSpec;
use crate::mvn::{box_muller, DiagonalGaussian};
use crate::preprocess::PreprocessError;
use crate::rng;

pub const DEFAULT_SPREAD: f64 = 0.05;

/// Tolerance for numeric equality in [`equal_fraction`].
pub const EQUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SamplingError {
    #[error("class `{0}` has positive probability but no kernel")]
    ClassWithoutKernel(String),
    #[error("invalid class distribution: {0}")]
    BadDistribution(String),
    #[error("invalid sampling configuration: {0}")]
    BadConfig(String),
    #[error("kernel {kernel}: only {got} of {wanted} values of encoded column {column} fell inside [0,1] after {attempts} redraws")]
    RejectionExhausted { kernel: usize, column: usize, wanted: usize, got: usize, attempts: usize },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthRule {
    /// Spread estimated from the matched training instances, zeros replaced
    /// by `default_spread`.
    #[default]
    Estimated,
    /// Estimated spread scaled by the multivariate Silverman factor.
    Silverman,
}

impl std::str::FromStr for WidthRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "estimated" => Ok(Self::Estimated),
            "silverman" => Ok(Self::Silverman),
            other => Err(format!("unknown width rule `{other}` (estimated|silverman)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub size: usize,
    /// Desired class proportions; `None` uses the generator's empirical ones.
    pub class_distribution: Option<Vec<f64>>,
    pub var: WidthRule,
    /// Standard deviation substituted for zero spreads.
    pub default_spread: f64,
    pub seed: u64,
    pub oversample_factor: f64,
    pub max_retries: usize,
}

impl SamplingConfig {
    pub fn new(size: usize, seed: u64) -> Self {
        Self {
            size,
            class_distribution: None,
            var: WidthRule::Estimated,
            default_spread: DEFAULT_SPREAD,
            seed,
            oversample_factor: 2.0,
            max_retries: 50,
        }
    }
}

/// Validate a class distribution: right length, nonnegative, sums to 1.
pub fn check_distribution(p: &[f64], classes: usize) -> Result<(), SamplingError> {
    if p.len() != classes {
        return Err(SamplingError::BadDistribution(format!("{} proportions for {classes} classes", p.len())));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(SamplingError::BadDistribution("proportions must be finite and nonnegative".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(SamplingError::BadDistribution(format!("proportions sum to {sum}, not 1")));
    }
    Ok(())
}

/// Integerize `quotas` so they sum to `total`: floors first, then one extra
/// unit to the largest remainders, lower index first on equal remainders.
fn largest_remainder(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Rows to generate per kernel. Class totals are `p_c * size` integerized
/// by largest remainder; within a class each kernel gets
/// `w_k / sum(w of class) * p_c * size`, integerized the same way so the
/// class total is met exactly.
pub fn allocate(spec: &GeneratorSpec, cfg: &SamplingConfig) -> Result<Vec<usize>, SamplingError> {
    let classes = spec.class_count();
    let p = cfg.class_distribution.as_deref().unwrap_or(&spec.class_distribution);
    check_distribution(p, classes)?;

    let mut class_weight = vec![0usize; classes];
    for k in &spec.kernels {
        class_weight[k.class] += k.weight;
    }
    for c in 0..classes {
        if p[c] > 0.0 && class_weight[c] == 0 {
            return Err(SamplingError::ClassWithoutKernel(spec.class_categories[c].clone()));
        }
    }

    let size = cfg.size as f64;
    let class_totals = largest_remainder(&p.iter().map(|pc| pc * size).collect::<Vec<_>>(), cfg.size);
    let mut counts = vec![0; spec.kernels.len()];
    for c in 0..classes {
        let members: Vec<usize> = (0..spec.kernels.len()).filter(|&k| spec.kernels[k].class == c).collect();
        if members.is_empty() {
            continue;
        }
        let quotas: Vec<f64> = members
            .iter()
            .map(|&k| spec.kernels[k].weight as f64 / class_weight[c] as f64 * p[c] * size)
            .collect();
        for (&k, g) in members.iter().zip(largest_remainder(&quotas, class_totals[c])) {
            counts[k] = g;
        }
    }
    Ok(counts)
}

/// Multivariate Silverman rule per dimension:
/// `(4 / (a + 2))^(1 / (a + 4)) * n^(-1 / (a + 4)) * spread_j`.
pub fn silverman_width(spread: &[f64], n: usize, a: usize) -> Vec<f64> {
    let a = a as f64;
    let factor = (4.0 / (a + 2.0)).powf(1.0 / (a + 4.0)) * (n.max(1) as f64).powf(-1.0 / (a + 4.0));
    spread.iter().map(|s| factor * s).collect()
}

/// Standard deviations used to sample from kernel `k`.
pub fn kernel_widths(spec: &GeneratorSpec, k: usize, cfg: &SamplingConfig) -> Vec<f64> {
    let kernel = &spec.kernels[k];
    match cfg.var {
        WidthRule::Estimated => kernel.spread.iter().map(|&s| if s == 0.0 { cfg.default_spread } else { s }).collect(),
        WidthRule::Silverman => silverman_width(&kernel.spread, kernel.support, spec.transform.width),
    }
}

fn validate(cfg: &SamplingConfig) -> Result<(), SamplingError> {
    if cfg.size == 0 {
        return Err(SamplingError::BadConfig("size must be at least 1".into()));
    }
    if !(cfg.oversample_factor >= 1.0 && cfg.oversample_factor.is_finite()) {
        return Err(SamplingError::BadConfig("oversample factor must be >= 1".into()));
    }
    if !(cfg.default_spread >= 0.0 && cfg.default_spread.is_finite()) {
        return Err(SamplingError::BadConfig("default spread must be >= 0".into()));
    }
    if cfg.max_retries == 0 {
        return Err(SamplingError::BadConfig("max retries must be at least 1".into()));
    }
    Ok(())
}

fn sample_kernel(spec: &GeneratorSpec, k: usize, wanted: usize, cfg: &SamplingConfig, checked: &[usize]) -> Result<Vec<Vec<f64>>, SamplingError> {
    let kernel = &spec.kernels[k];
    let widths = kernel_widths(spec, k, cfg);
    let gaussian = DiagonalGaussian::from_std(kernel.center.clone(), &widths);
    let mut rng = rng::stream(cfg.seed, k as u64);
    let mut rows = gaussian.sample(wanted, &mut rng);
    // With a diagonal covariance and a box-shaped acceptance region, keeping
    // only rows whose checked columns all lie in [0,1] is the same as
    // truncating every column independently. Redrawing just the offending
    // value samples that distribution without the acceptance rate shrinking
    // geometrically with the number of columns near a bound.
    let budget = (wanted as f64 * cfg.oversample_factor).ceil() as usize * cfg.max_retries;
    for &j in checked {
        let (c, w) = (kernel.center[j], widths[j]);
        let mut redraws = 0;
        for (i, row) in rows.iter_mut().enumerate() {
            while !(0.0..=1.0).contains(&row[j]) {
                if redraws == budget {
                    return Err(SamplingError::RejectionExhausted { kernel: k, column: j, wanted, got: i, attempts: budget });
                }
                redraws += 1;
                row[j] = c + w * box_muller(&mut rng).0;
            }
        }
    }
    Ok(rows)
}

/// Generate `cfg.size` rows. Kernels sample from independent random
/// streams; rows are pooled in kernel order.
pub fn generate(spec: &GeneratorSpec, cfg: &SamplingConfig) -> Result<Dataset, SamplingError> {
    validate(cfg)?;
    let counts = allocate(spec, cfg)?;
    let checked = spec.transform.numeric_columns();
    let per_kernel: Vec<Vec<Vec<f64>>> = counts
        .par_iter()
        .enumerate()
        .map(|(k, &g)| if g == 0 { Ok(Vec::new()) } else { sample_kernel(spec, k, g, cfg, &checked) })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(cfg.size);
    let mut classes = Vec::with_capacity(cfg.size);
    for (k, block) in per_kernel.into_iter().enumerate() {
        classes.extend(std::iter::repeat_n(spec.kernels[k].class, block.len()));
        rows.extend(block);
    }
    Ok(spec.transform.decode(&rows, &classes)?)
}

fn cells_equal(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Numeric(x), Cell::Numeric(y)) => (x - y).abs() <= EQUAL_TOLERANCE,
        _ => a == b,
    }
}

/// Fraction of generated rows equal to at least one original row (all
/// attributes, class included; numerics within [`EQUAL_TOLERANCE`]).
pub fn equal_fraction(original: &Dataset, generated: &Dataset) -> Result<f64, DatasetError> {
    ensure_same_schema(original, generated)?;
    // bucket originals by their non-numeric cells
    let key = |row: &[Cell]| -> Vec<Option<usize>> {
        row.iter()
            .filter(|c| !matches!(c, Cell::Numeric(_)))
            .map(Cell::as_category)
            .collect()
    };
    let mut buckets: HashMap<Vec<Option<usize>>, Vec<&Vec<Cell>>> = HashMap::new();
    for row in original.rows() {
        buckets.entry(key(row)).or_default().push(row);
    }
    let hits = generated
        .rows()
        .iter()
        .filter(|row| {
            buckets
                .get(&key(row))
                .is_some_and(|cands| cands.iter().any(|o| o.iter().zip(row.iter()).all(|(a, b)| cells_equal(a, b))))
        })
        .count();
    Ok(hits as f64 / generated.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSpec, Schema};
    use crate::generator::{build, BuildParams, Kernel};

    fn toy_spec(weights: &[(usize, usize)]) -> GeneratorSpec {
        let schema = Schema::new(vec![AttributeSpec::numeric("x"), AttributeSpec::class("y", ["A", "B"])]).unwrap();
        let d = Dataset::new(
            schema,
            vec![vec![Cell::Numeric(0.0), Cell::Category(0)], vec![Cell::Numeric(1.0), Cell::Category(1)]],
        )
        .unwrap();
        let mut spec = build(&d, &BuildParams::default()).unwrap();
        spec.kernels = weights
            .iter()
            .enumerate()
            .map(|(i, &(w, c))| Kernel { center: vec![0.5], weight: w, class: c, spread: vec![0.1], support: w, unit: i })
            .collect();
        spec
    }

    #[test]
    fn allocation_largest_remainder_ties_to_lower_index() {
        let spec = toy_spec(&[(3, 0), (1, 0), (2, 1)]);
        let mut cfg = SamplingConfig::new(100, 0);
        cfg.class_distribution = Some(vec![0.5, 0.5]);
        assert_eq!(allocate(&spec, &cfg).unwrap(), vec![38, 12, 50]);
    }

    #[test]
    fn allocation_zero_probability_and_missing_class() {
        let spec = toy_spec(&[(3, 0), (1, 0), (2, 1)]);
        let mut cfg = SamplingConfig::new(10, 0);
        cfg.class_distribution = Some(vec![1.0, 0.0]);
        assert_eq!(allocate(&spec, &cfg).unwrap(), vec![8, 2, 0]);

        let spec = toy_spec(&[(3, 0)]);
        cfg.class_distribution = Some(vec![0.5, 0.5]);
        assert!(matches!(allocate(&spec, &cfg), Err(SamplingError::ClassWithoutKernel(c)) if c == "B"));
        cfg.class_distribution = Some(vec![0.5, 0.4]);
        assert!(matches!(allocate(&spec, &cfg), Err(SamplingError::BadDistribution(_))));
    }

    #[test]
    fn silverman_examples() {
        assert_eq!(silverman_width(&[0.0], 5, 3), vec![0.0]);
        let w = silverman_width(&[1.0], 1, 1)[0];
        assert!((w - (4.0f64 / 3.0).powf(0.2)).abs() < 1e-12);
        assert!((w - 1.0592).abs() < 1e-4);
        assert!(silverman_width(&[1.0], 100, 1)[0] < w);
    }

    #[test]
    fn degenerate_replay_hits_centers() {
        let mut spec = toy_spec(&[(1, 0), (1, 1)]);
        spec.kernels[0].spread = vec![0.0];
        spec.kernels[1].spread = vec![0.0];
        spec.kernels[1].center = vec![1.0];
        let mut cfg = SamplingConfig::new(6, 3);
        cfg.default_spread = 0.0;
        let out = generate(&spec, &cfg).unwrap();
        assert_eq!(out.class_counts(), vec![3, 3]);
        for row in out.rows() {
            let expected = if row[1] == Cell::Category(0) { 0.5 } else { 1.0 };
            assert_eq!(row[0], Cell::Numeric(expected));
        }
    }

    #[test]
    fn rejection_exhaustion_is_reported() {
        let mut spec = toy_spec(&[(1, 0), (1, 1)]);
        spec.kernels[0].center = vec![50.0];
        let cfg = SamplingConfig { max_retries: 3, ..SamplingConfig::new(10, 0) };
        assert!(matches!(generate(&spec, &cfg), Err(SamplingError::RejectionExhausted { kernel: 0, .. })));
    }

    #[test]
    fn equal_fraction_examples() {
        let schema = Schema::new(vec![AttributeSpec::nominal("c", ["u", "v", "w"]), AttributeSpec::class("y", ["A", "B"])]).unwrap();
        let mk = |rows: &[(usize, usize)]| {
            Dataset::new(schema.clone(), rows.iter().map(|&(a, b)| vec![Cell::Category(a), Cell::Category(b)]).collect()).unwrap()
        };
        let orig = mk(&[(0, 0), (1, 1)]);
        assert_eq!(equal_fraction(&orig, &orig).unwrap(), 1.0);
        assert_eq!(equal_fraction(&orig, &mk(&[(2, 0), (2, 1)])).unwrap(), 0.0);
        assert_eq!(equal_fraction(&orig, &mk(&[(0, 0), (2, 1)])).unwrap(), 0.5);
    }
}
