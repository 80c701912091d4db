//! Turning a trained RBF-DDA network into a data generator.
//!
//! [`build`] imputes and encodes the data, trains the network, keeps the
//! units whose weight reaches `min_w`, and gives each kept unit a diagonal
//! spread: the per-dimension sample standard deviation of the training
//! instances for which it is the most activated unit. The result is a
//! [`GeneratorSpec`], persisted as the `kernelsmith-generator/v1` JSON
//! document.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dda::{self, DdaConfig, DdaError, RbfModel};
use crate::preprocess::{self, EncodedDataset, PreprocessError, TransformRecord};

pub const FORMAT: &str = "kernelsmith-generator/v1";

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("all {units} kernels have weight below min_w = {min_w}")]
    AllKernelsPruned { units: usize, min_w: usize },
    #[error("min_w must be at least 1")]
    BadMinWeight,
    #[error("unit {0} is not the most activated unit of any instance")]
    NoMatchingInstances(usize),
    #[error("unsupported generator format `{0}` (expected `{FORMAT}`)")]
    UnsupportedFormat(String),
    #[error("invalid generator: {0}")]
    Invalid(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Dda(#[from] DdaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A Gaussian kernel of the generator, in encoded space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub center: Vec<f64>,
    /// Training instances committed to the unit in the last DDA epoch.
    pub weight: usize,
    pub class: usize,
    /// Per-dimension standard deviation of the matched instances.
    pub spread: Vec<f64>,
    /// Number of matched instances (those whose winner is this unit).
    pub support: usize,
    /// Index of the originating unit in the trained network.
    pub unit: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildParams {
    pub min_w: usize,
    pub nominal_as_binary: bool,
    pub dda: DdaConfig,
    /// Recorded for provenance; building itself draws no random numbers.
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self { min_w: 1, nominal_as_binary: true, dda: DdaConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub training_size: usize,
    pub encoded_width: usize,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub max_epochs: usize,
    pub epochs: usize,
    pub converged: bool,
    pub min_w: usize,
    pub nominal_as_binary: bool,
    pub seed: u64,
    /// Units in the trained network before pruning.
    pub unit_count: usize,
    pub build_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub format: String,
    pub kernels: Vec<Kernel>,
    pub transform: TransformRecord,
    pub class_categories: Vec<String>,
    /// Empirical class proportions of the training data.
    pub class_distribution: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub model: RbfModel,
    pub meta: BuildMeta,
}

/// Index of the most activated unit for every instance (lowest index on
/// ties), over all units of the network.
pub fn assign_units(model: &RbfModel, d: &EncodedDataset) -> Result<Vec<usize>, DdaError> {
    d.features.iter().map(|x| model.winner(x)).collect()
}

/// Per-dimension sample standard deviation (divisor `n - 1`) of the
/// instances assigned to `unit`; a single instance gives zeros.
pub fn estimate_spread(assignments: &[usize], d: &EncodedDataset, unit: usize) -> Result<Vec<f64>, GeneratorError> {
    let members: Vec<&Vec<f64>> = assignments.iter().zip(&d.features).filter(|(&a, _)| a == unit).map(|(_, x)| x).collect();
    let n = members.len();
    if n == 0 {
        return Err(GeneratorError::NoMatchingInstances(unit));
    }
    let dim = d.width();
    if n == 1 {
        return Ok(vec![0.0; dim]);
    }
    let spread = (0..dim)
        .map(|j| {
            let mean = members.iter().map(|x| x[j]).sum::<f64>() / n as f64;
            let ss: f64 = members.iter().map(|x| (x[j] - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        })
        .collect();
    Ok(spread)
}

pub fn build(d: &Dataset, params: &BuildParams) -> Result<GeneratorSpec, GeneratorError> {
    if params.min_w < 1 {
        return Err(GeneratorError::BadMinWeight);
    }
    let started = Instant::now();
    let (encoded, transform) = preprocess::prepare(d, params.nominal_as_binary)?;
    let model = dda::train(&encoded, &params.dda)?;
    let assignments = assign_units(&model, &encoded)?;

    let mut kernels = Vec::new();
    for (j, unit) in model.units.iter().enumerate() {
        if unit.weight < params.min_w {
            continue;
        }
        let support = assignments.iter().filter(|&&a| a == j).count();
        // A unit can win no instance only when training stopped before
        // convergence; its spread is then unknown and left at zero.
        let spread = match estimate_spread(&assignments, &encoded, j) {
            Ok(s) => s,
            Err(GeneratorError::NoMatchingInstances(_)) => vec![0.0; encoded.width()],
            Err(e) => return Err(e),
        };
        kernels.push(Kernel { center: unit.center.clone(), weight: unit.weight, class: unit.class, spread, support, unit: j });
    }
    if kernels.is_empty() {
        return Err(GeneratorError::AllKernelsPruned { units: model.units.len(), min_w: params.min_w });
    }

    let class_counts = d.class_counts();
    let n = d.len() as f64;
    let meta = BuildMeta {
        training_size: d.len(),
        encoded_width: transform.width,
        theta_plus: params.dda.theta_plus,
        theta_minus: params.dda.theta_minus,
        max_epochs: params.dda.max_epochs,
        epochs: model.epochs,
        converged: model.converged,
        min_w: params.min_w,
        nominal_as_binary: params.nominal_as_binary,
        seed: params.seed,
        unit_count: model.units.len(),
        build_seconds: 0.0,
    };
    let mut spec = GeneratorSpec {
        format: FORMAT.to_string(),
        kernels,
        class_categories: transform.class_categories().to_vec(),
        class_distribution: class_counts.iter().map(|&c| c as f64 / n).collect(),
        class_counts,
        transform,
        model,
        meta,
    };
    spec.meta.build_seconds = started.elapsed().as_secs_f64();
    Ok(spec)
}

impl GeneratorSpec {
    pub fn kernel_count(&self) -> usize {
        self.kernels.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_categories.len()
    }

    pub fn to_json(&self) -> Result<String, GeneratorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GeneratorError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(FORMAT) => {}
            Some(other) => return Err(GeneratorError::UnsupportedFormat(other.to_string())),
            None => return Err(GeneratorError::UnsupportedFormat(String::new())),
        }
        let spec: GeneratorSpec = serde_json::from_value(value)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeneratorError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeneratorError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), GeneratorError> {
        let c = self.class_count();
        if self.class_distribution.len() != c || self.transform.class_count() != c {
            return Err(GeneratorError::Invalid("class metadata is inconsistent".into()));
        }
        for (i, k) in self.kernels.iter().enumerate() {
            if k.class >= c {
                return Err(GeneratorError::Invalid(format!("kernel {i} has class {} of {c}", k.class)));
            }
            if k.center.len() != self.transform.width || k.spread.len() != self.transform.width {
                return Err(GeneratorError::Invalid(format!("kernel {i} width differs from the transform")));
            }
            if k.spread.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(GeneratorError::Invalid(format!("kernel {i} has a negative spread")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSpec, Cell, Schema};

    fn encoded(rows: &[[f64; 2]]) -> EncodedDataset {
        EncodedDataset { features: rows.iter().map(|r| r.to_vec()).collect(), classes: vec![0; rows.len()], class_count: 2 }
    }

    #[test]
    fn spread_examples() {
        let d = encoded(&[[0.0, 0.0], [0.0, 2.0], [5.0, 5.0]]);
        assert_eq!(estimate_spread(&[0, 0, 1], &d, 0).unwrap(), vec![0.0, 2f64.sqrt()]);
        assert_eq!(estimate_spread(&[0, 0, 1], &d, 1).unwrap(), vec![0.0, 0.0]);
        let same = encoded(&[[0.3, 0.3], [0.3, 0.3]]);
        assert_eq!(estimate_spread(&[0, 0], &same, 0).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(estimate_spread(&[0, 0, 1], &d, 2), Err(GeneratorError::NoMatchingInstances(2))));
    }

    fn repeated_points() -> Dataset {
        let schema = Schema::new(vec![AttributeSpec::numeric("x"), AttributeSpec::numeric("z"), AttributeSpec::class("y", ["a", "b"])]).unwrap();
        let mut rows = Vec::new();
        for _ in 0..4 {
            rows.push(vec![Cell::Numeric(1.0), Cell::Numeric(2.0), Cell::Category(0)]);
            rows.push(vec![Cell::Numeric(3.0), Cell::Numeric(0.0), Cell::Category(1)]);
        }
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn repeated_points_give_one_zero_spread_kernel_per_class() {
        let spec = build(&repeated_points(), &BuildParams::default()).unwrap();
        assert_eq!(spec.kernel_count(), 2);
        for k in &spec.kernels {
            assert_eq!(k.weight, 4);
            assert_eq!(k.support, 4);
            assert!(k.spread.iter().all(|&s| s == 0.0));
        }
        assert_eq!(spec.class_distribution, vec![0.5, 0.5]);
    }

    #[test]
    fn min_w_too_high() {
        let d = repeated_points();
        let params = BuildParams { min_w: d.len() + 1, ..Default::default() };
        assert!(matches!(build(&d, &params), Err(GeneratorError::AllKernelsPruned { .. })));
        let params = BuildParams { min_w: 0, ..Default::default() };
        assert!(matches!(build(&d, &params), Err(GeneratorError::BadMinWeight)));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut spec = build(&repeated_points(), &BuildParams::default()).unwrap();
        spec.meta.build_seconds = 0.1 + 0.2;
        spec.kernels[0].spread[0] = 1.0 / 3.0;
        let back = GeneratorSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_foreign_format() {
        let spec = build(&repeated_points(), &BuildParams::default()).unwrap();
        let text = spec.to_json().unwrap().replace(FORMAT, "other/v9");
        assert!(matches!(GeneratorSpec::from_json(&text), Err(GeneratorError::UnsupportedFormat(f)) if f == "other/v9"));
    }
}
