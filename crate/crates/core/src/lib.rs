//! Semi-artificial tabular data from RBF networks.
//!
//! A generator is built by training an RBF network with Dynamic Decay
//! Adjustment on the (normalized, encoded) data and keeping its Gaussian
//! units as kernels. New rows are sampled from those kernels and mapped
//! back to the source schema. The [`stats`], [`clustering`] and
//! [`classeval`] modules measure how close generated data stays to the
//! original, and [`report`] combines them.
//!
//! ```
//! use kernelsmith::{build, fixtures, generate, BuildParams, SamplingConfig};
//!
//! let iris = fixtures::iris();
//! let spec = build(&iris, &BuildParams::default()).unwrap();
//! let fresh = generate(&spec, &SamplingConfig::new(150, 7)).unwrap();
//! assert_eq!(fresh.class_counts(), vec![50, 50, 50]);
//! ```

pub mod classeval;
pub mod clustering;
pub mod dataset;
pub mod dda;
pub mod fixtures;
pub mod generator;
pub mod mvn;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use classeval::{cross_performance, ClassEvalError, ClassEvalResult, Classifier, ForestConfig, Learner, RandomForest};
pub use clustering::{ari, choose_k, cross_compare, gower, pam, pam_with, Clustering, ClusteringError, DistanceMatrix, PamConfig};
pub use dataset::{load_csv, load_csv_with_sidecar, save_csv, AttributeKind, AttributeSpec, Cell, Dataset, DatasetError, Role, Schema};
pub use dda::{DdaConfig, DdaError, RbfModel, RbfUnit};
pub use generator::{build, BuildParams, GeneratorError, GeneratorSpec, Kernel};
pub use preprocess::{EncodedDataset, PreprocessError, TransformRecord};
pub use report::{evaluate, EvalParams, QualityReport, ReportError};
pub use sampler::{equal_fraction, generate, SamplingConfig, SamplingError, WidthRule};
pub use stats::{compare, StatsError, StatsSummary};
