//! RBF network trained by Dynamic Decay Adjustment.
//!
//! Units are Gaussian prototypes `exp(-||x - t||^2 / sigma2)` that each
//! belong to one class. Training walks the instances in dataset order:
//!
//! * **commit**: if a same-class unit fires at `>= theta_plus`, the most
//!   active one absorbs the instance (its weight grows by one); otherwise a
//!   new unit is placed on the instance;
//! * **shrink**: every unit of another class is narrowed until the instance
//!   activates it at most at `theta_minus`.
//!
//! Epochs repeat until nothing is added or shrunk. Weights are reset at the
//! start of each epoch, so the final weights count the instances each unit
//! covered in the last epoch.

use serde::{Deserialize, Serialize};

use crate::preprocess::EncodedDataset;

/// Width given to a unit that has no conflicting unit yet. The encoded space
/// has diameter at most `sqrt(m)`, and the first conflict shrinks it anyway.
pub const INITIAL_SIGMA2: f64 = 1.0;

/// Lower bound on widths. Only reached when instances of different classes
/// coincide, in which case no width can separate them.
pub const MIN_SIGMA2: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DdaError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid thresholds: need 0 < theta_minus ({minus}) < theta_plus ({plus}) < 1")]
    BadThresholds { plus: f64, minus: f64 },
    #[error("training data is empty")]
    EmptyData,
    #[error("model has no units")]
    EmptyModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfUnit {
    pub center: Vec<f64>,
    pub sigma2: f64,
    pub weight: usize,
    pub class: usize,
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl RbfUnit {
    pub fn activation(&self, x: &[f64]) -> Result<f64, DdaError> {
        self.check_dim(x)?;
        Ok(self.activation_unchecked(x))
    }

    /// `ln(activation)`; stays finite where the activation underflows.
    pub fn log_activation(&self, x: &[f64]) -> Result<f64, DdaError> {
        self.check_dim(x)?;
        Ok(-squared_distance(&self.center, x) / self.sigma2)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), DdaError> {
        if x.len() != self.center.len() {
            return Err(DdaError::DimMismatch { expected: self.center.len(), found: x.len() });
        }
        Ok(())
    }

    pub(crate) fn activation_unchecked(&self, x: &[f64]) -> f64 {
        (-squared_distance(&self.center, x) / self.sigma2).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdaConfig {
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub max_epochs: usize,
}

impl Default for DdaConfig {
    fn default() -> Self {
        Self { theta_plus: 0.4, theta_minus: 0.2, max_epochs: 10 }
    }
}

impl DdaConfig {
    pub fn validate(&self) -> Result<(), DdaError> {
        let (p, m) = (self.theta_plus, self.theta_minus);
        if !(0.0 < m && m < p && p < 1.0) {
            return Err(DdaError::BadThresholds { plus: p, minus: m });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub units: Vec<RbfUnit>,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub class_count: usize,
    /// Epochs run; `converged` is false when `max_epochs` cut training short.
    pub epochs: usize,
    pub converged: bool,
}

/// Train a network on the encoded data, visiting instances in row order.
pub fn train(d: &EncodedDataset, cfg: &DdaConfig) -> Result<RbfModel, DdaError> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(DdaError::EmptyData);
    }
    let dim = d.width();
    if let Some(row) = d.features.iter().find(|r| r.len() != dim) {
        return Err(DdaError::DimMismatch { expected: dim, found: row.len() });
    }
    // exp(-r^2 / sigma2) = theta_minus  <=>  sigma2 = r^2 / ln(1 / theta_minus)
    let log_inv_minus = (1.0 / cfg.theta_minus).ln();
    let width_for = |dist2: f64| (dist2 / log_inv_minus).max(MIN_SIGMA2);

    let mut units: Vec<RbfUnit> = Vec::new();
    let mut epochs = 0;
    let mut converged = false;
    while epochs < cfg.max_epochs {
        epochs += 1;
        let mut changed = false;
        for u in &mut units {
            u.weight = 0;
        }
        for (x, &class) in d.features.iter().zip(&d.classes) {
            let mut best: Option<(usize, f64)> = None;
            for (j, u) in units.iter().enumerate() {
                if u.class != class {
                    continue;
                }
                let a = u.activation_unchecked(x);
                if a >= cfg.theta_plus && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            match best {
                Some((j, _)) => units[j].weight += 1,
                None => {
                    let sigma2 = units
                        .iter()
                        .filter(|u| u.class != class)
                        .map(|u| width_for(squared_distance(&u.center, x)))
                        .fold(INITIAL_SIGMA2, f64::min);
                    units.push(RbfUnit { center: x.clone(), sigma2, weight: 1, class });
                    changed = true;
                }
            }
            for u in units.iter_mut().filter(|u| u.class != class) {
                let limit = width_for(squared_distance(&u.center, x));
                if limit < u.sigma2 {
                    u.sigma2 = limit;
                    changed = true;
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(RbfModel {
        units,
        theta_plus: cfg.theta_plus,
        theta_minus: cfg.theta_minus,
        class_count: d.class_count,
        epochs,
        converged,
    })
}

impl RbfModel {
    pub fn dim(&self) -> Option<usize> {
        self.units.first().map(|u| u.center.len())
    }

    /// Winner-takes-all over class outputs. A class output is the sum of its
    /// units' activations weighted by `weight / total weight`; ties go to
    /// the lowest class index.
    pub fn classify(&self, x: &[f64]) -> Result<usize, DdaError> {
        let dim = self.dim().ok_or(DdaError::EmptyModel)?;
        if x.len() != dim {
            return Err(DdaError::DimMismatch { expected: dim, found: x.len() });
        }
        let total: usize = self.units.iter().map(|u| u.weight).sum();
        let mut outputs = vec![0.0; self.class_count];
        for u in &self.units {
            let w = if total > 0 { u.weight as f64 / total as f64 } else { 1.0 };
            outputs[u.class] += w * u.activation_unchecked(x);
        }
        let mut best = 0;
        for (c, &o) in outputs.iter().enumerate() {
            if o > outputs[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Index of the most activated unit (lowest index on ties).
    pub fn winner(&self, x: &[f64]) -> Result<usize, DdaError> {
        let dim = self.dim().ok_or(DdaError::EmptyModel)?;
        if x.len() != dim {
            return Err(DdaError::DimMismatch { expected: dim, found: x.len() });
        }
        let mut best = 0;
        let mut best_log = f64::NEG_INFINITY;
        for (j, u) in self.units.iter().enumerate() {
            let la = -squared_distance(&u.center, x) / u.sigma2;
            if la > best_log {
                best = j;
                best_log = la;
            }
        }
        Ok(best)
    }

    /// Largest same-class activation and largest conflicting activation of
    /// one instance.
    pub fn coverage(&self, x: &[f64], class: usize) -> (f64, f64) {
        let mut own = 0.0_f64;
        let mut conflict = 0.0_f64;
        for u in &self.units {
            let a = u.activation_unchecked(x);
            if u.class == class {
                own = own.max(a);
            } else {
                conflict = conflict.max(a);
            }
        }
        (own, conflict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: &[(&[f64], usize)], classes: usize) -> EncodedDataset {
        EncodedDataset {
            features: rows.iter().map(|(x, _)| x.to_vec()).collect(),
            classes: rows.iter().map(|&(_, c)| c).collect(),
            class_count: classes,
        }
    }

    #[test]
    fn activation_values() {
        let u = RbfUnit { center: vec![0.0, 0.0], sigma2: 0.5, weight: 1, class: 0 };
        assert_eq!(u.activation(&[0.0, 0.0]).unwrap(), 1.0);
        // ||x - t||^2 = 0.5 = sigma2
        assert!((u.activation(&[0.5, 0.5]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let r = (0.5 * (5.0f64).ln()).sqrt();
        assert!((u.activation(&[r, 0.0]).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(u.activation(&[0.0]), Err(DdaError::DimMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn single_instance() {
        let m = train(&data(&[(&[0.3, 0.4], 0)], 2), &DdaConfig::default()).unwrap();
        assert_eq!(m.units.len(), 1);
        assert_eq!(m.units[0].weight, 1);
        assert_eq!(m.units[0].sigma2, INITIAL_SIGMA2);
        assert!(m.converged);
    }

    #[test]
    fn far_same_class_instances_get_two_units() {
        // exp(-4 / 1) < 0.4
        let m = train(&data(&[(&[0.0, 0.0], 0), (&[1.0, 1.0], 0), (&[0.0, 1.0], 1)], 2), &DdaConfig::default()).unwrap();
        assert_eq!(m.units.iter().filter(|u| u.class == 0).count(), 2);
    }

    #[test]
    fn conflicting_pair_widths() {
        let d2 = 0.09_f64;
        let m = train(&data(&[(&[0.2], 0), (&[0.5], 1)], 2), &DdaConfig::default()).unwrap();
        let limit = d2 / (5.0f64).ln();
        assert_eq!(m.units.len(), 2);
        for u in &m.units {
            assert!(u.sigma2 <= limit * (1.0 + 1e-12), "{} > {limit}", u.sigma2);
        }
        // each instance sits at its own center
        assert_eq!(m.classify(&[0.2]).unwrap(), 0);
        assert_eq!(m.classify(&[0.5]).unwrap(), 1);
    }

    #[test]
    fn winner_breaks_ties_low_and_survives_underflow() {
        let m = RbfModel {
            units: vec![
                RbfUnit { center: vec![0.0], sigma2: 1e-6, weight: 1, class: 0 },
                RbfUnit { center: vec![1.0], sigma2: 1e-6, weight: 1, class: 1 },
            ],
            theta_plus: 0.4,
            theta_minus: 0.2,
            class_count: 2,
            epochs: 1,
            converged: true,
        };
        assert_eq!(m.winner(&[0.5]).unwrap(), 0);
        // both activations underflow to 0 but the log scale still separates them
        assert_eq!(m.winner(&[0.7]).unwrap(), 1);
    }

    #[test]
    fn classify_empty_model_errors() {
        let m = RbfModel { units: vec![], theta_plus: 0.4, theta_minus: 0.2, class_count: 2, epochs: 0, converged: false };
        assert_eq!(m.classify(&[0.0]), Err(DdaError::EmptyModel));
    }

    #[test]
    fn bad_thresholds() {
        let cfg = DdaConfig { theta_plus: 0.2, theta_minus: 0.4, max_epochs: 3 };
        assert!(train(&data(&[(&[0.0], 0)], 2), &cfg).is_err());
    }
}
