//! Predictive comparison of two datasets. Models trained on halves of each
//! dataset are tested on the other half and on the other dataset; the
//! built-in learner is a random forest over the encoded representation.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ensure_same_schema, stratified_split, Dataset, DatasetError};
use crate::preprocess::{prepare, PreprocessError, TransformRecord};
use crate::rng::{self, derive_seed};

#[derive(Debug, thiserror::Error)]
pub enum ClassEvalError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("training data is empty")]
    EmptyTraining,
    #[error("test data is empty")]
    EmptyTest,
    #[error("invalid forest configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// A trained model.
pub trait Classifier: Send + Sync {
    /// Predicted class index for every row.
    fn predict(&self, d: &Dataset) -> Result<Vec<usize>, ClassEvalError>;

    /// Fraction of rows whose predicted class equals the recorded one.
    fn accuracy(&self, d: &Dataset) -> Result<f64, ClassEvalError> {
        if d.is_empty() {
            return Err(ClassEvalError::EmptyTest);
        }
        let pred = self.predict(d)?;
        let hits = pred.iter().enumerate().filter(|&(i, &p)| d.class_of(i) == p).count();
        Ok(hits as f64 / d.len() as f64)
    }
}

/// Something that trains a [`Classifier`].
pub trait Learner: Sync {
    fn fit(&self, d: &Dataset, seed: u64) -> Result<Box<dyn Classifier>, ClassEvalError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub tree_count: usize,
    /// Features drawn at every node; `None` means `floor(sqrt(width))`.
    pub features_per_node: Option<usize>,
    pub seed: u64,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { tree_count: 100, features_per_node: None, seed: 0, min_leaf: 1, max_depth: None, bootstrap: true }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<(), ClassEvalError> {
        if self.tree_count == 0 {
            return Err(ClassEvalError::BadConfig("tree_count must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ClassEvalError::BadConfig("min_leaf must be at least 1".into()));
        }
        if self.features_per_node == Some(0) {
            return Err(ClassEvalError::BadConfig("features_per_node must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mtry(&self, width: usize) -> usize {
        self.features_per_node.unwrap_or_else(|| (width as f64).sqrt().floor() as usize).clamp(1, width.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(usize),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART classification tree with Gini splits on numeric features.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn gini_weighted(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    nf - sq / nf
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best threshold on one feature as `(impurity, threshold)`.
    fn best_split(&self, idx: &mut [usize], f: usize) -> Option<(f64, f64)> {
        idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
        let n = idx.len();
        let total = self.counts(idx);
        let mut left = vec![0; self.classes];
        let mut best: Option<(f64, f64)> = None;
        for s in 1..n {
            left[self.y[idx[s - 1]]] += 1;
            let (lo, hi) = (self.x[idx[s - 1]][f], self.x[idx[s]][f]);
            if lo == hi || s < self.params.min_leaf || n - s < self.params.min_leaf {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let imp = gini_weighted(&left, s) + gini_weighted(&right, n - s);
            if best.is_none_or(|(b, _)| imp < b) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some((imp, threshold));
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut rng::Rng) -> usize {
        let counts = self.counts(idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(majority(&counts)));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < 2 * self.params.min_leaf || self.params.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let width = self.x[idx[0]].len();
        let mut features: Vec<usize> = (0..width).collect();
        features.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.params.mtry && best.is_some() {
                break;
            }
            if let Some((imp, t)) = self.best_split(idx, f) {
                if best.is_none_or(|(b, _, _)| imp < b) {
                    best = Some((imp, f, t));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        idx.sort_by_key(|&i| self.x[i][feature] > threshold);
        let split = idx.iter().position(|&i| self.x[i][feature] > threshold).unwrap_or(idx.len());
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl DecisionTree {
    /// Grow a tree on the rows `sample` (repeats allowed). At every node
    /// `mtry` shuffled features are searched; if none of them can split,
    /// the search continues through the remaining features.
    pub fn fit(x: &[Vec<f64>], y: &[usize], classes: usize, sample: &[usize], params: TreeParams, rng: &mut rng::Rng) -> Self {
        let mut grower = Grower { x, y, classes, params, nodes: Vec::new() };
        let mut idx = sample.to_vec();
        grower.grow(&mut idx, 0, rng);
        DecisionTree { nodes: grower.nodes }
    }

    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf(c) => return c,
                Node::Split { feature, threshold, left, right } => id = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Bagged trees trained on the encoded representation of a dataset.
#[derive(Debug, Clone)]
pub struct RandomForest {
    pub transform: TransformRecord,
    pub trees: Vec<DecisionTree>,
    pub class_count: usize,
}

impl RandomForest {
    /// Trees are grown in parallel; tree `t` draws from stream `t` of
    /// `cfg.seed`, so the result does not depend on scheduling.
    pub fn train(d: &Dataset, cfg: &ForestConfig) -> Result<Self, ClassEvalError> {
        cfg.validate()?;
        if d.is_empty() {
            return Err(ClassEvalError::EmptyTraining);
        }
        if d.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
            return Err(ClassEvalError::SingleClass);
        }
        let (enc, transform) = prepare(d, true)?;
        let n = enc.len();
        let params = TreeParams { mtry: cfg.mtry(enc.width()), min_leaf: cfg.min_leaf, max_depth: cfg.max_depth };
        let trees = (0..cfg.tree_count)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::stream(cfg.seed, t as u64);
                let sample: Vec<usize> = if cfg.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
                DecisionTree::fit(&enc.features, &enc.classes, enc.class_count, &sample, params, &mut rng)
            })
            .collect();
        Ok(RandomForest { transform, trees, class_count: enc.class_count })
    }

    /// Majority vote, lowest class index on ties.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.class_count];
        for t in &self.trees {
            votes[t.predict_row(x)] += 1;
        }
        majority(&votes)
    }
}

impl Classifier for RandomForest {
    fn predict(&self, d: &Dataset) -> Result<Vec<usize>, ClassEvalError> {
        let enc = self.transform.apply(d)?;
        Ok(enc.features.par_iter().map(|x| self.predict_row(x)).collect())
    }
}

impl Learner for ForestConfig {
    fn fit(&self, d: &Dataset, seed: u64) -> Result<Box<dyn Classifier>, ClassEvalError> {
        let cfg = ForestConfig { seed, ..*self };
        Ok(Box::new(RandomForest::train(d, &cfg)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub m1d1: f64,
    pub m1d2: f64,
    pub m2d1: f64,
    pub m2d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEvalResult {
    pub m1d1: f64,
    pub m1d2: f64,
    pub m2d1: f64,
    pub m2d2: f64,
    /// `m1d1 - m2d1`.
    pub delta_d1: f64,
    pub repeats: usize,
    pub per_repeat: Vec<Performance>,
}

/// One repeat: models `m1a`, `m1b` on the halves of `d1` and `m2a`, `m2b`
/// on the halves of `d2`. `m1d1` averages `m1a` on `d1b` and `m1b` on
/// `d1a`; `m1d2` averages both on all of `d2`; symmetrically for `m2`.
pub fn cross_repeat(learner: &dyn Learner, d1: &Dataset, d2: &Dataset, seed: u64) -> Result<Performance, ClassEvalError> {
    let (d1a, d1b) = stratified_split(d1, 0.5, derive_seed(seed, 1))?;
    let (d2a, d2b) = stratified_split(d2, 0.5, derive_seed(seed, 2))?;
    let train = [&d1a, &d1b, &d2a, &d2b];
    let models: Vec<Box<dyn Classifier>> =
        train.par_iter().enumerate().map(|(i, d)| learner.fit(d, derive_seed(seed, 10 + i as u64))).collect::<Result<_, _>>()?;
    let [m1a, m1b, m2a, m2b] = <[Box<dyn Classifier>; 4]>::try_from(models).ok().expect("four models");
    let avg = |a: f64, b: f64| (a + b) / 2.0;
    Ok(Performance {
        m1d1: avg(m1a.accuracy(&d1b)?, m1b.accuracy(&d1a)?),
        m1d2: avg(m1a.accuracy(d2)?, m1b.accuracy(d2)?),
        m2d1: avg(m2a.accuracy(d1)?, m2b.accuracy(d1)?),
        m2d2: avg(m2a.accuracy(&d2b)?, m2b.accuracy(&d2a)?),
    })
}

/// Average of `repeats` independent [`cross_repeat`] runs with any learner.
pub fn cross_performance_with(learner: &dyn Learner, d1: &Dataset, d2: &Dataset, repeats: usize, seed: u64) -> Result<ClassEvalResult, ClassEvalError> {
    ensure_same_schema(d1, d2)?;
    if repeats == 0 {
        return Err(ClassEvalError::BadConfig("repeats must be at least 1".into()));
    }
    let per_repeat = (0..repeats).map(|r| cross_repeat(learner, d1, d2, derive_seed(seed, r as u64))).collect::<Result<Vec<_>, _>>()?;
    let mean = |f: fn(&Performance) -> f64| per_repeat.iter().map(f).sum::<f64>() / repeats as f64;
    let (m1d1, m1d2, m2d1, m2d2) = (mean(|p| p.m1d1), mean(|p| p.m1d2), mean(|p| p.m2d1), mean(|p| p.m2d2));
    Ok(ClassEvalResult { m1d1, m1d2, m2d1, m2d2, delta_d1: m1d1 - m2d1, repeats, per_repeat })
}

/// [`cross_performance_with`] using a random forest.
pub fn cross_performance(d1: &Dataset, d2: &Dataset, repeats: usize, cfg: &ForestConfig, seed: u64) -> Result<ClassEvalResult, ClassEvalError> {
    cross_performance_with(cfg, d1, d2, repeats, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSpec, Cell, Schema};

    fn blobs(n: usize, seed: u64) -> Dataset {
        let schema = Schema::new(vec![AttributeSpec::numeric("x"), AttributeSpec::numeric("y"), AttributeSpec::class("c", ["a", "b"])]).unwrap();
        let mut rng = rng::stream(seed, 0);
        let rows = (0..n)
            .map(|i| {
                let c = i % 2;
                let off = if c == 0 { 0.0 } else { 5.0 };
                vec![Cell::Numeric(off + rng.random::<f64>()), Cell::Numeric(off + rng.random::<f64>()), Cell::Category(c)]
            })
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn separable_resubstitution() {
        let d = blobs(60, 1);
        let f = RandomForest::train(&d, &ForestConfig { tree_count: 20, ..Default::default() }).unwrap();
        assert_eq!(f.accuracy(&d).unwrap(), 1.0);
    }

    #[test]
    fn one_instance_per_class() {
        let schema = Schema::new(vec![AttributeSpec::numeric("x"), AttributeSpec::class("c", ["a", "b"])]).unwrap();
        let d = Dataset::new(schema, vec![vec![Cell::Numeric(0.0), Cell::Category(0)], vec![Cell::Numeric(1.0), Cell::Category(1)]]).unwrap();
        let f = RandomForest::train(&d, &ForestConfig { tree_count: 5, bootstrap: false, ..Default::default() }).unwrap();
        assert_eq!(f.predict(&d).unwrap(), vec![0, 1]);
    }

    #[test]
    fn single_class_rejected() {
        let schema = Schema::new(vec![AttributeSpec::numeric("x"), AttributeSpec::class("c", ["a", "b"])]).unwrap();
        let d = Dataset::new(schema, vec![vec![Cell::Numeric(0.0), Cell::Category(0)]; 3]).unwrap();
        assert!(matches!(RandomForest::train(&d, &ForestConfig::default()), Err(ClassEvalError::SingleClass)));
    }

    #[test]
    fn deterministic_given_seed() {
        let d = blobs(40, 2);
        let cfg = ForestConfig { tree_count: 10, seed: 9, ..Default::default() };
        let a = RandomForest::train(&d, &cfg).unwrap();
        let b = RandomForest::train(&d, &cfg).unwrap();
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn mtry_default() {
        let cfg = ForestConfig::default();
        assert_eq!(cfg.mtry(4), 2);
        assert_eq!(cfg.mtry(30), 5);
        assert_eq!(cfg.mtry(1), 1);
    }
}
