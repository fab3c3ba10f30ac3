use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DetectorError, FeatureKind, FeatureVector, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: FeatureKind,
    pub vectors: Vec<FeatureVector>,
    pub split: Split,
}

impl Dataset {
    /// Labeled, homogeneous vectors with a stratified seeded split: per
    /// label, `round(train_fraction · n)` shuffled indices go to training.
    pub fn new(vectors: Vec<FeatureVector>, train_fraction: f64, seed: u64) -> Result<Self, DetectorError> {
        let first = vectors.first().ok_or(DetectorError::EmptyResult)?;
        let (kind, dim) = (first.kind, first.values.len());
        if vectors.iter().any(|v| v.kind != kind || v.values.len() != dim) {
            return Err(DetectorError::Inhomogeneous);
        }
        if vectors.iter().any(|v| v.label.is_none()) {
            return Err(DetectorError::Unlabeled);
        }
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(DetectorError::InvalidHyperparams("train fraction must be in [0, 1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for label in [Label::Attack, Label::NoAttack] {
            let mut idx: Vec<usize> = (0..vectors.len()).filter(|&i| vectors[i].label == Some(label)).collect();
            idx.shuffle(&mut rng);
            let k = (train_fraction * idx.len() as f64).round() as usize;
            train.extend_from_slice(&idx[..k]);
            test.extend_from_slice(&idx[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok(Self { kind, vectors, split: Split { train, test } })
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].values.len()
    }

    fn rows(&self, idx: &[usize]) -> (Vec<&[f64]>, Vec<Label>) {
        idx.iter().map(|&i| (self.vectors[i].values.as_slice(), self.vectors[i].label.expect("labeled"))).unzip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Tree,
    Svm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tree => "tree",
            Algorithm::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 8, min_leaf: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { lambda: 1e-3, epochs: 200, learning_rate: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf { label: Label, attack: usize, total: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub params: TreeParams,
    /// Root at index 0; a sample goes left when `x[feature] <= threshold`.
    pub nodes: Vec<Node>,
}

fn gini(attack: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = attack as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

impl DecisionTree {
    pub fn fit(x: &[&[f64]], y: &[Label], params: TreeParams) -> Self {
        let mut tree = Self { params, nodes: Vec::new() };
        let idx: Vec<usize> = (0..x.len()).collect();
        tree.grow(x, y, idx, 0);
        tree
    }

    fn grow(&mut self, x: &[&[f64]], y: &[Label], idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let total = idx.len();
        let attack = idx.iter().filter(|&&i| y[i] == Label::Attack).count();
        let label = if 2 * attack > total { Label::Attack } else { Label::NoAttack };
        self.nodes.push(Node::Leaf { label, attack, total });
        let min_leaf = self.params.min_leaf.max(1);
        if attack == 0 || attack == total || depth >= self.params.max_depth || total < 2 * min_leaf {
            return at;
        }
        let Some((feature, threshold)) = best_split(x, y, &idx, attack, min_leaf) else { return at };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][feature] <= threshold);
        let left = self.grow(x, y, l, depth + 1);
        let right = self.grow(x, y, r, depth + 1);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }

    /// Fraction of attack samples in the leaf reached by `x`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf { attack, total, .. } => return *attack as f64 / (*total).max(1) as f64,
                Node::Split { feature, threshold, left, right } => n = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf { label, .. } => return *label,
                Node::Split { feature, threshold, left, right } => n = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], n: usize) -> usize {
            match &nodes[n] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Lowest weighted Gini impurity over all features and midpoint thresholds;
/// ties keep the earliest feature and the lowest threshold.
#[allow(clippy::needless_range_loop)]
fn best_split(x: &[&[f64]], y: &[Label], idx: &[usize], attack: usize, min_leaf: usize) -> Option<(usize, f64)> {
    let total = idx.len();
    let parent = gini(attack, total) * total as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for f in 0..x[idx[0]].len() {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_attack = 0;
        for k in 1..total {
            if y[order[k - 1]] == Label::Attack {
                left_attack += 1;
            }
            let (lo, hi) = (x[order[k - 1]][f], x[order[k]][f]);
            if lo == hi || k < min_leaf || total - k < min_leaf {
                continue;
            }
            let imp = gini(left_attack, k) * k as f64 + gini(attack - left_attack, total - k) * (total - k) as f64;
            if imp < parent - 1e-12 && best.is_none_or(|(b, _, _)| imp < b) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some((imp, f, if mid < hi { mid } else { lo }));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[&[f64]]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var.iter().map(|s| (s / n).sqrt()).map(|sd| if sd > 0.0 && sd.is_finite() { sd } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub params: SvmParams,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardizer,
}

fn sign(l: Label) -> f64 {
    match l {
        Label::Attack => 1.0,
        Label::NoAttack => -1.0,
    }
}

impl LinearSvm {
    /// Minimises `λ/2·|w|² + mean(hinge)` by stochastic subgradient steps,
    /// visiting samples in a seeded permutation each epoch with step size
    /// `η0 / (1 + λ·η0·t)`; returns the average of the last half of the iterates.
    pub fn fit(x: &[&[f64]], y: &[Label], params: SvmParams) -> Self {
        let standardization = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| standardization.apply(r)).collect();
        let d = z[0].len();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut w_avg = vec![0.0; d];
        let mut b_avg = 0.0;
        let mut averaged = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..z.len()).collect();
        let mut t = 0.0;
        let epochs = params.epochs.max(1);
        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let eta = params.learning_rate / (1.0 + params.lambda * params.learning_rate * t);
                t += 1.0;
                let yi = sign(y[i]);
                let margin = yi * (dot(&w, &z[i]) + b);
                let shrink = 1.0 - eta * params.lambda;
                w.iter_mut().for_each(|wj| *wj *= shrink);
                if margin < 1.0 {
                    for (wj, zj) in w.iter_mut().zip(&z[i]) {
                        *wj += eta * yi * zj;
                    }
                    b += eta * yi;
                }
            }
            if 2 * epoch >= epochs {
                averaged += 1.0;
                for (a, wj) in w_avg.iter_mut().zip(&w) {
                    *a += (wj - *a) / averaged;
                }
                b_avg += (b - b_avg) / averaged;
            }
        }
        Self { params, weights: w_avg, bias: b_avg, standardization }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, &self.standardization.apply(x)) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.score(x) > 0.0 {
            Label::Attack
        } else {
            Label::NoAttack
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    DecisionTree(DecisionTree),
    LinearSvm(LinearSvm),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            Model::DecisionTree(t) => t.predict(x),
            Model::LinearSvm(s) => s.predict(x),
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Model::DecisionTree(t) => t.score(x),
            Model::LinearSvm(s) => s.score(x),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Model::DecisionTree(_) => None,
            Model::LinearSvm(s) => Some(s.weights.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub tree: TreeParams,
    pub svm: SvmParams,
}

/// Fits on the training split.
pub fn train(dataset: &Dataset, algorithm: Algorithm, hp: &Hyperparams) -> Result<Model, DetectorError> {
    let (x, y) = dataset.rows(&dataset.split.train);
    if x.is_empty() {
        return Err(DetectorError::EmptyResult);
    }
    if !(y.contains(&Label::Attack) && y.contains(&Label::NoAttack)) {
        return Err(DetectorError::SingleClassTraining);
    }
    Ok(match algorithm {
        Algorithm::Tree => Model::DecisionTree(DecisionTree::fit(&x, &y, hp.tree)),
        Algorithm::Svm => {
            if !(hp.svm.lambda > 0.0 && hp.svm.learning_rate > 0.0) {
                return Err(DetectorError::InvalidHyperparams("svm lambda and learning rate must be > 0".into()));
            }
            Model::LinearSvm(LinearSvm::fit(&x, &y, hp.svm))
        }
    })
}

/// Accuracy on the test split.
pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<f64, DetectorError> {
    accuracy(model, dataset, &dataset.split.test)
}

pub fn accuracy(model: &Model, dataset: &Dataset, idx: &[usize]) -> Result<f64, DetectorError> {
    if idx.is_empty() {
        return Err(DetectorError::EmptyResult);
    }
    let (x, y) = dataset.rows(idx);
    let correct = x.iter().zip(&y).filter(|(r, l)| model.predict(r) == **l).count();
    Ok(correct as f64 / idx.len() as f64)
}
