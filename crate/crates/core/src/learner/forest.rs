//! Random-forest classifier over degradation vectors.
//!
//! Trees use axis-aligned splits at midpoints between consecutive distinct
//! values, chosen by Gini impurity over a random subset of features.
//! Bootstrap resampling is expressed as integer sample weights. Each tree
//! draws its randomness from `seed::derive(master, TREE, tree_index)`, so the
//! forest does not depend on how many threads train it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sample::SampleSet;
use super::{Classifier, LearnerError};
use crate::seed::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// `None` means `⌈√n_d⌉`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn features_for(&self, dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `d[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Weighted training counts `[infeasible, feasible]`.
    Leaf { counts: [u32; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_index(&self, d: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if d[feature] <= threshold { left } else { right } as usize,
                Node::Leaf { .. } => return i,
            }
        }
    }

    /// Feasible fraction of the leaf containing `d`.
    pub fn leaf_probability(&self, d: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(d)] {
            Node::Leaf { counts: [n0, n1] } => n1 as f64 / (n0 as f64 + n1 as f64),
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Split { left, right, .. } => 1 + rec(t, left as usize).max(rec(t, right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        rec(self, 0)
    }

    fn validate(&self, dim: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree without nodes".into());
        }
        // Children must point forward, which also rules out cycles.
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let (l, r) = (left as usize, right as usize);
                    if feature >= dim || !threshold.is_finite() {
                        return Err(format!("node {i}: bad split"));
                    }
                    if l <= i || r <= i || l >= self.nodes.len() || r >= self.nodes.len() {
                        return Err(format!("node {i}: bad child index"));
                    }
                }
                Node::Leaf { counts: [a, b] } => {
                    if a == 0 && b == 0 {
                        return Err(format!("node {i}: empty leaf"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub dim: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean over trees of the leaf feasible fraction.
    pub fn predict_proba(&self, d: &[f64]) -> Result<f64, LearnerError> {
        if d.len() != self.dim {
            return Err(LearnerError::DimensionMismatch {
                expected: self.dim,
                got: d.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.leaf_probability(d)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        let m: Self = serde_json::from_str(text).map_err(|e| LearnerError::Parse(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.trees.is_empty() {
            return Err(LearnerError::Parse("forest without trees".into()));
        }
        for (k, t) in self.trees.iter().enumerate() {
            t.validate(self.dim)
                .map_err(|e| LearnerError::Parse(format!("tree {k}: {e}")))?;
        }
        Ok(())
    }
}

impl Classifier for ForestModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_proba(&self, d: &[f64]) -> Result<f64, LearnerError> {
        ForestModel::predict_proba(self, d)
    }
}

/// Training data in column-major form plus the per-feature sort order shared
/// by all trees.
struct Columns {
    cols: Vec<Vec<f64>>,
    y: Vec<u8>,
    order: Vec<Vec<u32>>,
}

impl Columns {
    fn new(samples: &SampleSet, dim: usize) -> Self {
        let n = samples.len();
        let cols: Vec<Vec<f64>> = (0..dim)
            .map(|f| samples.iter().map(|s| s.d[f]).collect())
            .collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let y = samples.iter().map(|s| s.label.as_u8()).collect();
        Self { cols, y, order }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn best_split_on(cols: &Columns, w: &[u32], seg: &[u32], f: usize, total: [u64; 2]) -> Option<Split> {
    let c = &cols.cols[f];
    let mut left = [0u64; 2];
    let mut best: Option<Split> = None;
    let n = total[0] + total[1];
    for k in 0..seg.len() - 1 {
        let i = seg[k] as usize;
        left[cols.y[i] as usize] += w[i] as u64;
        let (a, b) = (c[i], c[seg[k + 1] as usize]);
        if a >= b {
            continue;
        }
        let nl = left[0] + left[1];
        let nr = n - nl;
        let r = [total[0] - left[0], total[1] - left[1]];
        // Maximizing this is minimizing the weighted Gini impurity of the
        // two children.
        let score = ((left[0] * left[0] + left[1] * left[1]) as f64) / nl as f64
            + ((r[0] * r[0] + r[1] * r[1]) as f64) / nr as f64;
        if best.as_ref().is_none_or(|s| score > s.score) {
            let mut threshold = a / 2.0 + b / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Split {
                feature: f,
                threshold,
                score,
            });
        }
    }
    best
}

fn grow_tree(cols: &Columns, params: &ForestParams, k: usize, tree_seed: u64) -> Tree {
    let n = cols.y.len();
    let dim = cols.cols.len();
    let mut rng = seed::rng(tree_seed);
    let mut w = vec![0u32; n];
    if params.bootstrap {
        for _ in 0..n {
            w[rng.random_range(0..n)] += 1;
        }
    } else {
        w.iter_mut().for_each(|x| *x = 1);
    }
    let mut sorted: Vec<Vec<u32>> = cols
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| w[i as usize] > 0).collect())
        .collect();
    let m = sorted[0].len();
    let mut buf = vec![0u32; m];
    let mut goes_left = vec![false; n];
    let mut features: Vec<usize> = (0..dim).collect();

    let mut nodes = vec![Node::Leaf { counts: [0, 0] }];
    // (node, start, end, depth); left children are popped first.
    let mut stack = vec![(0usize, 0usize, m, 0usize)];
    while let Some((id, start, end, depth)) = stack.pop() {
        let mut total = [0u64; 2];
        for &i in &sorted[0][start..end] {
            total[cols.y[i as usize] as usize] += w[i as usize] as u64;
        }
        let weight = total[0] + total[1];
        let leaf = Node::Leaf {
            counts: [total[0] as u32, total[1] as u32],
        };
        let stop = total[0] == 0
            || total[1] == 0
            || weight < params.min_samples_split as u64
            || params.max_depth.is_some_and(|md| depth >= md);
        if stop {
            nodes[id] = leaf;
            continue;
        }

        // Lazy Fisher-Yates over features; constant features do not count
        // towards the `k` examined.
        let mut best: Option<Split> = None;
        let mut examined = 0;
        for j in 0..dim {
            if examined == k {
                break;
            }
            let r = rng.random_range(j..dim);
            features.swap(j, r);
            let f = features[j];
            let seg = &sorted[f][start..end];
            let c = &cols.cols[f];
            if c[seg[0] as usize] >= c[seg[seg.len() - 1] as usize] {
                continue;
            }
            examined += 1;
            if let Some(s) = best_split_on(cols, &w, seg, f, total) {
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            nodes[id] = leaf;
            continue;
        };

        let c = &cols.cols[split.feature];
        for &i in &sorted[split.feature][start..end] {
            goes_left[i as usize] = c[i as usize] <= split.threshold;
        }
        let mut n_left = 0;
        for seg in sorted.iter_mut() {
            let seg = &mut seg[start..end];
            let mut l = 0;
            let mut r = 0;
            for k in 0..seg.len() {
                let i = seg[k];
                if goes_left[i as usize] {
                    seg[l] = i;
                    l += 1;
                } else {
                    buf[r] = i;
                    r += 1;
                }
            }
            seg[l..].copy_from_slice(&buf[..r]);
            n_left = l;
        }

        let left = nodes.len() as u32;
        nodes.push(Node::Leaf { counts: [0, 0] });
        nodes.push(Node::Leaf { counts: [0, 0] });
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right: left + 1,
        };
        stack.push((left as usize + 1, start + n_left, end, depth + 1));
        stack.push((left as usize, start, start + n_left, depth + 1));
    }
    Tree { nodes }
}

/// Trains a forest. Deterministic in `(samples order, params, seed)`.
pub fn train_forest(
    samples: &SampleSet,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, LearnerError> {
    let dim = samples.dim().ok_or(LearnerError::SingleClass { counts: [0, 0] })?;
    if let Some(bad) = samples.iter().find(|s| s.d.len() != dim) {
        return Err(LearnerError::DimensionMismatch {
            expected: dim,
            got: bad.d.len(),
        });
    }
    if samples.iter().flat_map(|s| &s.d).any(|v| !v.is_finite()) {
        return Err(LearnerError::Invalid("non-finite training coordinate".into()));
    }
    let counts = samples.class_counts();
    if counts.contains(&0) {
        return Err(LearnerError::SingleClass { counts });
    }
    if params.n_trees == 0 || params.min_samples_split < 2 {
        return Err(LearnerError::Invalid(
            "n_trees must be positive and min_samples_split at least 2".into(),
        ));
    }
    let cols = Columns::new(samples, dim);
    let k = params.features_for(dim);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(&cols, params, k, seed::derive(seed, streams::TREE, t as u64)))
        .collect();
    Ok(ForestModel {
        params: params.clone(),
        seed,
        dim,
        trees,
    })
}
