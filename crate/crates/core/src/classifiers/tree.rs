//! CART classification tree with Gini impurity.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Model, argmax, check_dim, check_training_data};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Carried for run provenance. Split selection is fully determined by the
    /// lowest-feature/lowest-threshold tie rule, so it does not alter the tree.
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            seed: 42,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::param("min_samples_split must be >= 2"));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let depth = self.max_depth.map_or("none".to_string(), |d| d.to_string());
        format!(
            "criterion=gini;max_depth={depth};min_samples_split={};seed={}",
            self.min_samples_split, self.seed
        )
    }
}

/// `1 − Σ (n_c / n)²`.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(Error::param("gini impurity of an empty node"));
    }
    let n = n as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes live in an arena; index 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl TreeModel {
    pub fn dim(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        check_dim(self.n_features, x.len())?;
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return Ok(class),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

impl Model for TreeModel {
    fn dim(&self) -> usize {
        self.n_features
    }

    fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        TreeModel::predict_one(self, x)
    }
}

/// Split quality as the exact rational `Σ_l c²/n_l + Σ_r c²/n_r`; larger means
/// lower weighted child impurity.
#[derive(Clone, Copy, Debug)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        Score {
            num: sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn cmp(&self, other: &Score) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    score: Score,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Higher score wins; then lower feature; then lower threshold.
    fn better_than(&self, other: &Candidate) -> bool {
        use std::cmp::Ordering::*;
        match self.score.cmp(&other.score) {
            Greater => true,
            Less => false,
            Equal => (self.feature, self.threshold) < (other.feature, other.threshold),
        }
    }
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.better_than(&a) { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

fn best_split_on_feature(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    idx: &[usize],
    feature: usize,
    n_classes: usize,
    total: &[u64],
) -> Option<Candidate> {
    let mut order: Vec<(f64, usize)> = idx.iter().map(|&i| (x[[i, feature]], y[i])).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = order.len() as u64;
    let mut left = vec![0u64; n_classes];
    let mut sq_left = 0u64;
    let mut sq_right: u64 = total.iter().map(|c| c * c).sum();
    let mut right = total.to_vec();
    let mut best: Option<Candidate> = None;
    for k in 0..order.len() - 1 {
        let c = order[k].1;
        sq_left += 2 * left[c] + 1;
        left[c] += 1;
        sq_right -= 2 * right[c] - 1;
        right[c] -= 1;
        let (v, next) = (order[k].0, order[k + 1].0);
        if v == next {
            continue;
        }
        let n_left = k as u64 + 1;
        let mut threshold = (v + next) / 2.0;
        if threshold >= next {
            // adjacent floats: keep `next` on the right
            threshold = v;
        }
        let cand = Candidate {
            score: Score::new(sq_left, n_left, sq_right, n - n_left),
            feature,
            threshold,
        };
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            best = Some(cand);
        }
    }
    best
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mut counts = vec![0u64; self.n_classes];
        for &i in &idx {
            counts[self.y[i]] += 1;
        }
        let majority = argmax(counts.iter().copied());
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority });
        if pure || depth_reached || idx.len() < self.params.min_samples_split {
            return slot;
        }

        let (x, y, k) = (self.x, self.y, self.n_classes);
        let best = if idx.len() * x.ncols() > 4096 {
            (0..x.ncols())
                .into_par_iter()
                .map(|f| best_split_on_feature(x, y, &idx, f, k, &counts))
                .reduce(|| None, pick)
        } else {
            (0..x.ncols())
                .map(|f| best_split_on_feature(x, y, &idx, f, k, &counts))
                .fold(None, pick)
        };
        let Some(best) = best else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[[i, best.feature]] <= best.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }
}

/// Greedy recursive partitioning. Every candidate threshold is the midpoint of
/// two consecutive distinct sorted values of a feature; the split with the
/// lowest weighted child Gini wins.
pub fn train_tree(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, params: &TreeParams) -> Result<TreeModel> {
    params.validate()?;
    check_training_data(x, y, n_classes)?;
    let mut b = Builder {
        x,
        y,
        n_classes,
        params,
        nodes: Vec::new(),
    };
    b.build((0..x.nrows()).collect(), 0);
    Ok(TreeModel {
        nodes: b.nodes,
        n_features: x.ncols(),
        n_classes,
    })
}
