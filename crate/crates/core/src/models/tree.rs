//! CART trees stored as preorder node arrays.
//!
//! Classification trees split on Gini impurity. Because leaf statistics are
//! integer class counts, candidate splits are compared exactly: maximizing
//! `sum_c L_c^2 / n_L + sum_c R_c^2 / n_R` (equivalent to minimizing the
//! weighted Gini impurity of the children) is done on rationals in `u128`.
//! Regression trees (used by boosting) split on squared-error reduction of
//! the residuals and take Newton-step leaf values.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! values; `x <= threshold` goes left. Equal-score candidates resolve to the
//! lowest feature index, then the lowest threshold.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetTable, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node<L> {
    Split { feature: usize, threshold: f64, gain: f64, left: usize, right: usize },
    Leaf { value: L },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub n_features: usize,
    /// Preorder; the root is node 0.
    pub nodes: Vec<Node<L>>,
}

/// Leaves hold per-class training counts.
pub type ClassificationTree = Tree<[u32; NUM_CLASSES]>;
/// Leaves hold an additive score.
pub type RegressionTree = Tree<f64>;

impl<L> Tree<L> {
    pub fn leaf(&self, x: &[f64]) -> &L {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<L>(nodes: &[Node<L>], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Root split as `(feature, threshold)`, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    /// Add each split's gain to its feature's slot.
    pub fn accumulate_gains(&self, out: &mut [f64]) {
        for node in &self.nodes {
            if let Node::Split { feature, gain, .. } = node {
                out[*feature] += gain;
            }
        }
    }
}

impl ClassificationTree {
    pub fn predict_proba(&self, x: &[f64]) -> [f64; NUM_CLASSES] {
        let counts = self.leaf(x);
        let total: u32 = counts.iter().sum();
        let mut p = [0.0; NUM_CLASSES];
        for (p, &c) in p.iter_mut().zip(counts) {
            *p = f64::from(c) / f64::from(total);
        }
        p
    }
}

/// Growth limits shared by every tree learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
    /// Drives feature subsampling only.
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1, max_features: None, seed: 0 }
    }
}

impl TreeConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be ≥ 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be ≥ 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidParameter("max_features must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Split statistics for one learning task.
pub(crate) trait Objective {
    type Acc: Clone;
    type Score: Copy;
    type Leaf;

    fn zero(&self) -> Self::Acc;
    fn push(&self, acc: &mut Self::Acc, sample: usize);
    fn pop(&self, acc: &mut Self::Acc, sample: usize);
    fn is_pure(&self, acc: &Self::Acc) -> bool;
    fn score(&self, left: &Self::Acc, n_left: usize, right: &Self::Acc, n_right: usize) -> Self::Score;
    /// Strictly better.
    fn beats(&self, a: Self::Score, b: Self::Score) -> bool;
    /// Impurity decrease of the split, or `None` when it does not improve on the parent.
    fn gain(&self, score: Self::Score, parent: &Self::Acc, n: usize) -> Option<f64>;
    fn leaf(&self, acc: &Self::Acc) -> Self::Leaf;
}

pub(crate) struct GiniObjective<'a> {
    /// Class of each sample.
    pub labels: &'a [u8],
}

#[derive(Clone, Copy)]
pub(crate) struct Ratio {
    num: u128,
    den: u128,
}

fn sum_sq(acc: &[u64; NUM_CLASSES]) -> u128 {
    acc.iter().map(|&c| u128::from(c) * u128::from(c)).sum()
}

impl Objective for GiniObjective<'_> {
    type Acc = [u64; NUM_CLASSES];
    type Score = Ratio;
    type Leaf = [u32; NUM_CLASSES];

    fn zero(&self) -> Self::Acc {
        [0; NUM_CLASSES]
    }

    fn push(&self, acc: &mut Self::Acc, sample: usize) {
        acc[usize::from(self.labels[sample])] += 1;
    }

    fn pop(&self, acc: &mut Self::Acc, sample: usize) {
        acc[usize::from(self.labels[sample])] -= 1;
    }

    fn is_pure(&self, acc: &Self::Acc) -> bool {
        acc.iter().filter(|&&c| c > 0).count() <= 1
    }

    fn score(&self, left: &Self::Acc, nl: usize, right: &Self::Acc, nr: usize) -> Ratio {
        let (nl, nr) = (nl as u128, nr as u128);
        Ratio { num: sum_sq(left) * nr + sum_sq(right) * nl, den: nl * nr }
    }

    fn beats(&self, a: Ratio, b: Ratio) -> bool {
        a.num * b.den > b.num * a.den
    }

    fn gain(&self, s: Ratio, parent: &Self::Acc, n: usize) -> Option<f64> {
        let parent_sq = sum_sq(parent);
        if s.num * n as u128 > parent_sq * s.den {
            Some((s.num as f64 / s.den as f64 - parent_sq as f64 / n as f64).max(0.0))
        } else {
            None
        }
    }

    fn leaf(&self, acc: &Self::Acc) -> [u32; NUM_CLASSES] {
        acc.map(|c| c as u32)
    }
}

/// Squared-error splits on gradients, Newton leaves `scale * sum g / sum h`.
pub(crate) struct NewtonObjective<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub leaf_scale: f64,
}

impl Objective for NewtonObjective<'_> {
    type Acc = (f64, f64);
    type Score = f64;
    type Leaf = f64;

    fn zero(&self) -> Self::Acc {
        (0.0, 0.0)
    }

    fn push(&self, acc: &mut Self::Acc, s: usize) {
        acc.0 += self.grad[s];
        acc.1 += self.hess[s];
    }

    fn pop(&self, acc: &mut Self::Acc, s: usize) {
        acc.0 -= self.grad[s];
        acc.1 -= self.hess[s];
    }

    fn is_pure(&self, _acc: &Self::Acc) -> bool {
        false
    }

    fn score(&self, left: &Self::Acc, nl: usize, right: &Self::Acc, nr: usize) -> f64 {
        left.0 * left.0 / nl as f64 + right.0 * right.0 / nr as f64
    }

    fn beats(&self, a: f64, b: f64) -> bool {
        a > b
    }

    fn gain(&self, s: f64, parent: &Self::Acc, n: usize) -> Option<f64> {
        let g = s - parent.0 * parent.0 / n as f64;
        (g > 0.0).then_some(g)
    }

    fn leaf(&self, acc: &Self::Acc) -> f64 {
        if acc.1.abs() < 1e-150 {
            0.0
        } else {
            self.leaf_scale * acc.0 / acc.1
        }
    }
}

pub(crate) struct Builder<'a, O: Objective> {
    table: &'a DatasetTable,
    /// Table row behind each sample position.
    rows: &'a [usize],
    objective: O,
    config: &'a TreeConfig,
    rng: Rng,
    scratch: Vec<bool>,
    nodes: Vec<Node<O::Leaf>>,
}

impl<'a, O: Objective> Builder<'a, O> {
    pub(crate) fn new(table: &'a DatasetTable, rows: &'a [usize], objective: O, config: &'a TreeConfig) -> Self {
        Self {
            table,
            rows,
            objective,
            config,
            rng: rng::seeded(config.seed),
            scratch: vec![false; rows.len()],
            nodes: Vec::new(),
        }
    }

    fn value(&self, sample: u32, feature: usize) -> f64 {
        self.table.value(self.rows[sample as usize], feature)
    }

    /// Sample positions sorted by each feature, ties by position.
    pub(crate) fn presort(table: &DatasetTable, rows: &[usize]) -> Vec<Vec<u32>> {
        (0..table.n_features())
            .map(|f| {
                let mut order: Vec<u32> = (0..rows.len() as u32).collect();
                order.sort_by(|&a, &b| {
                    table.value(rows[a as usize], f).total_cmp(&table.value(rows[b as usize], f)).then(a.cmp(&b))
                });
                order
            })
            .collect()
    }

    pub(crate) fn build(mut self, orders: Vec<Vec<u32>>) -> Tree<O::Leaf> {
        let all: Vec<u32> = (0..self.rows.len() as u32).collect();
        self.grow(orders, all, 0);
        Tree { n_features: self.table.n_features(), nodes: self.nodes }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.table.n_features();
        match self.config.max_features {
            Some(m) if m < d => {
                let mut f = index::sample(&mut self.rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn grow(&mut self, orders: Vec<Vec<u32>>, members: Vec<u32>, depth: usize) -> usize {
        let at = self.nodes.len();
        let mut total = self.objective.zero();
        for &s in &members {
            self.objective.push(&mut total, s as usize);
        }
        let n = members.len();
        let msl = self.config.min_samples_leaf;
        let depth_ok = self.config.max_depth.is_none_or(|m| depth < m);
        let mut split = None;
        if depth_ok && !self.objective.is_pure(&total) && n >= 2 * msl && !orders.is_empty() {
            split = self.best_split(&orders, &total, n);
        }
        let Some((feature, cut, threshold, gain)) = split else {
            self.nodes.push(Node::Leaf { value: self.objective.leaf(&total) });
            return at;
        };

        for &s in &orders[feature][..=cut] {
            self.scratch[s as usize] = true;
        }
        let mut left_orders = Vec::with_capacity(orders.len());
        let mut right_orders = Vec::with_capacity(orders.len());
        for order in orders {
            let (l, r): (Vec<u32>, Vec<u32>) = order.into_iter().partition(|&s| self.scratch[s as usize]);
            left_orders.push(l);
            right_orders.push(r);
        }
        let (left_members, right_members): (Vec<u32>, Vec<u32>) =
            members.into_iter().partition(|&s| self.scratch[s as usize]);
        for &s in &left_members {
            self.scratch[s as usize] = false;
        }

        self.nodes.push(Node::Leaf { value: self.objective.leaf(&total) });
        let left = self.grow(left_orders, left_members, depth + 1);
        let right = self.grow(right_orders, right_members, depth + 1);
        self.nodes[at] = Node::Split { feature, threshold, gain, left, right };
        at
    }

    /// `(feature, last left position in that feature's order, threshold, gain)`.
    fn best_split(&mut self, orders: &[Vec<u32>], total: &O::Acc, n: usize) -> Option<(usize, usize, f64, f64)> {
        let msl = self.config.min_samples_leaf;
        let mut best: Option<(usize, usize, O::Score)> = None;
        for f in self.candidate_features() {
            let order = &orders[f];
            let mut left = self.objective.zero();
            let mut right = total.clone();
            for i in 0..n - 1 {
                let s = order[i];
                self.objective.push(&mut left, s as usize);
                self.objective.pop(&mut right, s as usize);
                let nl = i + 1;
                if nl < msl || n - nl < msl {
                    continue;
                }
                if self.value(s, f) >= self.value(order[i + 1], f) {
                    continue;
                }
                let score = self.objective.score(&left, nl, &right, n - nl);
                if best.as_ref().is_none_or(|b| self.objective.beats(score, b.2)) {
                    best = Some((f, i, score));
                }
            }
        }
        let (f, i, score) = best?;
        let gain = self.objective.gain(score, total, n)?;
        let lo = self.value(orders[f][i], f);
        let hi = self.value(orders[f][i + 1], f);
        Some((f, i, midpoint(lo, hi), gain))
    }
}

/// Midpoint of `lo < hi`, falling back to `lo` if rounding reaches `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

pub(crate) fn grow_classifier(table: &DatasetTable, rows: &[usize], config: &TreeConfig) -> ClassificationTree {
    let labels: Vec<u8> = rows.iter().map(|&r| table.labels()[r]).collect();
    let orders = Builder::<GiniObjective>::presort(table, rows);
    Builder::new(table, rows, GiniObjective { labels: &labels }, config).build(orders)
}

/// Gini CART classifier on every row of `table`.
pub fn train_tree(table: &DatasetTable, config: &TreeConfig) -> Result<ClassificationTree> {
    if table.is_empty() {
        return Err(Error::NoRows);
    }
    config.validate()?;
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    Ok(grow_classifier(table, &rows, config))
}

pub(crate) fn check_width(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got: x.len() })
    }
}

pub(crate) fn normalize_importance(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.into_iter().map(|g| g / total).collect()
    } else {
        let n = raw.len().max(1);
        vec![1.0 / n as f64; raw.len()]
    }
}
