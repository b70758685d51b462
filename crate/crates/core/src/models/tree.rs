//! Depth-limited CART classification tree grown on Gini impurity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{argmax_counts, Classifier, Scored};
use crate::{Dataset, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Class histogram of the training rows that reached this leaf.
    Leaf { counts: Vec<usize> },
}

/// Binary classification tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    max_depth: usize,
    feature_dim: usize,
    num_classes: usize,
    nodes: Vec<TreeNode>,
}

/// Split quality as the exact rational `sum_l(c^2)/n_l + sum_r(c^2)/n_r`.
///
/// Maximizing it minimizes the size-weighted Gini impurity of the children.
/// Keeping it rational makes tie-breaking exact.
#[derive(Debug, Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        let (sl, nl, sr, nr) = (sq_left as u128, n_left as u128, sq_right as u128, n_right as u128);
        Self { num: sl * nr + sr * nl, den: nl * nr }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    purity: Purity,
}

impl DecisionTree {
    /// Greedy top-down growth. Every `(feature, midpoint)` pair is scored and
    /// the lowest weighted Gini wins; ties keep the lowest feature index, then
    /// the lowest threshold. A node becomes a leaf at `max_depth`, when it is
    /// pure, when it holds fewer than two rows, or when every feature is
    /// constant inside it.
    pub fn fit(train: &Dataset, max_depth: usize) -> Result<Self> {
        if max_depth == 0 {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        let mut tree = Self {
            max_depth,
            feature_dim: train.feature_dim(),
            num_classes: train.num_classes(),
            nodes: Vec::new(),
        };
        let rows: Vec<usize> = (0..train.len()).collect();
        tree.grow(train, rows, 0);
        Ok(tree)
    }

    fn grow(&mut self, data: &Dataset, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.histogram(data, &rows);
        let id = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || rows.len() < 2 {
            self.nodes.push(TreeNode::Leaf { counts });
            return id;
        }
        let Some(best) = self.best_split(data, &rows) else {
            self.nodes.push(TreeNode::Leaf { counts });
            return id;
        };
        // Reserve the slot; children are appended after it.
        self.nodes.push(TreeNode::Leaf { counts: Vec::new() });
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| data.row(r)[best.feature] <= best.threshold);
        let left = self.grow(data, left_rows, depth + 1);
        let right = self.grow(data, right_rows, depth + 1);
        self.nodes[id] = TreeNode::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    fn histogram(&self, data: &Dataset, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &r in rows {
            counts[data.label(r)] += 1;
        }
        counts
    }

    fn best_split(&self, data: &Dataset, rows: &[usize]) -> Option<Candidate> {
        let total = self.histogram(data, rows);
        let n = rows.len() as u64;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        let mut best: Option<Candidate> = None;

        for feature in 0..self.feature_dim {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (data.row(r)[feature], data.label(r))));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left = vec![0u64; self.num_classes];
            let mut sq_left = 0u64;
            let mut sq_right: u64 = total.iter().map(|&c| (c * c) as u64).sum();
            let mut right: Vec<u64> = total.iter().map(|&c| c as u64).collect();

            for i in 0..sorted.len() - 1 {
                let y = sorted[i].1;
                // (c+1)^2 - c^2 = 2c + 1
                sq_left += 2 * left[y] + 1;
                left[y] += 1;
                sq_right -= 2 * right[y] - 1;
                right[y] -= 1;

                let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
                if lo == hi {
                    continue;
                }
                let n_left = i as u64 + 1;
                let purity = Purity::new(sq_left, n_left, sq_right, n - n_left);
                if best.as_ref().is_none_or(|b| purity.cmp(&b.purity) == Ordering::Greater) {
                    best = Some(Candidate { feature, threshold: midpoint(lo, hi), purity });
                }
            }
        }
        best
    }

    /// Rebuilds a tree from stored nodes and checks its structure.
    pub fn from_parts(max_depth: usize, feature_dim: usize, num_classes: usize, nodes: Vec<TreeNode>) -> Result<Self> {
        let tree = Self { max_depth, feature_dim, num_classes, nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Depth of the deepest leaf; a lone root leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf `x` lands in.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { .. } => return id,
                TreeNode::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_counts(&self, x: &[f64]) -> &[usize] {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { counts } => counts,
            TreeNode::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    /// Checks structural invariants of a tree that did not come from `fit`,
    /// e.g. one read back from disk.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(format!("decision tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf { counts } => {
                    if counts.len() != self.num_classes || counts.iter().sum::<usize>() == 0 {
                        return bad(format!("leaf {id} has an invalid histogram"));
                    }
                }
                TreeNode::Split { feature, left, right, .. } => {
                    if *feature >= self.feature_dim || *left <= id || *right <= id
                        || *left >= self.nodes.len() || *right >= self.nodes.len()
                    {
                        return bad(format!("split {id} has invalid links"));
                    }
                }
            }
        }
        if self.depth() > self.max_depth {
            return bad(format!("depth {} exceeds max_depth {}", self.depth(), self.max_depth));
        }
        Ok(())
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    // Adjacent floats: the midpoint rounds up to `hi` and would send it left.
    if mid < hi {
        mid
    } else {
        lo
    }
}

impl Classifier for DecisionTree {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Majority class of the reached leaf and the share of its training rows
    /// that carry that class.
    fn predict_scored(&self, x: &[f64]) -> Scored {
        let counts = self.leaf_counts(x);
        let label = argmax_counts(counts);
        let total: usize = counts.iter().sum();
        Scored { label, confidence: counts[label] as f64 / total as f64 }
    }
}
