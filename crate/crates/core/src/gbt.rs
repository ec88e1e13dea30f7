//! Gradient-boosted regression trees for binary edge classification,
//! implemented from scratch: axis-aligned splits on squared error against
//! the logistic-loss residuals, Newton leaf values, sigmoid output.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// A regression tree stored as a flat arena, root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    idx = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Boosted ensemble: `sigmoid(init_score + sum_m stage_weights[m] * tree_m(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub init_score: f64,
    pub trees: Vec<RegressionTree>,
    pub stage_weights: Vec<f64>,
    pub num_features: usize,
}

impl GbtModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        let mut score = self.init_score;
        for (tree, w) in self.trees.iter().zip(&self.stage_weights) {
            score += w * tree.evaluate(x);
        }
        score
    }
}

/// Probability that the edge belongs to the reference solution.
pub fn gbt_predict(model: &GbtModel, features: &[f64]) -> f64 {
    sigmoid(model.raw_score(features))
}

#[derive(Debug, Clone, Copy)]
pub struct GbtParams {
    /// Number of boosting stages.
    pub stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { stages: 100, learning_rate: 0.1, max_depth: 3, min_leaf: 5 }
    }
}

/// Fits the ensemble on raw rows. Fully deterministic: exact greedy splits,
/// no sampling. Errors when only one class is present.
pub fn fit_gbt(rows: &[Vec<f64>], labels: &[u8], params: &GbtParams) -> Result<GbtModel> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::Model("empty or mismatched training data".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Model("training data contains a single class".into()));
    }
    let num_features = rows[0].len();
    let n = rows.len();

    let base_rate = (positives as f64 / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let init_score = (base_rate / (1.0 - base_rate)).ln();

    let mut scores = vec![init_score; n];
    let mut model = GbtModel {
        init_score,
        trees: Vec::with_capacity(params.stages),
        stage_weights: Vec::with_capacity(params.stages),
        num_features,
    };

    let mut residuals = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    for _ in 0..params.stages {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            residuals[i] = labels[i] as f64 - p;
            hessians[i] = (p * (1.0 - p)).max(1e-12);
        }
        let mut builder = TreeBuilder {
            rows,
            residuals: &residuals,
            hessians: &hessians,
            params,
            nodes: Vec::new(),
        };
        let all: Vec<usize> = (0..n).collect();
        builder.grow(all, 0);
        let tree = RegressionTree { nodes: builder.nodes };
        for i in 0..n {
            scores[i] += params.learning_rate * tree.evaluate(&rows[i]);
        }
        model.trees.push(tree);
        model.stage_weights.push(params.learning_rate);
    }
    Ok(model)
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    residuals: &'a [f64],
    hessians: &'a [f64],
    params: &'a GbtParams,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Grows a node for `indices`, returning its arena index.
    fn grow(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        if depth >= self.params.max_depth || indices.len() < 2 * self.params.min_leaf {
            return self.leaf(&indices);
        }
        let Some((feature, threshold)) = self.best_split(&indices) else {
            return self.leaf(&indices);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            indices.into_iter().partition(|&i| self.rows[i][feature] <= threshold);
        if left_idx.is_empty() || right_idx.is_empty() {
            let merged: Vec<usize> = left_idx.into_iter().chain(right_idx).collect();
            return self.leaf(&merged);
        }
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[slot] = TreeNode::Split { feature, threshold, left, right };
        slot
    }

    fn leaf(&mut self, indices: &[usize]) -> usize {
        // Newton step for logistic loss: sum residuals / sum hessians
        let num: f64 = indices.iter().map(|&i| self.residuals[i]).sum();
        let den: f64 = indices.iter().map(|&i| self.hessians[i]).sum();
        let value = if den > 0.0 { num / den } else { 0.0 };
        self.nodes.push(TreeNode::Leaf { value });
        self.nodes.len() - 1
    }

    /// Exact greedy split minimizing squared error of the residuals.
    fn best_split(&self, indices: &[usize]) -> Option<(usize, f64)> {
        let total: f64 = indices.iter().map(|&i| self.residuals[i]).sum();
        let count = indices.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)

        let num_features = self.rows[0].len();
        let mut order: Vec<usize> = indices.to_vec();
        for feature in 0..num_features {
            order.sort_unstable_by(|&a, &b| {
                self.rows[a][feature].partial_cmp(&self.rows[b][feature]).unwrap()
            });
            let mut left_sum = 0.0;
            for (k, &i) in order.iter().enumerate().take(order.len() - 1) {
                left_sum += self.residuals[i];
                let here = self.rows[i][feature];
                let next = self.rows[order[k + 1]][feature];
                if here == next {
                    continue;
                }
                let left_n = (k + 1) as f64;
                let right_n = count - left_n;
                if (left_n as usize) < self.params.min_leaf
                    || (right_n as usize) < self.params.min_leaf
                {
                    continue;
                }
                // variance-reduction gain of splitting at the midpoint
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / left_n + right_sum * right_sum / right_n
                    - total * total / count;
                let threshold = 0.5 * (here + next);
                if best.map_or(true, |(g, _, _)| gain > g + 1e-15) {
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.filter(|&(gain, _, _)| gain > 1e-12).map(|(_, f, t)| (f, t))
    }
}
