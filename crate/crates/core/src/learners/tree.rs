//! CART decision tree with binary splits on midpoints between sorted values.

use serde::{Deserialize, Serialize};

use super::{Configuration, LearnerError};
use crate::dataspace::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub min_samples_leaf: usize,
    pub max_depth: usize,
}

impl TreeParams {
    pub fn from_config(cfg: &Configuration, prefix: &str) -> Result<Self, LearnerError> {
        let criterion = match cfg.choice(&format!("{prefix}.criterion"))? {
            "gini" => Criterion::Gini,
            "entropy" => Criterion::Entropy,
            other => return Err(LearnerError::InvalidParam("criterion".into(), other.into())),
        };
        Ok(Self {
            criterion,
            min_samples_leaf: cfg.int(&format!("{prefix}.min_s_l"))?.max(1) as usize,
            max_depth: cfg.int(&format!("{prefix}.max_depth"))?.max(1) as usize,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { score: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn impurity(criterion: Criterion, pos: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = pos / n;
    match criterion {
        Criterion::Gini => 2.0 * p * (1.0 - p),
        Criterion::Entropy => {
            let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
            h(p) + h(1.0 - p)
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { score: pos as f64 / n as f64 });
        if depth >= self.params.max_depth || pos == 0 || pos == n || n < 2 * self.params.min_samples_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx, pos) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    fn best_split(&self, idx: &[usize], pos: usize) -> Option<(usize, f64)> {
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf;
        let parent = impurity(self.params.criterion, pos as f64, n as f64) * n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in 0..self.x.cols() {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for k in 0..n - 1 {
                left_pos += order[k].1 as usize;
                let n_left = k + 1;
                if order[k].0 == order[k + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let child = impurity(self.params.criterion, left_pos as f64, n_left as f64) * n_left as f64
                    + impurity(self.params.criterion, (pos - left_pos) as f64, (n - n_left) as f64) * (n - n_left) as f64;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, f, 0.5 * (order[k].0 + order[k + 1].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[u8], params: &TreeParams) -> Self {
        let mut b = Builder { x, y, params: *params, nodes: Vec::new() };
        b.grow((0..y.len()).collect(), 0);
        Self { nodes: b.nodes }
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

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| {
                let mut i = 0;
                loop {
                    match self.nodes[i] {
                        Node::Leaf { score } => return score,
                        Node::Split { feature, threshold, left, right } => {
                            i = if r[feature] <= threshold { left } else { right };
                        }
                    }
                }
            })
            .collect()
    }
}
