//! Binary decision trees with exact greedy split search.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<L> {
    pub nodes: Vec<Node<L>>,
    pub max_depth: usize,
}

impl<L> DecisionTree<L> {
    pub fn leaf(&self, row: ArrayView1<'_, f64>) -> &L {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf(v) => return v,
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &L> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(v) => Some(v),
            Node::Split { .. } => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn depth(&self) -> usize {
        fn walk<L>(nodes: &[Node<L>], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf(_) => 0,
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    fn push(&mut self, node: Node<L>) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

/// Column-major copy of a feature matrix; split search walks one column at a time.
pub(crate) struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    pub(crate) fn new(x: &Array2<f64>) -> Self {
        let cols = x.columns().into_iter().map(|c| c.to_vec()).collect();
        Self { cols }
    }

    pub(crate) fn count(&self) -> usize {
        self.cols.len()
    }

    fn col(&self, f: usize) -> &[f64] {
        &self.cols[f]
    }
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

fn sort_by_feature(col: &[f64], rows: &[usize], buf: &mut Vec<(f64, usize)>) {
    buf.clear();
    buf.extend(rows.iter().map(|&r| (col[r], r)));
    buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
}

fn partition(cols: &Columns, rows: &[usize], feature: usize, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    let col = cols.col(feature);
    rows.iter().partition(|&&r| col[r] <= threshold)
}

#[derive(Debug, Clone, Copy)]
pub struct ClassTreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub features_per_split: usize,
}

/// Grows a Gini classification tree over `rows` (duplicates allowed, e.g. a bootstrap sample).
///
/// Leaves hold the class distribution of their rows, normalized to sum to 1.
pub(crate) fn fit_class_tree<R: Rng>(
    cols: &Columns,
    labels: &[usize],
    rows: &[usize],
    class_count: usize,
    params: ClassTreeParams,
    rng: &mut R,
) -> DecisionTree<Vec<f64>> {
    let mut tree = DecisionTree {
        nodes: Vec::new(),
        max_depth: params.max_depth,
    };
    let mut buf = Vec::with_capacity(rows.len());
    grow_class(cols, labels, rows.to_vec(), 0, class_count, params, rng, &mut tree, &mut buf);
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow_class<R: Rng>(
    cols: &Columns,
    labels: &[usize],
    rows: Vec<usize>,
    depth: usize,
    k: usize,
    params: ClassTreeParams,
    rng: &mut R,
    tree: &mut DecisionTree<Vec<f64>>,
    buf: &mut Vec<(f64, usize)>,
) -> usize {
    let mut counts = vec![0usize; k];
    for &r in &rows {
        counts[labels[r]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= params.max_depth || rows.len() < params.min_samples_split.max(2) {
        return tree.push(Node::Leaf(distribution(&counts)));
    }
    let Some(best) = best_gini_split(cols, labels, &rows, &counts, params.features_per_split, rng, buf) else {
        return tree.push(Node::Leaf(distribution(&counts)));
    };
    let (l, r) = partition(cols, &rows, best.feature, best.threshold);
    let at = tree.push(Node::Leaf(Vec::new()));
    let left = grow_class(cols, labels, l, depth + 1, k, params, rng, tree, buf);
    let right = grow_class(cols, labels, r, depth + 1, k, params, rng, tree, buf);
    tree.nodes[at] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    at
}

fn distribution(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

fn best_gini_split<R: Rng>(
    cols: &Columns,
    labels: &[usize],
    rows: &[usize],
    totals: &[usize],
    features_per_split: usize,
    rng: &mut R,
    buf: &mut Vec<(f64, usize)>,
) -> Option<Candidate> {
    let n = rows.len() as f64;
    let total_sq: f64 = totals.iter().map(|&c| (c * c) as f64).sum();
    // maximize sumsq_l/n_l + sumsq_r/n_r; the unsplit node scores total_sq/n
    let parent = total_sq / n;
    let mut best: Option<Candidate> = None;
    let m = features_per_split.clamp(1, cols.count());
    let mut features = sample(rng, cols.count(), m).into_vec();
    features.sort_unstable();
    let mut left = vec![0usize; totals.len()];
    for f in features {
        sort_by_feature(cols.col(f), rows, buf);
        left.iter_mut().for_each(|c| *c = 0);
        let mut sq_l = 0.0;
        let mut sq_r = total_sq;
        for i in 0..buf.len() - 1 {
            let c = labels[buf[i].1];
            let right_c = totals[c] - left[c];
            sq_l += (2 * left[c] + 1) as f64;
            sq_r -= (2 * right_c - 1) as f64;
            left[c] += 1;
            if buf[i].0 == buf[i + 1].0 {
                continue;
            }
            let n_l = (i + 1) as f64;
            let score = sq_l / n_l + sq_r / (n - n_l);
            if score > parent + 1e-12 && best.as_ref().map_or(true, |b| score > b.score) {
                best = Some(Candidate {
                    score,
                    feature: f,
                    threshold: 0.5 * (buf[i].0 + buf[i + 1].0),
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct GradTreeParams {
    pub max_depth: usize,
    pub reg_lambda: f64,
    pub reg_gamma: f64,
    pub min_child_weight: f64,
}

/// Regularized leaf weight: the Newton step −G/(H+λ).
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

/// Split gain with complexity penalty γ per added leaf.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Fits one regression tree to first/second-order gradients, exact greedy over all features.
pub fn fit_grad_tree(
    x: &Array2<f64>,
    grad: &[f64],
    hess: &[f64],
    params: GradTreeParams,
) -> DecisionTree<f64> {
    let cols = Columns::new(x);
    let rows: Vec<usize> = (0..x.nrows()).collect();
    fit_grad_tree_cols(&cols, &rows, grad, hess, params)
}

pub(crate) fn fit_grad_tree_cols(
    cols: &Columns,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: GradTreeParams,
) -> DecisionTree<f64> {
    let mut tree = DecisionTree {
        nodes: Vec::new(),
        max_depth: params.max_depth,
    };
    let mut buf = Vec::with_capacity(rows.len());
    grow_grad(cols, rows.to_vec(), 0, grad, hess, params, &mut tree, &mut buf);
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow_grad(
    cols: &Columns,
    rows: Vec<usize>,
    depth: usize,
    grad: &[f64],
    hess: &[f64],
    params: GradTreeParams,
    tree: &mut DecisionTree<f64>,
    buf: &mut Vec<(f64, usize)>,
) -> usize {
    let g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h: f64 = rows.iter().map(|&r| hess[r]).sum();
    let leaf = leaf_weight(g, h, params.reg_lambda);
    if depth >= params.max_depth || rows.len() < 2 {
        return tree.push(Node::Leaf(leaf));
    }
    let mut best: Option<Candidate> = None;
    for f in 0..cols.count() {
        sort_by_feature(cols.col(f), &rows, buf);
        let (mut gl, mut hl) = (0.0, 0.0);
        for i in 0..buf.len() - 1 {
            let r = buf[i].1;
            gl += grad[r];
            hl += hess[r];
            if buf[i].0 == buf[i + 1].0 {
                continue;
            }
            let (gr, hr) = (g - gl, h - hl);
            if hl < params.min_child_weight || hr < params.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, params.reg_lambda, params.reg_gamma);
            if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.score) {
                best = Some(Candidate {
                    score: gain,
                    feature: f,
                    threshold: 0.5 * (buf[i].0 + buf[i + 1].0),
                });
            }
        }
    }
    let Some(best) = best else {
        return tree.push(Node::Leaf(leaf));
    };
    let (l, r) = partition(cols, &rows, best.feature, best.threshold);
    let at = tree.push(Node::Leaf(0.0));
    let left = grow_grad(cols, l, depth + 1, grad, hess, params, tree, buf);
    let right = grow_grad(cols, r, depth + 1, grad, hess, params, tree, buf);
    tree.nodes[at] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    at
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_split_leaves_are_newton_steps() {
        // one feature, two clean groups; λ = 1
        let x = array![[0.0], [1.0], [2.0], [10.0], [11.0]];
        let grad = [0.5, 0.25, 0.75, -0.5, -1.0];
        let hess = [0.25, 0.5, 0.125, 0.25, 0.5];
        let params = GradTreeParams {
            max_depth: 1,
            reg_lambda: 1.0,
            reg_gamma: 0.0,
            min_child_weight: 0.0,
        };
        let tree = fit_grad_tree(&x, &grad, &hess, params);
        assert_eq!(tree.leaf_count(), 2);
        let Node::Split { feature, threshold, .. } = tree.nodes[0] else {
            panic!("root should split");
        };
        assert_eq!(feature, 0);
        assert_eq!(threshold, 6.0);
        let left = *tree.leaf(x.row(0));
        let right = *tree.leaf(x.row(4));
        assert_eq!(left, -(0.5 + 0.25 + 0.75) / (0.25 + 0.5 + 0.125 + 1.0));
        assert_eq!(right, -(-0.5 - 1.0) / (0.25 + 0.5 + 1.0));
    }

    #[test]
    fn gamma_blocks_weak_splits() {
        let x = array![[0.0], [1.0]];
        let grad = [0.1, -0.1];
        let hess = [1.0, 1.0];
        let gain = split_gain(0.1, 1.0, -0.1, 1.0, 1.0, 0.0);
        let params = GradTreeParams {
            max_depth: 3,
            reg_lambda: 1.0,
            reg_gamma: gain * 2.0,
            min_child_weight: 0.0,
        };
        assert_eq!(fit_grad_tree(&x, &grad, &hess, params).leaf_count(), 1);
    }

    #[test]
    fn class_tree_separates_and_respects_depth() {
        let x = array![[0.0, 5.0], [1.0, 4.0], [2.0, 3.0], [3.0, 2.0], [4.0, 1.0], [5.0, 0.0]];
        let labels = [0, 0, 1, 1, 2, 2];
        let cols = Columns::new(&x);
        let rows: Vec<usize> = (0..6).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ClassTreeParams {
            max_depth: 8,
            min_samples_split: 2,
            features_per_split: 2,
        };
        let tree = fit_class_tree(&cols, &labels, &rows, 3, params, &mut rng);
        for (i, &l) in labels.iter().enumerate() {
            let dist = tree.leaf(x.row(i));
            assert_eq!(dist.len(), 3);
            assert_eq!(dist[l], 1.0);
        }
        let shallow = fit_class_tree(&cols, &labels, &rows, 3, ClassTreeParams { max_depth: 1, ..params }, &mut rng);
        assert_eq!(shallow.depth(), 1);
    }
}
