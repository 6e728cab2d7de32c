//! CART decision trees with Gini splits.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 - sum p^2` over the class proportions.
pub fn gini_impurity(counts: &[f64]) -> Result<f64> {
    let n: f64 = counts.iter().sum();
    if n <= 0.0 {
        return Err(Error::Input("gini impurity of an empty node".into()));
    }
    Ok(1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_classes: usize,
    n_features: usize,
}

/// Borrowed training data: row-major `x` with `d` columns, class indices `y`.
#[derive(Clone, Copy)]
pub struct TrainView<'a> {
    pub x: &'a [f64],
    pub d: usize,
    pub y: &'a [usize],
    pub n_classes: usize,
}

impl TrainView<'_> {
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[row * self.d + feature]
    }
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl DecisionTree {
    /// Grows a tree on the rows listed in `rows` (duplicates allowed, as in a
    /// bootstrap sample). `rng` is only drawn from when `max_features` limits
    /// the candidate features.
    pub fn fit(data: TrainView<'_>, rows: Vec<usize>, params: &TreeParams, rng: &mut impl Rng) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_classes: data.n_classes,
            n_features: data.d,
        };
        tree.grow(data, rows, 0, params, rng);
        Ok(tree)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn grow(&mut self, data: TrainView<'_>, rows: Vec<usize>, depth: usize, params: &TreeParams, rng: &mut impl Rng) -> usize {
        let mut counts = vec![0.0; data.n_classes];
        for &r in &rows {
            counts[data.y[r]] += 1.0;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });

        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_ok = params.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_ok || rows.len() < params.min_samples_split.max(2) {
            return id;
        }
        let Some(best) = best_split(data, &rows, &counts, params, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| data.value(i, best.feature) <= best.threshold);
        let left = self.grow(data, l, depth + 1, params, rng);
        let right = self.grow(data, r, depth + 1, params, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Class counts of the leaf `row` falls into.
    pub fn leaf_counts(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Majority class of the leaf, lowest index on ties.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax_first(self.leaf_counts(row))
    }

    /// Leaf class proportions.
    pub fn scores_row(&self, row: &[f64]) -> Vec<f64> {
        let counts = self.leaf_counts(row);
        let n: f64 = counts.iter().sum();
        counts.iter().map(|c| c / n).collect()
    }
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn best_split(
    data: TrainView<'_>,
    rows: &[usize],
    parent: &[f64],
    params: &TreeParams,
    rng: &mut impl Rng,
) -> Option<BestSplit> {
    let mut features: Vec<usize> = (0..data.d).collect();
    let limit = match params.max_features {
        Some(m) if m < data.d => {
            features.shuffle(rng);
            m.max(1)
        }
        _ => data.d,
    };
    let n = rows.len() as f64;
    let mut best: Option<BestSplit> = None;
    let mut examined = 0;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    for &f in &features {
        if examined >= limit {
            break;
        }
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (data.value(r, f), data.y[r])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted[0].0 == sorted[sorted.len() - 1].0 {
            // constant here: does not count against the feature budget
            continue;
        }
        examined += 1;
        let mut left = vec![0.0; data.n_classes];
        let mut right = parent.to_vec();
        let (mut sq_l, mut sq_r) = (0.0, parent.iter().map(|c| c * c).sum::<f64>());
        for k in 0..sorted.len() - 1 {
            let c = sorted[k].1;
            sq_l += 2.0 * left[c] + 1.0;
            left[c] += 1.0;
            sq_r -= 2.0 * right[c] - 1.0;
            right[c] -= 1.0;
            let (v, next) = (sorted[k].0, sorted[k + 1].0);
            if v == next {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            // n times the weighted child impurity
            let score = (nl - sq_l / nl) + (nr - sq_r / nr);
            let better = match &best {
                None => true,
                Some(b) => score < b.score || (score == b.score && f < b.feature),
            };
            if better {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(BestSplit {
                    score,
                    feature: f,
                    threshold,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[5.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[1.0, 1.0]).unwrap(), 0.5);
        assert!((gini_impurity(&[7.0, 3.0]).unwrap() - 0.42).abs() < 1e-15);
        assert!(gini_impurity(&[0.0, 0.0]).is_err());
    }

    fn fit(x: &[f64], d: usize, y: &[usize], k: usize, params: &TreeParams) -> DecisionTree {
        let view = TrainView { x, d, y, n_classes: k };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        DecisionTree::fit(view, (0..y.len()).collect(), params, &mut rng).unwrap()
    }

    #[test]
    fn threshold_at_zero() {
        let x = [-3.0, -1.0, -0.5, 0.5, 2.0, 4.0];
        let y = [0, 0, 0, 1, 1, 1];
        let t = fit(&x, 1, &y, 2, &TreeParams::default());
        assert_eq!(t.depth(), 1);
        match &t.nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 0.0),
            n => panic!("{n:?}"),
        }
        for (i, &v) in x.iter().enumerate() {
            assert_eq!(t.predict_row(&[v]), y[i]);
        }
    }

    #[test]
    fn constant_features_make_a_leaf() {
        let x = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let y = [1, 0, 1];
        let t = fit(&x, 2, &y, 2, &TreeParams::default());
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_row(&[1.0, 2.0]), 1);
    }

    #[test]
    fn majority_tie_goes_to_lowest_index() {
        let t = fit(&[0.0, 0.0], 1, &[1, 0], 2, &TreeParams::default());
        assert_eq!(t.predict_row(&[0.0]), 0);
    }

    #[test]
    fn adjacent_floats_split_cleanly() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = fit(&[a, b], 1, &[0, 1], 2, &TreeParams::default());
        assert_eq!(t.predict_row(&[a]), 0);
        assert_eq!(t.predict_row(&[b]), 1);
    }
}
