use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TrainView, TreeParams};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    /// Features per split; `None` means floor(sqrt(D)).
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            bootstrap: true,
            max_depth: None,
            max_features: None,
        }
    }
}

/// Bagged trees voting by majority.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

/// Seed for tree `i`, independent of how trees are scheduled.
fn tree_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl RandomForest {
    pub fn fit(data: TrainView<'_>, params: &ForestParams, seed: u64) -> Result<Self> {
        let n = data.y.len();
        let mtry = params
            .max_features
            .unwrap_or_else(|| ((data.d as f64).sqrt().floor() as usize).max(1));
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: 2,
            max_features: Some(mtry),
        };
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, i));
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(data, rows, &tree_params, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomForest {
            trees,
            n_classes: data.n_classes,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn votes_row(&self, row: &[f64]) -> Vec<usize> {
        let mut votes = vec![0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(row)] += 1;
        }
        votes
    }

    /// Vote shares.
    pub fn scores_row(&self, row: &[f64]) -> Vec<f64> {
        let n = self.trees.len() as f64;
        self.votes_row(row).into_iter().map(|v| v as f64 / n).collect()
    }
}
