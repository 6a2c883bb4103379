//! Random forests over the CART builder. Trees train in parallel; each tree
//! draws from its own RNG stream derived from (seed, tree index), so parallel
//! and serial training produce identical forests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureFrame, Target};
use super::tree::{Tree, TreeParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features considered per split; `None` means ceil(sqrt(p)).
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub min_split: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            min_leaf: 5,
            min_split: 10,
            max_depth: 30,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(frame: &FeatureFrame, target: &Target, params: &ForestParams, seed: u64) -> Forest {
        let p = frame.cols.len();
        let mtry = params
            .mtry
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .clamp(1, p);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_split: params.min_split,
            min_leaf: params.min_leaf,
            complexity_penalty: 0.0,
            mtry: if mtry < p { Some(mtry) } else { None },
            store_rows: false,
        };
        let n = frame.n;
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + t as u64);
                let rows: Vec<u32> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
                } else {
                    (0..n as u32).collect()
                };
                Tree::fit(frame, target, &rows, &tree_params, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    /// Unweighted mean of per-tree Laplace-smoothed leaf class frequencies.
    pub fn predict_proba_row(&self, frame: &FeatureFrame, i: usize) -> Vec<f64> {
        let mut acc = self.trees[0].predict_proba_row(frame, i);
        for tree in &self.trees[1..] {
            for (a, p) in acc.iter_mut().zip(tree.predict_proba_row(frame, i)) {
                *a += p;
            }
        }
        let m = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }

    pub fn predict_value_row(&self, frame: &FeatureFrame, i: usize) -> f64 {
        self.trees
            .iter()
            .map(|t| t.predict_value_row(frame, i))
            .sum::<f64>()
            / self.trees.len() as f64
    }
}
