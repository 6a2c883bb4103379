//! CART trees: Gini impurity for classification, variance reduction for
//! regression. Categorical splits use exhaustive level-subset search when a
//! node observes at most 10 levels, otherwise levels are ordered by a target
//! heuristic and scanned as an ordered variable. Ties on split gain resolve
//! to the lowest feature index, then the lowest threshold / earliest subset.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureColumn, FeatureFrame, Target};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_split: usize,
    pub min_leaf: usize,
    pub complexity_penalty: f64,
    /// Features considered per split; `None` means all.
    pub mtry: Option<usize>,
    /// Keep training row ids in leaves (needed for donor sampling).
    pub store_rows: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 30,
            min_split: 10,
            min_leaf: 1,
            complexity_penalty: 0.0,
            mtry: None,
            store_rows: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Split {
    /// Goes left when `value <= threshold`.
    Threshold { feature: usize, threshold: f64 },
    /// Goes left when the level is flagged in `left`. Levels unobserved at
    /// this node during training fall back to the heavier child.
    Levels {
        feature: usize,
        left: Vec<bool>,
        observed: Vec<bool>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LeafStats {
    /// Per-class training counts; probabilities are Laplace-smoothed (+1).
    Classes(Vec<u32>),
    Real { mean: f64, n: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Leaf {
    pub stats: LeafStats,
    /// Training row ids, present when `store_rows` was set.
    pub rows: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf(Leaf),
    Internal {
        split: Split,
        left_n: u32,
        right_n: u32,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub root: Node,
    pub n_classes: Option<usize>,
}

impl Tree {
    /// Fits a tree on the given rows of the frame. The rng is consumed only
    /// when `mtry` restricts the per-split feature set.
    pub fn fit<R: Rng>(
        frame: &FeatureFrame,
        target: &Target,
        rows: &[u32],
        params: &TreeParams,
        rng: &mut R,
    ) -> Tree {
        let mut builder = Builder {
            frame,
            target,
            params,
            rng,
        };
        let root = builder.build(rows, 0);
        Tree {
            root,
            n_classes: match target {
                Target::Classes { n_classes, .. } => Some(*n_classes),
                Target::Reals(_) => None,
            },
        }
    }

    pub fn leaf_for_row(&self, frame: &FeatureFrame, i: usize) -> &Leaf {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(leaf) => return leaf,
                Node::Internal {
                    split,
                    left,
                    right,
                    left_n,
                    right_n,
                } => {
                    let go_left = match split {
                        Split::Threshold { feature, threshold } => {
                            let FeatureColumn::Num(vals) = &frame.cols[*feature] else {
                                panic!("feature kind mismatch");
                            };
                            vals[i] <= *threshold
                        }
                        Split::Levels {
                            feature,
                            left,
                            observed,
                        } => {
                            let FeatureColumn::Cat { values, .. } = &frame.cols[*feature] else {
                                panic!("feature kind mismatch");
                            };
                            let lv = values[i] as usize;
                            if lv < observed.len() && observed[lv] {
                                left[lv]
                            } else {
                                left_n >= right_n
                            }
                        }
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    /// Laplace-smoothed class distribution of the leaf reached by row `i`.
    pub fn predict_proba_row(&self, frame: &FeatureFrame, i: usize) -> Vec<f64> {
        let k = self.n_classes.expect("classification tree");
        let leaf = self.leaf_for_row(frame, i);
        let LeafStats::Classes(counts) = &leaf.stats else {
            panic!("leaf kind mismatch");
        };
        let n: u32 = counts.iter().sum();
        let denom = (n as f64) + k as f64;
        counts.iter().map(|&c| (c as f64 + 1.0) / denom).collect()
    }

    pub fn predict_value_row(&self, frame: &FeatureFrame, i: usize) -> f64 {
        let leaf = self.leaf_for_row(frame, i);
        match &leaf.stats {
            LeafStats::Real { mean, .. } => *mean,
            LeafStats::Classes(_) => panic!("leaf kind mismatch"),
        }
    }
}

struct Builder<'a, R: Rng> {
    frame: &'a FeatureFrame,
    target: &'a Target,
    params: &'a TreeParams,
    rng: &'a mut R,
}

struct Candidate {
    split: Split,
    left_rows: Vec<u32>,
    right_rows: Vec<u32>,
}

impl<'a, R: Rng> Builder<'a, R> {
    fn build(&mut self, rows: &[u32], depth: usize) -> Node {
        let n = rows.len();
        let splittable = depth < self.params.max_depth
            && n >= self.params.min_split
            && n >= 2 * self.params.min_leaf
            && !self.is_pure(rows);
        if splittable {
            if let Some(c) = self.best_split(rows) {
                let left = self.build(&c.left_rows, depth + 1);
                let right = self.build(&c.right_rows, depth + 1);
                return Node::Internal {
                    split: c.split,
                    left_n: c.left_rows.len() as u32,
                    right_n: c.right_rows.len() as u32,
                    left: Box::new(left),
                    right: Box::new(right),
                };
            }
        }
        Node::Leaf(self.make_leaf(rows))
    }

    fn is_pure(&self, rows: &[u32]) -> bool {
        match self.target {
            Target::Classes { values, .. } => {
                let first = values[rows[0] as usize];
                rows.iter().all(|&r| values[r as usize] == first)
            }
            Target::Reals(values) => {
                let first = values[rows[0] as usize];
                rows.iter().all(|&r| values[r as usize] == first)
            }
        }
    }

    fn make_leaf(&self, rows: &[u32]) -> Leaf {
        let stats = match self.target {
            Target::Classes { values, n_classes } => {
                let mut counts = vec![0_u32; *n_classes];
                for &r in rows {
                    counts[values[r as usize] as usize] += 1;
                }
                LeafStats::Classes(counts)
            }
            Target::Reals(values) => {
                let sum: f64 = rows.iter().map(|&r| values[r as usize]).sum();
                LeafStats::Real {
                    mean: sum / rows.len() as f64,
                    n: rows.len() as u32,
                }
            }
        };
        Leaf {
            stats,
            rows: self.params.store_rows.then(|| rows.to_vec()),
        }
    }

    fn feature_set(&mut self) -> Vec<usize> {
        let p = self.frame.cols.len();
        match self.params.mtry {
            Some(m) if m < p => {
                let mut picked = rand::seq::index::sample(self.rng, p, m).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[u32]) -> Option<Candidate> {
        let features = self.feature_set();
        let parent_imp = self.impurity(rows);
        let n = rows.len() as f64;
        let mut best: Option<(f64, Split)> = None;
        for &j in &features {
            let found = match &self.frame.cols[j] {
                FeatureColumn::Num(vals) => self.best_numeric_split(rows, j, vals, parent_imp, n),
                FeatureColumn::Cat { values, n_levels } => {
                    self.best_categorical_split(rows, j, values, *n_levels, parent_imp, n)
                }
            };
            if let Some((gain, split)) = found {
                let better = match &best {
                    None => true,
                    Some((bg, _)) => gain > *bg,
                };
                if better {
                    best = Some((gain, split));
                }
            }
        }
        let (gain, split) = best?;
        if gain <= self.params.complexity_penalty || gain <= 1e-12 {
            return None;
        }
        let (left_rows, right_rows) = self.partition(rows, &split);
        Some(Candidate {
            split,
            left_rows,
            right_rows,
        })
    }

    fn partition(&self, rows: &[u32], split: &Split) -> (Vec<u32>, Vec<u32>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &r in rows {
            let go_left = match split {
                Split::Threshold { feature, threshold } => {
                    let FeatureColumn::Num(vals) = &self.frame.cols[*feature] else {
                        unreachable!()
                    };
                    vals[r as usize] <= *threshold
                }
                Split::Levels { feature, left, .. } => {
                    let FeatureColumn::Cat { values, .. } = &self.frame.cols[*feature] else {
                        unreachable!()
                    };
                    left[values[r as usize] as usize]
                }
            };
            if go_left {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        (left, right)
    }

    fn impurity(&self, rows: &[u32]) -> f64 {
        match self.target {
            Target::Classes { values, n_classes } => {
                let mut counts = vec![0_f64; *n_classes];
                for &r in rows {
                    counts[values[r as usize] as usize] += 1.0;
                }
                gini(&counts, rows.len() as f64)
            }
            Target::Reals(values) => {
                let (s, s2) = rows.iter().fold((0.0, 0.0), |(s, s2), &r| {
                    let v = values[r as usize];
                    (s + v, s2 + v * v)
                });
                variance(s, s2, rows.len() as f64)
            }
        }
    }

    fn best_numeric_split(
        &self,
        rows: &[u32],
        feature: usize,
        vals: &[f64],
        parent_imp: f64,
        n: f64,
    ) -> Option<(f64, Split)> {
        let mut sorted: Vec<u32> = rows.to_vec();
        sorted.sort_by(|&a, &b| {
            vals[a as usize]
                .partial_cmp(&vals[b as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(f64, f64)> = None; // (gain, threshold)
        match self.target {
            Target::Classes { values, n_classes } => {
                let mut total = vec![0_f64; *n_classes];
                for &r in rows {
                    total[values[r as usize] as usize] += 1.0;
                }
                let mut left = vec![0_f64; *n_classes];
                for (i, &r) in sorted.iter().enumerate().take(sorted.len() - 1) {
                    left[values[r as usize] as usize] += 1.0;
                    let v = vals[r as usize];
                    let v_next = vals[sorted[i + 1] as usize];
                    if v == v_next {
                        continue;
                    }
                    let nl = (i + 1) as f64;
                    let nr = n - nl;
                    if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                        continue;
                    }
                    let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                    let gain = parent_imp
                        - (nl / n) * gini(&left, nl)
                        - (nr / n) * gini(&right, nr);
                    let threshold = v + 0.5 * (v_next - v);
                    if best.map_or(true, |(bg, _)| gain > bg) {
                        best = Some((gain, threshold));
                    }
                }
            }
            Target::Reals(values) => {
                let (ts, ts2) = rows.iter().fold((0.0, 0.0), |(s, s2), &r| {
                    let y = values[r as usize];
                    (s + y, s2 + y * y)
                });
                let (mut ls, mut ls2) = (0.0, 0.0);
                for (i, &r) in sorted.iter().enumerate().take(sorted.len() - 1) {
                    let y = values[r as usize];
                    ls += y;
                    ls2 += y * y;
                    let v = vals[r as usize];
                    let v_next = vals[sorted[i + 1] as usize];
                    if v == v_next {
                        continue;
                    }
                    let nl = (i + 1) as f64;
                    let nr = n - nl;
                    if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                        continue;
                    }
                    let gain = parent_imp
                        - (nl / n) * variance(ls, ls2, nl)
                        - (nr / n) * variance(ts - ls, ts2 - ls2, nr);
                    let threshold = v + 0.5 * (v_next - v);
                    if best.map_or(true, |(bg, _)| gain > bg) {
                        best = Some((gain, threshold));
                    }
                }
            }
        }
        best.map(|(gain, threshold)| (gain, Split::Threshold { feature, threshold }))
    }

    fn best_categorical_split(
        &self,
        rows: &[u32],
        feature: usize,
        values: &[u32],
        n_levels: usize,
        parent_imp: f64,
        n: f64,
    ) -> Option<(f64, Split)> {
        // Per-level aggregates over this node's rows.
        let k = match self.target {
            Target::Classes { n_classes, .. } => *n_classes,
            Target::Reals(_) => 0,
        };
        let mut counts = vec![0_f64; n_levels];
        let mut class_counts = vec![0_f64; n_levels * k.max(1)];
        let mut sums = vec![0_f64; n_levels];
        let mut sums2 = vec![0_f64; n_levels];
        for &r in rows {
            let lv = values[r as usize] as usize;
            counts[lv] += 1.0;
            match self.target {
                Target::Classes { values: y, .. } => {
                    class_counts[lv * k + y[r as usize] as usize] += 1.0;
                }
                Target::Reals(y) => {
                    let v = y[r as usize];
                    sums[lv] += v;
                    sums2[lv] += v * v;
                }
            }
        }
        let observed_levels: Vec<usize> =
            (0..n_levels).filter(|&lv| counts[lv] > 0.0).collect();
        if observed_levels.len() < 2 {
            return None;
        }
        let mut total_classes = vec![0_f64; k.max(1)];
        if let Target::Classes { values: y, .. } = self.target {
            for &r in rows {
                total_classes[y[r as usize] as usize] += 1.0;
            }
        }

        let evaluate = |left_levels: &[usize]| -> Option<f64> {
            let (mut nl, mut lcc, mut lsum, mut lsum2) = (0.0, vec![0.0; k.max(1)], 0.0, 0.0);
            for &lv in left_levels {
                nl += counts[lv];
                match self.target {
                    Target::Classes { .. } => {
                        for c in 0..k {
                            lcc[c] += class_counts[lv * k + c];
                        }
                    }
                    Target::Reals(_) => {
                        lsum += sums[lv];
                        lsum2 += sums2[lv];
                    }
                }
            }
            let nr = n - nl;
            if (nl as usize) < self.params.min_leaf || (nr as usize) < self.params.min_leaf {
                return None;
            }
            let gain = match self.target {
                Target::Classes { .. } => {
                    let rcc: Vec<f64> =
                        total_classes.iter().zip(&lcc).map(|(t, l)| t - l).collect();
                    parent_imp - (nl / n) * gini(&lcc, nl) - (nr / n) * gini(&rcc, nr)
                }
                Target::Reals(_) => {
                    let (ts, ts2) = (sums.iter().sum::<f64>(), sums2.iter().sum::<f64>());
                    parent_imp
                        - (nl / n) * variance(lsum, lsum2, nl)
                        - (nr / n) * variance(ts - lsum, ts2 - lsum2, nr)
                }
            };
            Some(gain)
        };

        let mut best: Option<(f64, Vec<usize>)> = None;
        if observed_levels.len() <= 10 {
            // Exhaustive proper subsets; pin the last observed level to the
            // right side so complements are not revisited.
            let head = &observed_levels[..observed_levels.len() - 1];
            for mask in 1_u32..(1 << head.len()) {
                let left_levels: Vec<usize> = head
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &lv)| lv)
                    .collect();
                if let Some(gain) = evaluate(&left_levels) {
                    if best.as_ref().map_or(true, |(bg, _)| gain > *bg) {
                        best = Some((gain, left_levels));
                    }
                }
            }
        } else {
            // Order levels by a target score, then scan prefix splits.
            let maj = total_classes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(c, _)| c)
                .unwrap_or(0);
            let score = |lv: usize| -> f64 {
                match self.target {
                    Target::Classes { .. } => class_counts[lv * k + maj] / counts[lv],
                    Target::Reals(_) => sums[lv] / counts[lv],
                }
            };
            let mut ordered = observed_levels.clone();
            ordered.sort_by(|&a, &b| score(a).partial_cmp(&score(b)).unwrap().then(a.cmp(&b)));
            for cut in 1..ordered.len() {
                let left_levels = ordered[..cut].to_vec();
                if let Some(gain) = evaluate(&left_levels) {
                    if best.as_ref().map_or(true, |(bg, _)| gain > *bg) {
                        best = Some((gain, left_levels));
                    }
                }
            }
        }

        best.map(|(gain, left_levels)| {
            let mut left = vec![false; n_levels];
            for lv in left_levels {
                left[lv] = true;
            }
            let mut observed = vec![false; n_levels];
            for &lv in &observed_levels {
                observed[lv] = true;
            }
            (
                gain,
                Split::Levels {
                    feature,
                    left,
                    observed,
                },
            )
        })
    }
}

fn gini(counts: &[f64], n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

fn variance(sum: f64, sum2: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let mean = sum / n;
    (sum2 / n - mean * mean).max(0.0)
}
