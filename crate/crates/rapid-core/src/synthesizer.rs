//! Sequential conditional CART synthesizer and the k-fold synthesizer
//! cross-validation harness.
//!
//! Columns are synthesized one at a time in visit order. The first column is
//! a bootstrap resample of its original marginal; each later column is drawn
//! by fitting a tree of that column on the already-synthesized columns using
//! the original data, dropping each partial synthetic row down the tree, and
//! sampling a donor value uniformly from the reached leaf.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, Dataset};
use crate::error::{RapidError, Result};
use crate::learners::features::{FeatureEncoder, Target};
use crate::learners::tree::{Tree, TreeParams};
use crate::learners::{AttackerFamily, AttackerSpec};
use crate::risk::{
    baseline_marginals, rapid_assess, AssessOptions, BaselinePolicy, ErrorMetric,
};
use crate::stats;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisPlan {
    /// Column synthesis order; `None` uses dataset order. Must be a
    /// permutation of all columns when given.
    pub visit_order: Option<Vec<String>>,
    /// Number of synthetic replicates.
    pub m: usize,
    pub tree: TreeParams,
    pub rng_seed: u64,
}

impl Default for SynthesisPlan {
    fn default() -> Self {
        SynthesisPlan {
            visit_order: None,
            m: 5,
            tree: TreeParams {
                min_leaf: 5,
                min_split: 10,
                complexity_penalty: 1e-8,
                store_rows: true,
                ..TreeParams::default()
            },
            rng_seed: 0,
        }
    }
}

impl SynthesisPlan {
    pub fn with_seed(rng_seed: u64) -> SynthesisPlan {
        SynthesisPlan {
            rng_seed,
            ..SynthesisPlan::default()
        }
    }

    fn resolve_order(&self, data: &Dataset) -> Result<Vec<String>> {
        let all: Vec<String> = data.schema().columns.iter().map(|c| c.name.clone()).collect();
        match &self.visit_order {
            None => Ok(all),
            Some(order) => {
                let mut sorted_a = order.clone();
                let mut sorted_b = all.clone();
                sorted_a.sort();
                sorted_b.sort();
                if sorted_a != sorted_b {
                    return Err(RapidError::InvalidPlan(
                        "visit order must be a permutation of the dataset columns".into(),
                    ));
                }
                Ok(order.clone())
            }
        }
    }
}

/// Produces `plan.m` fully synthetic replicates of `original`. Replicates
/// differ only by RNG stream; the output schema equals the input schema.
pub fn synthesize_cart(original: &Dataset, plan: &SynthesisPlan) -> Result<Vec<Dataset>> {
    if original.n() < 10 {
        return Err(RapidError::TooFewRows(original.n()));
    }
    if plan.m < 1 {
        return Err(RapidError::InvalidPlan("need at least one replicate".into()));
    }
    let order = plan.resolve_order(original)?;
    let mut tree_params = plan.tree.clone();
    tree_params.store_rows = true;
    (0..plan.m)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
            rng.set_stream(1 + rep as u64);
            synthesize_one(original, &order, &tree_params, &mut rng)
        })
        .collect()
}

fn synthesize_one(
    original: &Dataset,
    order: &[String],
    tree_params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let n = original.n();
    // synthetic columns start all-missing and fill in visit order
    let mut synth_cols: Vec<ColumnData> = original
        .columns()
        .iter()
        .map(|c| match c {
            ColumnData::Categorical(_) => ColumnData::Categorical(vec![None; n]),
            ColumnData::Continuous(_) => ColumnData::Continuous(vec![None; n]),
        })
        .collect();
    let col_index = |name: &str| original.schema().column_index(name).expect("validated");

    for (step, name) in order.iter().enumerate() {
        let target_idx = col_index(name);
        if step == 0 {
            let src = &original.columns()[target_idx];
            synth_cols[target_idx] = match src {
                ColumnData::Categorical(v) => ColumnData::Categorical(
                    (0..n).map(|_| v[rng.gen_range(0..n)]).collect(),
                ),
                ColumnData::Continuous(v) => ColumnData::Continuous(
                    (0..n).map(|_| v[rng.gen_range(0..n)]).collect(),
                ),
            };
            continue;
        }
        let predictors: Vec<String> = order[..step].to_vec();

        // fit on original rows where this column is observed
        let target_col = &original.columns()[target_idx];
        let keep: Vec<usize> = (0..n).filter(|&i| !target_col.is_missing(i)).collect();
        if keep.len() < 2 {
            return Err(RapidError::EmptyTraining);
        }
        let train = original.subset(&keep);
        let encoder = FeatureEncoder::fit(&train, &predictors)?;
        let frame = encoder.encode(&train)?;
        let target = match train.column(name)? {
            ColumnData::Categorical(vals) => {
                let crate::dataset::ColumnKind::Categorical { levels } =
                    &train.column_def(name)?.kind
                else {
                    unreachable!()
                };
                Target::Classes {
                    values: vals.iter().map(|v| v.expect("kept")).collect(),
                    n_classes: levels.len(),
                }
            }
            ColumnData::Continuous(vals) => {
                Target::Reals(vals.iter().map(|v| v.expect("kept")).collect())
            }
        };
        let rows: Vec<u32> = (0..frame.n as u32).collect();
        let tree = Tree::fit(&frame, &target, &rows, tree_params, rng);

        // drop partial synthetic rows down the tree and sample leaf donors
        let partial = Dataset::new(original.schema().clone(), synth_cols.clone())?;
        let synth_frame = encoder.encode(&partial)?;
        let mut out_cat: Vec<Option<u32>> = Vec::new();
        let mut out_num: Vec<Option<f64>> = Vec::new();
        let is_cat = matches!(target, Target::Classes { .. });
        for i in 0..n {
            let leaf = tree.leaf_for_row(&synth_frame, i);
            let donors = leaf.rows.as_ref().expect("store_rows set");
            let donor = donors[rng.gen_range(0..donors.len())] as usize;
            match &target {
                Target::Classes { values, .. } => out_cat.push(Some(values[donor])),
                Target::Reals(values) => out_num.push(Some(values[donor])),
            }
        }
        synth_cols[target_idx] = if is_cat {
            ColumnData::Categorical(out_cat)
        } else {
            ColumnData::Continuous(out_num)
        };
    }
    Dataset::new(original.schema().clone(), synth_cols)
}

/// Diagnostic: synthetic rows that exactly equal some original row.
pub fn replicated_rows(original: &Dataset, synthetic: &Dataset) -> usize {
    let row_key = |d: &Dataset, i: usize| -> String {
        let mut key = String::new();
        for col in d.columns() {
            match col {
                ColumnData::Categorical(v) => key.push_str(&format!("c{:?};", v[i])),
                ColumnData::Continuous(v) => key.push_str(&format!("n{:?};", v[i].map(f64::to_bits))),
            }
        }
        key
    };
    let originals: std::collections::HashSet<String> =
        (0..original.n()).map(|i| row_key(original, i)).collect();
    (0..synthetic.n())
        .filter(|&i| originals.contains(&row_key(synthetic, i)))
        .count()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub metric: ErrorMetric,
    pub rng_seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            tau: 0.3,
            epsilon: 0.10,
            metric: ErrorMetric::default(),
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the fold scores.
    pub sd: f64,
    /// Normal-approximation 95% interval for the mean.
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub k: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub attacker: AttackerFamily,
}

/// Expected disclosure risk of a synthesizer under k-fold cross-validation:
/// each fold is held out, data is synthesized from the remaining folds, and
/// only held-out records are scored. Baselines come from the training folds'
/// marginals so the held-out fold stays unseen end to end.
///
/// `synthesize` maps (training data, fold seed) to one synthetic dataset; it
/// may wrap the in-repo CART synthesizer or any external generator.
pub fn rapid_synthesizer_cv<F>(
    original: &Dataset,
    synthesize: F,
    qi: &[String],
    sensitive: &str,
    spec: &AttackerSpec,
    options: &CvOptions,
) -> Result<CvResult>
where
    F: Fn(&Dataset, u64) -> Result<Dataset>,
{
    let categorical = original.column_def(sensitive)?.kind.is_categorical();
    let stratify = categorical.then_some(sensitive);
    let folds = original.split_folds(options.k, stratify, options.rng_seed)?;

    let mut fold_scores = Vec::with_capacity(options.k);
    let mut failures: Vec<(usize, String)> = Vec::new();
    for f in 0..options.k {
        let train_idx = folds.complement_indices(f);
        let holdout_idx = folds.fold_indices(f);
        let train = original.subset(&train_idx);
        let fold_seed = options.rng_seed.wrapping_add(1 + f as u64);
        let synthetic = match synthesize(&train, fold_seed) {
            Ok(d) => d,
            Err(e) => {
                failures.push((f, e.to_string()));
                continue;
            }
        };
        let baseline_policy = if categorical {
            BaselinePolicy::Provided(baseline_marginals(&train, sensitive)?)
        } else {
            BaselinePolicy::AllOriginal
        };
        let assess_opts = AssessOptions {
            tau: options.tau,
            epsilon: options.epsilon,
            metric: options.metric,
            target_rows: Some(holdout_idx),
            baseline_policy,
        };
        match rapid_assess(original, &synthetic, qi, sensitive, spec, &assess_opts) {
            Ok(res) => fold_scores.push(res.score),
            Err(e) => failures.push((f, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(RapidError::SynthesizerFailed(failures));
    }

    let mean = stats::mean(&fold_scores);
    let sd = stats::sample_sd(&fold_scores);
    let half = stats::norm_quantile(0.975) * sd / (fold_scores.len() as f64).sqrt();
    Ok(CvResult {
        mean,
        sd,
        ci_lower: mean - half,
        ci_upper: mean + half,
        fold_scores,
        k: options.k,
        tau: options.tau,
        epsilon: options.epsilon,
        attacker: spec.family(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    fn numbered_csv(n: usize, f: impl Fn(usize) -> String) -> Dataset {
        let mut csv = String::from("x,y\n");
        for i in 0..n {
            csv.push_str(&f(i));
        }
        Dataset::parse_csv(&csv, None, "toy").unwrap()
    }

    #[test]
    fn single_column_is_bootstrap_resample() {
        let mut csv = String::from("x\n");
        for i in 0..1000 {
            csv.push_str(&format!("{}\n", (i as f64 * 0.71).sin() * 5.0));
        }
        let d = Dataset::parse_csv(&csv, None, "toy").unwrap();
        for seed in 0..5 {
            let synth = &synthesize_cart(&d, &SynthesisPlan {
                m: 1,
                ..SynthesisPlan::with_seed(seed)
            })
            .unwrap()[0];
            let get = |d: &Dataset| -> Vec<f64> {
                let ColumnData::Continuous(v) = d.column("x").unwrap() else {
                    unreachable!()
                };
                let mut vals: Vec<f64> = v.iter().map(|x| x.unwrap()).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                vals
            };
            let (orig, synth) = (get(&d), get(synth));
            // two-sample KS distance
            let (mut i, mut j, mut ks) = (0_usize, 0_usize, 0.0_f64);
            while i < orig.len() && j < synth.len() {
                if orig[i] <= synth[j] {
                    i += 1;
                } else {
                    j += 1;
                }
                ks = ks.max((i as f64 / 1000.0 - j as f64 / 1000.0).abs());
            }
            assert!(ks <= 0.15, "seed {seed}: KS {ks}");
        }
    }

    #[test]
    fn correlated_columns_preserve_mapping() {
        // y is a deterministic function of x's level
        let mut csv = String::from("x,y\n");
        for i in 0..60 {
            let x = ["a", "b", "c"][i % 3];
            csv.push_str(&format!("{x},{x}{x}\n"));
        }
        let d = Dataset::parse_csv(&csv, None, "toy").unwrap();
        let plan = SynthesisPlan {
            m: 2,
            tree: TreeParams {
                min_leaf: 1,
                min_split: 2,
                store_rows: true,
                ..TreeParams::default()
            },
            ..SynthesisPlan::with_seed(4)
        };
        for synth in synthesize_cart(&d, &plan).unwrap() {
            let csv = synth.to_csv_string();
            for line in csv.lines().skip(1) {
                let (x, y) = line.split_once(',').unwrap();
                assert_eq!(y, format!("{x}{x}"));
            }
        }
    }

    #[test]
    fn marginals_are_preserved() {
        let d = numbered_csv(1000, |i| {
            format!("{},{}\n", i % 7, if i % 10 < 3 { "a" } else { "b" })
        });
        let synth = &synthesize_cart(&d, &SynthesisPlan::with_seed(9)).unwrap()[0];
        let m = baseline_marginals(synth, "y").unwrap();
        assert!((m["a"] - 0.3).abs() < 0.05, "a: {}", m["a"]);
        assert!((m["b"] - 0.7).abs() < 0.05);
    }

    #[test]
    fn schema_preserved_and_deterministic() {
        let d = numbered_csv(50, |i| format!("{},{}\n", i, if i % 2 == 0 { "p" } else { "q" }));
        let plan = SynthesisPlan {
            m: 3,
            ..SynthesisPlan::with_seed(2)
        };
        let a = synthesize_cart(&d, &plan).unwrap();
        let b = synthesize_cart(&d, &plan).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.columns(), y.columns());
            assert_eq!(
                serde_json::to_string(x.schema()).unwrap(),
                serde_json::to_string(&d.schema()).unwrap()
            );
        }
        // replicates differ by RNG stream
        assert_ne!(a[0].columns(), a[1].columns());
    }

    #[test]
    fn guards() {
        let small = numbered_csv(5, |i| format!("{i},a\n"));
        assert!(matches!(
            synthesize_cart(&small, &SynthesisPlan::default()),
            Err(RapidError::TooFewRows(5))
        ));
        let d = numbered_csv(20, |i| format!("{i},a\n"));
        let bad = SynthesisPlan {
            visit_order: Some(vec!["x".into()]),
            ..SynthesisPlan::default()
        };
        assert!(matches!(
            synthesize_cart(&d, &bad),
            Err(RapidError::InvalidPlan(_))
        ));
    }

    #[test]
    fn replicated_rows_counts_exact_matches() {
        let d = numbered_csv(12, |i| format!("{i},a\n"));
        assert_eq!(replicated_rows(&d, &d), 12);
        let other = numbered_csv(12, |i| format!("{},a\n", i + 100));
        assert_eq!(replicated_rows(&d, &other), 0);
    }

    fn cv_dataset(n: usize) -> Dataset {
        numbered_csv(n, |i| format!("{},{}\n", i, if i % 2 == 0 { "a" } else { "b" }))
    }

    #[test]
    fn leave_one_out_scores_are_indicator_valued() {
        // 11 rows so every training fold keeps the 10-row synthesis minimum
        let d = cv_dataset(11);
        let opts = CvOptions {
            k: 11,
            ..CvOptions::default()
        };
        let res = rapid_synthesizer_cv(
            &d,
            |train, seed| Ok(synthesize_cart(train, &SynthesisPlan {
                m: 1,
                ..SynthesisPlan::with_seed(seed)
            })?.remove(0)),
            &["x".into()],
            "y",
            &AttackerSpec::cart(0),
            &opts,
        )
        .unwrap();
        assert_eq!(res.fold_scores.len(), 11);
        assert!(res.fold_scores.iter().all(|&s| s == 0.0 || s == 1.0));
        assert!((res.mean - stats::mean(&res.fold_scores)).abs() < 1e-12);
    }

    #[test]
    fn holdout_never_reaches_synthesizer() {
        let d = cv_dataset(40);
        let seen: RefCell<Vec<Vec<f64>>> = RefCell::new(Vec::new());
        let opts = CvOptions {
            k: 4,
            rng_seed: 6,
            ..CvOptions::default()
        };
        rapid_synthesizer_cv(
            &d,
            |train, seed| {
                let ColumnData::Continuous(xs) = train.column("x").unwrap() else {
                    unreachable!()
                };
                seen.borrow_mut().push(xs.iter().map(|v| v.unwrap()).collect());
                Ok(synthesize_cart(train, &SynthesisPlan {
                    m: 1,
                    ..SynthesisPlan::with_seed(seed)
                })?.remove(0))
            },
            &["x".into()],
            "y",
            &AttackerSpec::cart(0),
            &opts,
        )
        .unwrap();
        // the x column uniquely tags each record; every record must be
        // excluded from exactly one fold's synthesizer input
        let seen = seen.borrow();
        assert_eq!(seen.len(), 4);
        for id in 0..40 {
            let appearances = seen.iter().filter(|fold| fold.contains(&(id as f64))).count();
            assert_eq!(appearances, 3, "record {id}");
        }
    }

    #[test]
    fn cv_failures_carry_fold_indices() {
        let d = cv_dataset(20);
        let err = rapid_synthesizer_cv(
            &d,
            |_, _| Err(RapidError::EmptyTraining),
            &["x".into()],
            "y",
            &AttackerSpec::cart(0),
            &CvOptions::default(),
        )
        .unwrap_err();
        let RapidError::SynthesizerFailed(folds) = err else {
            panic!("wrong error")
        };
        assert_eq!(folds.len(), 5);
        assert_eq!(folds[2].0, 2);
    }

    #[test]
    fn cv_is_seed_deterministic() {
        let d = cv_dataset(30);
        let run = || {
            rapid_synthesizer_cv(
                &d,
                |train, seed| Ok(synthesize_cart(train, &SynthesisPlan {
                    m: 1,
                    ..SynthesisPlan::with_seed(seed)
                })?.remove(0)),
                &["x".into()],
                "y",
                &AttackerSpec::cart(3),
                &CvOptions {
                    rng_seed: 17,
                    ..CvOptions::default()
                },
            )
            .unwrap()
        };
        assert_eq!(run().fold_scores, run().fold_scores);
    }
}
