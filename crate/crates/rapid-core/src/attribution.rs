//! Record-level risk diagnostics: subgroup stratification of at-risk rates
//! and a logistic attribution model regressing the risk flags on
//! quasi-identifiers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, ColumnKind, Dataset};
use crate::error::{RapidError, Result};
use crate::learners::logistic::logistic_irls;
use crate::risk::RapidResult;
use crate::stats;
use crate::uncertainty::{wilson_interval, IntervalEstimate};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratifyBy {
    pub column: String,
    /// Equal-width bin count; required for continuous columns.
    pub bins: Option<usize>,
}

impl StratifyBy {
    pub fn column(name: &str) -> StratifyBy {
        StratifyBy {
            column: name.to_string(),
            bins: None,
        }
    }

    pub fn binned(name: &str, bins: usize) -> StratifyBy {
        StratifyBy {
            column: name.to_string(),
            bins: Some(bins),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratumRow {
    /// One label per grouping column.
    pub labels: Vec<String>,
    pub n: usize,
    pub n_at_risk: usize,
    pub rate: f64,
    pub ci: IntervalEstimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratifiedRisk {
    pub by: Vec<String>,
    pub groups: Vec<StratumRow>,
    pub overall: f64,
}

/// Per-row group labels for one grouping column.
fn group_labels(data: &Dataset, by: &StratifyBy) -> Result<Vec<String>> {
    let def = data.column_def(&by.column)?;
    match (&def.kind, data.column(&by.column)?) {
        (ColumnKind::Categorical { levels }, ColumnData::Categorical(vals)) => Ok(vals
            .iter()
            .map(|v| match v {
                Some(idx) => levels[*idx as usize].clone(),
                None => "<missing>".to_string(),
            })
            .collect()),
        (ColumnKind::Continuous, ColumnData::Continuous(vals)) => {
            let bins = by
                .bins
                .filter(|&b| b >= 1)
                .ok_or_else(|| RapidError::MissingBinSpec(by.column.clone()))?;
            let present: Vec<f64> = vals.iter().flatten().copied().collect();
            if present.is_empty() {
                return Err(RapidError::EmptyColumn(by.column.clone()));
            }
            let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
            Ok(vals
                .iter()
                .map(|v| match v {
                    Some(x) => {
                        let b = (((x - lo) / width) as usize).min(bins - 1);
                        let (a, z) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
                        format!("[{a:.4},{z:.4})")
                    }
                    None => "<missing>".to_string(),
                })
                .collect())
        }
        _ => unreachable!(),
    }
}

/// At-risk rate by subgroup with a Wilson interval per group. `evaluated`
/// must contain exactly the records scored in `result`, in order. The
/// group-size-weighted average of rates equals the overall score.
pub fn stratify_risk(
    result: &RapidResult,
    evaluated: &Dataset,
    by: &[StratifyBy],
) -> Result<StratifiedRisk> {
    let flags: Vec<bool> = result.records.iter().map(|r| r.at_risk()).collect();
    stratify_flags(&flags, evaluated, by)
}

/// Same stratification from bare flags (e.g. a reloaded per-record table).
pub fn stratify_flags(
    flags: &[bool],
    evaluated: &Dataset,
    by: &[StratifyBy],
) -> Result<StratifiedRisk> {
    if flags.len() != evaluated.n() {
        return Err(RapidError::LengthMismatch(format!(
            "{} scored records vs {} dataset rows",
            flags.len(),
            evaluated.n()
        )));
    }
    if by.is_empty() {
        return Err(RapidError::EmptyInput("no grouping columns".into()));
    }
    let per_col: Vec<Vec<String>> = by
        .iter()
        .map(|b| group_labels(evaluated, b))
        .collect::<Result<_>>()?;
    let mut counts: BTreeMap<Vec<String>, (usize, usize)> = BTreeMap::new();
    for (i, &flag) in flags.iter().enumerate() {
        let key: Vec<String> = per_col.iter().map(|c| c[i].clone()).collect();
        let entry = counts.entry(key).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += flag as usize;
    }
    let groups = counts
        .into_iter()
        .map(|(labels, (n, k))| {
            Ok(StratumRow {
                labels,
                n,
                n_at_risk: k,
                rate: k as f64 / n as f64,
                ci: wilson_interval(k, n, 0.95)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StratifiedRisk {
        by: by.iter().map(|b| b.column.clone()).collect(),
        groups,
        overall: flags.iter().filter(|&&f| f).count() as f64 / flags.len().max(1) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interactions {
    None,
    TwoWay,
    ThreeWay,
}

#[derive(Debug, Clone)]
pub struct AttributionOptions {
    pub interactions: Interactions,
    /// Conditioning values for continuous quasi-identifiers in the predicted
    /// grid; defaults to the sample quartiles.
    pub conditioning: BTreeMap<String, Vec<f64>>,
}

impl Default for AttributionOptions {
    fn default() -> Self {
        AttributionOptions {
            interactions: Interactions::None,
            conditioning: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionTerm {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    /// One "column=value" label per quasi-identifier.
    pub labels: Vec<String>,
    pub log_odds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionModel {
    /// Intercept first, then main effects and interactions.
    pub terms: Vec<AttributionTerm>,
    /// Terms removed for rank deficiency (constant or duplicate columns).
    pub dropped_terms: Vec<String>,
    /// True when separation forced the ridge fallback.
    pub ridge_applied: bool,
    pub converged: bool,
    pub grid: Vec<GridPoint>,
}

/// One multiplicative factor of a design term.
#[derive(Clone)]
enum Factor {
    /// Indicator of one categorical level (dummy coding, first level as
    /// reference).
    Level { col: usize, level: u32 },
    /// Raw continuous value.
    Value { col: usize },
}

#[derive(Clone)]
struct Term {
    name: String,
    factors: Vec<Factor>,
}

/// Raw per-row predictor values the factors evaluate against.
enum RawCol {
    Cat(Vec<Option<u32>>),
    Num(Vec<f64>),
}

fn eval_term(term: &Term, raw: &[RawCol], i: usize) -> f64 {
    term.factors
        .iter()
        .map(|f| match f {
            Factor::Level { col, level } => match &raw[*col] {
                RawCol::Cat(v) => (v[i] == Some(*level)) as u32 as f64,
                RawCol::Num(_) => unreachable!(),
            },
            Factor::Value { col } => match &raw[*col] {
                RawCol::Num(v) => v[i],
                RawCol::Cat(_) => unreachable!(),
            },
        })
        .product()
}

/// Logistic regression of risk flags on quasi-identifiers. Categorical
/// predictors use dummy coding with the first level as reference; continuous
/// predictors enter untransformed. Interaction terms multiply columns from
/// distinct predictors.
pub fn fit_attribution(
    flags: &[bool],
    evaluated: &Dataset,
    qi: &[String],
    options: &AttributionOptions,
) -> Result<AttributionModel> {
    if flags.len() != evaluated.n() {
        return Err(RapidError::LengthMismatch(format!(
            "{} flags vs {} rows",
            flags.len(),
            evaluated.n()
        )));
    }
    if flags.iter().all(|&f| f) || flags.iter().all(|&f| !f) {
        return Err(RapidError::DegenerateFlags);
    }
    if qi.is_empty() {
        return Err(RapidError::EmptyInput("no quasi-identifiers".into()));
    }
    let n = evaluated.n();

    // raw predictor storage; missing continuous values take the column median
    let mut raw: Vec<RawCol> = Vec::new();
    let mut base_terms_per_col: Vec<Vec<Term>> = Vec::new();
    for (c, name) in qi.iter().enumerate() {
        let def = evaluated.column_def(name)?;
        match (&def.kind, evaluated.column(name)?) {
            (ColumnKind::Categorical { levels }, ColumnData::Categorical(vals)) => {
                raw.push(RawCol::Cat(vals.clone()));
                base_terms_per_col.push(
                    (1..levels.len() as u32)
                        .map(|lv| Term {
                            name: format!("{name}={}", levels[lv as usize]),
                            factors: vec![Factor::Level { col: c, level: lv }],
                        })
                        .collect(),
                );
            }
            (ColumnKind::Continuous, ColumnData::Continuous(vals)) => {
                let mut present: Vec<f64> = vals.iter().flatten().copied().collect();
                if present.is_empty() {
                    return Err(RapidError::EmptyColumn(name.clone()));
                }
                present.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = stats::quantile_sorted(&present, 0.5);
                raw.push(RawCol::Num(
                    vals.iter().map(|v| v.unwrap_or(median)).collect(),
                ));
                base_terms_per_col.push(vec![Term {
                    name: name.clone(),
                    factors: vec![Factor::Value { col: c }],
                }]);
            }
            _ => unreachable!(),
        }
    }

    let mut terms: Vec<Term> = base_terms_per_col.iter().flatten().cloned().collect();
    let cross = |groups: &[&Vec<Term>]| -> Vec<Term> {
        let mut out = vec![Term {
            name: String::new(),
            factors: vec![],
        }];
        for g in groups {
            out = out
                .iter()
                .flat_map(|t| {
                    g.iter().map(move |u| Term {
                        name: if t.name.is_empty() {
                            u.name.clone()
                        } else {
                            format!("{}:{}", t.name, u.name)
                        },
                        factors: t.factors.iter().chain(&u.factors).cloned().collect(),
                    })
                })
                .collect();
        }
        out
    };
    let p = base_terms_per_col.len();
    if options.interactions != Interactions::None {
        for a in 0..p {
            for b in (a + 1)..p {
                terms.extend(cross(&[&base_terms_per_col[a], &base_terms_per_col[b]]));
            }
        }
    }
    if options.interactions == Interactions::ThreeWay {
        for a in 0..p {
            for b in (a + 1)..p {
                for c in (b + 1)..p {
                    terms.extend(cross(&[
                        &base_terms_per_col[a],
                        &base_terms_per_col[b],
                        &base_terms_per_col[c],
                    ]));
                }
            }
        }
    }

    // evaluate columns, dropping constants and duplicates (rank deficiency)
    let mut kept: Vec<Term> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut dropped_terms = Vec::new();
    for term in terms {
        let col: Vec<f64> = (0..n).map(|i| eval_term(&term, &raw, i)).collect();
        let constant = col.iter().all(|&v| v == col[0]);
        let duplicate = cols.iter().any(|c| c == &col);
        if constant || duplicate {
            dropped_terms.push(term.name);
        } else {
            kept.push(term);
            cols.push(col);
        }
    }

    let d = cols.len();
    let mut x = vec![0.0_f64; n * d];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            x[i * d + j] = col[i];
        }
    }
    let y: Vec<f64> = flags.iter().map(|&f| f as u32 as f64).collect();
    let fit = logistic_irls(&x, d, &y, 1e-8);

    let mut out_terms = vec![AttributionTerm {
        name: "(intercept)".into(),
        estimate: fit.coef[0],
        se: fit.se[0],
        z: if fit.se[0] > 0.0 { fit.coef[0] / fit.se[0] } else { 0.0 },
    }];
    for (j, term) in kept.iter().enumerate() {
        let (est, se) = (fit.coef[j + 1], fit.se[j + 1]);
        out_terms.push(AttributionTerm {
            name: term.name.clone(),
            estimate: est,
            se,
            z: if se > 0.0 { est / se } else { 0.0 },
        });
    }

    let grid = predicted_grid(evaluated, qi, options, &raw, &kept, &fit.coef)?;
    Ok(AttributionModel {
        terms: out_terms,
        dropped_terms,
        ridge_applied: fit.ridge_applied,
        converged: fit.converged,
        grid,
    })
}

/// Predicted log-odds over the cross of observed categorical levels and
/// conditioning values for continuous predictors.
fn predicted_grid(
    evaluated: &Dataset,
    qi: &[String],
    options: &AttributionOptions,
    raw: &[RawCol],
    kept: &[Term],
    coef: &[f64],
) -> Result<Vec<GridPoint>> {
    // per-column candidate values, each with a display label
    let mut axes: Vec<Vec<(String, RawCell)>> = Vec::new();
    for (c, name) in qi.iter().enumerate() {
        match (&evaluated.column_def(name)?.kind, &raw[c]) {
            (ColumnKind::Categorical { levels }, RawCol::Cat(vals)) => {
                let mut observed: Vec<u32> = vals.iter().flatten().copied().collect();
                observed.sort_unstable();
                observed.dedup();
                axes.push(
                    observed
                        .iter()
                        .map(|&lv| {
                            (
                                format!("{name}={}", levels[lv as usize]),
                                RawCell::Cat(Some(lv)),
                            )
                        })
                        .collect(),
                );
            }
            (ColumnKind::Continuous, RawCol::Num(vals)) => {
                let values = match options.conditioning.get(name) {
                    Some(vs) => vs.clone(),
                    None => {
                        let mut sorted = vals.clone();
                        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        let mut qs: Vec<f64> = [0.25, 0.5, 0.75]
                            .iter()
                            .map(|&q| stats::quantile_sorted(&sorted, q))
                            .collect();
                        qs.dedup();
                        qs
                    }
                };
                axes.push(
                    values
                        .iter()
                        .map(|&v| (format!("{name}={v}"), RawCell::Num(v)))
                        .collect(),
                );
            }
            _ => unreachable!(),
        }
    }
    let mut grid = vec![(Vec::<String>::new(), Vec::<RawCell>::new())];
    for axis in &axes {
        grid = grid
            .iter()
            .flat_map(|(labels, cells)| {
                axis.iter().map(move |(lab, cell)| {
                    let mut l = labels.clone();
                    let mut c = cells.clone();
                    l.push(lab.clone());
                    c.push(cell.clone());
                    (l, c)
                })
            })
            .collect();
    }
    Ok(grid
        .into_iter()
        .map(|(labels, cells)| {
            let point_raw: Vec<RawCol> = cells
                .iter()
                .map(|c| match c {
                    RawCell::Cat(v) => RawCol::Cat(vec![*v]),
                    RawCell::Num(v) => RawCol::Num(vec![*v]),
                })
                .collect();
            let log_odds = coef[0]
                + kept
                    .iter()
                    .enumerate()
                    .map(|(j, t)| coef[j + 1] * eval_term(t, &point_raw, 0))
                    .sum::<f64>();
            GridPoint { labels, log_odds }
        })
        .collect())
}

#[derive(Clone)]
enum RawCell {
    Cat(Option<u32>),
    Num(f64),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::rapid_categorical;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn result_with_flags(flags: &[bool]) -> RapidResult {
        let probs: Vec<Vec<f64>> = flags
            .iter()
            .map(|&f| if f { vec![1.0, 0.0] } else { vec![0.5, 0.5] })
            .collect();
        rapid_categorical(&probs, &vec![0; flags.len()], &[0.5, 0.5], 0.3).unwrap()
    }

    #[test]
    fn single_group_equals_overall() {
        let d = Dataset::parse_csv("g\nx\nx\nx\nx\n", None, "toy").unwrap();
        let res = result_with_flags(&[true, false, true, false]);
        let s = stratify_risk(&res, &d, &[StratifyBy::column("g")]).unwrap();
        assert_eq!(s.groups.len(), 1);
        assert_eq!(s.groups[0].rate, s.overall);
        assert_eq!(s.groups[0].n, 4);
    }

    #[test]
    fn split_groups_get_their_rates() {
        let d = Dataset::parse_csv("g\na\na\nb\nb\n", None, "toy").unwrap();
        let res = result_with_flags(&[true, true, false, false]);
        let s = stratify_risk(&res, &d, &[StratifyBy::column("g")]).unwrap();
        let by_label: BTreeMap<&str, f64> = s
            .groups
            .iter()
            .map(|g| (g.labels[0].as_str(), g.rate))
            .collect();
        assert_eq!(by_label["a"], 1.0);
        assert_eq!(by_label["b"], 0.0);
    }

    #[test]
    fn weighted_average_recovers_overall() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..100 {
            let n = rng.gen_range(4..80);
            let mut csv = String::from("g,h\n");
            for _ in 0..n {
                csv.push_str(&format!(
                    "{},{}\n",
                    ["a", "b", "c"][rng.gen_range(0..3)],
                    rng.gen_range(0.0..10.0),
                ));
            }
            let d = Dataset::parse_csv(&csv, None, "toy").unwrap();
            let flags: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            if flags.iter().all(|&f| f == flags[0]) {
                continue;
            }
            let res = result_with_flags(&flags);
            let s = stratify_risk(
                &res,
                &d,
                &[StratifyBy::column("g"), StratifyBy::binned("h", 3)],
            )
            .unwrap();
            let total_n: usize = s.groups.iter().map(|g| g.n).sum();
            assert_eq!(total_n, n);
            let weighted: f64 = s.groups.iter().map(|g| g.rate * g.n as f64).sum::<f64>()
                / n as f64;
            assert!((weighted - s.overall).abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_needs_bins() {
        let d = Dataset::parse_csv("h\n1.5\n2.5\n", None, "toy").unwrap();
        let res = result_with_flags(&[true, false]);
        assert!(matches!(
            stratify_risk(&res, &d, &[StratifyBy::column("h")]),
            Err(RapidError::MissingBinSpec(_))
        ));
    }

    #[test]
    fn deterministic_rule_dominates() {
        // flags set exactly when edu = low
        let mut csv = String::from("edu,age\n");
        let mut flags = Vec::new();
        for i in 0..60 {
            let low = i % 3 == 0;
            csv.push_str(&format!(
                "{},{}\n",
                if low { "low" } else { "high" },
                20 + (i % 40)
            ));
            flags.push(low);
        }
        let d = Dataset::parse_csv(&csv, None, "toy").unwrap();
        let model = fit_attribution(
            &flags,
            &d,
            &["edu".into(), "age".into()],
            &AttributionOptions::default(),
        )
        .unwrap();
        // low is the first observed level, so high gets the dummy; its
        // coefficient must be large and negative
        let high = model
            .terms
            .iter()
            .find(|t| t.name == "edu=high")
            .expect("term present");
        assert!(high.estimate < -4.0, "estimate {}", high.estimate);
        // predicted probability near 1 in the low cells
        for p in &model.grid {
            let prob = 1.0 / (1.0 + (-p.log_odds).exp());
            if p.labels[0] == "edu=low" {
                assert!(prob > 0.9, "{:?}: {prob}", p.labels);
            } else {
                assert!(prob < 0.1, "{:?}: {prob}", p.labels);
            }
        }
    }

    #[test]
    fn null_flags_give_small_z() {
        let mut insignificant = 0_usize;
        let mut total = 0_usize;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut csv = String::from("g,h\n");
            for _ in 0..200 {
                csv.push_str(&format!(
                    "{},{:.3}\n",
                    ["a", "b"][rng.gen_range(0..2)],
                    rng.gen_range(0.0..1.0)
                ));
            }
            let d = Dataset::parse_csv(&csv, None, "toy").unwrap();
            let flags: Vec<bool> = (0..200).map(|_| rng.gen_bool(0.3)).collect();
            let model = fit_attribution(
                &flags,
                &d,
                &["g".into(), "h".into()],
                &AttributionOptions::default(),
            )
            .unwrap();
            for t in model.terms.iter().skip(1) {
                total += 1;
                insignificant += (t.z.abs() < 2.0) as usize;
            }
        }
        assert!(
            insignificant as f64 >= 0.9 * total as f64,
            "{insignificant}/{total}"
        );
    }

    #[test]
    fn interactions_expand_terms() {
        let d = Dataset::parse_csv(
            "a,b,c\nx,u,1\ny,v,2\nx,v,3\ny,u,4\nx,u,5\ny,v,6\nx,v,1\ny,u,2\n",
            None,
            "toy",
        )
        .unwrap();
        let flags = [true, false, true, false, false, true, true, false];
        let qi = vec!["a".to_string(), "b".into(), "c".into()];
        let none = fit_attribution(&flags, &d, &qi, &AttributionOptions::default()).unwrap();
        let two = fit_attribution(&flags, &d, &qi, &AttributionOptions {
            interactions: Interactions::TwoWay,
            ..AttributionOptions::default()
        })
        .unwrap();
        let three = fit_attribution(&flags, &d, &qi, &AttributionOptions {
            interactions: Interactions::ThreeWay,
            ..AttributionOptions::default()
        })
        .unwrap();
        let n_terms = |m: &AttributionModel| m.terms.len() + m.dropped_terms.len();
        assert!(n_terms(&none) < n_terms(&two));
        assert!(n_terms(&two) < n_terms(&three));
        assert!(two.terms.iter().any(|t| t.name.contains(':')));
        // all in-sample predictions finite
        for p in &three.grid {
            assert!(p.log_odds.is_finite());
        }
    }

    #[test]
    fn degenerate_flags_rejected() {
        let d = Dataset::parse_csv("g\na\nb\n", None, "toy").unwrap();
        assert!(matches!(
            fit_attribution(&[true, true], &d, &["g".into()], &AttributionOptions::default()),
            Err(RapidError::DegenerateFlags)
        ));
    }

    #[test]
    fn conditioning_values_respected() {
        let d = Dataset::parse_csv("h\n1\n2\n3\n4\n5\n6\n", None, "toy").unwrap();
        let flags = [true, false, true, false, true, false];
        let mut opts = AttributionOptions::default();
        opts.conditioning.insert("h".into(), vec![30.0, 50.0, 70.0]);
        let model = fit_attribution(&flags, &d, &["h".into()], &opts).unwrap();
        let labels: Vec<&str> = model.grid.iter().map(|p| p.labels[0].as_str()).collect();
        assert_eq!(labels, vec!["h=30", "h=50", "h=70"]);
    }
}
