//! Subcommand implementations: thin orchestration over the core library
//! plus CSV/JSON input and output plumbing.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use rapid_core::attribution::{
    fit_attribution, stratify_flags, AttributionOptions, Interactions, StratifyBy,
};
use rapid_core::calibration::threshold_curve;
use rapid_core::dataset::{Dataset, Schema};
use rapid_core::learners::{AttackerFamily, AttackerSpec};
use rapid_core::risk::{
    aggregate_multi_model, rapid_assess, rapid_categorical, AssessOptions, BaselinePolicy,
    ErrorMetric, Predicted, RapidResult, RecordRisk,
};
use rapid_core::simgen;
use rapid_core::synthesizer::{
    rapid_synthesizer_cv, replicated_rows, synthesize_cart, CvOptions, SynthesisPlan,
};

use crate::report::{self, digest_file, AssessmentSummary};
use crate::{
    AssessArgs, AttackerArg, AttributeArgs, CliError, CurveArgs, CvArgs, DataArgs,
    InteractionsArg, MetricArg, ModeArg, SimulateArgs, SweepArgs, SynthesizeArgs,
};

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn load_schema(path: &Option<PathBuf>) -> Result<Option<Schema>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => Ok(Some(Schema::from_json_file(p)?)),
    }
}

fn load_dataset(path: &Path, schema: Option<&Schema>) -> Result<Dataset, CliError> {
    Ok(Dataset::load_csv(path, schema)?)
}

fn attacker_spec(arg: AttackerArg, seed: u64) -> AttackerSpec {
    match arg {
        AttackerArg::Rf => AttackerSpec::forest(seed),
        AttackerArg::Cart => AttackerSpec::cart(seed),
        AttackerArg::Logistic => AttackerSpec::logistic(seed),
    }
}

fn metric(arg: MetricArg, delta: f64) -> Result<ErrorMetric, CliError> {
    let m = match arg {
        MetricArg::Symmetric => ErrorMetric::SymmetricRelative { delta },
        MetricArg::Stabilised => ErrorMetric::StabilisedRelative { delta },
        MetricArg::Absolute => ErrorMetric::Absolute,
    };
    m.validate().map_err(|e| config(e.to_string()))?;
    Ok(m)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn assess_options(args: &DataArgs) -> Result<AssessOptions, CliError> {
    let target_rows = match (args.mode, &args.holdout_ids) {
        (ModeArg::All, None) => None,
        (ModeArg::All, Some(_)) => {
            return Err(config("--holdout-ids requires --mode holdout"));
        }
        (ModeArg::Holdout, None) => {
            return Err(config("--mode holdout requires --holdout-ids"));
        }
        (ModeArg::Holdout, Some(p)) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            let rows: Vec<usize> = text
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| config(format!("bad holdout row index {t:?}")))
                })
                .collect::<Result<_, _>>()?;
            Some(rows)
        }
    };
    Ok(AssessOptions {
        tau: args.tau,
        epsilon: args.epsilon,
        metric: metric(args.metric, args.delta)?,
        target_rows,
        baseline_policy: BaselinePolicy::AllOriginal,
    })
}

fn require_data(args: &DataArgs) -> Result<(PathBuf, &str), CliError> {
    let original = args
        .original
        .clone()
        .ok_or_else(|| config("--original is required"))?;
    if args.released.is_empty() {
        return Err(config("at least one --released is required"));
    }
    if args.qi.is_empty() {
        return Err(config("--qi is required"));
    }
    let sensitive = args
        .sensitive
        .as_deref()
        .ok_or_else(|| config("--sensitive is required"))?;
    Ok((original, sensitive))
}

fn predicted_str(p: &Predicted) -> String {
    match p {
        Predicted::Label(l) => l.clone(),
        Predicted::Value(v) => format!("{v}"),
    }
}

fn records_csv(res: &RapidResult) -> String {
    let rows = res.evaluated_rows.clone().unwrap_or_default();
    let trues = res.true_values.as_deref().unwrap_or(&[]);
    let preds = res.predicted.as_deref().unwrap_or(&[]);
    let categorical = matches!(res.records.first(), Some(RecordRisk::Categorical(_)));
    let mut out = String::from(if categorical {
        "row,true,predicted,g,b,r,at_risk\n"
    } else {
        "row,true,predicted,e,at_risk\n"
    });
    for (i, rec) in res.records.iter().enumerate() {
        let row = rows.get(i).copied().unwrap_or(i);
        let t = trues.get(i).map(predicted_str).unwrap_or_default();
        let p = preds.get(i).map(predicted_str).unwrap_or_default();
        match rec {
            RecordRisk::Categorical(r) => out.push_str(&format!(
                "{row},{t},{p},{},{},{},{}\n",
                r.g, r.b, r.r, r.at_risk
            )),
            RecordRisk::Continuous(r) => {
                out.push_str(&format!("{row},{t},{p},{},{}\n", r.e, r.at_risk))
            }
        }
    }
    out
}

#[derive(Serialize)]
struct AssessConfig {
    qi: Vec<String>,
    sensitive: String,
    attackers: Vec<String>,
    tau: f64,
    epsilon: f64,
    metric: ErrorMetric,
    mode: String,
    baseline_policy: String,
    seed: u64,
    boot: usize,
    level: f64,
}

#[derive(Serialize)]
struct ReplicateBlock {
    released: String,
    attackers: Vec<AssessmentSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    envelope: Option<EnvelopeBlock>,
}

#[derive(Serialize)]
struct EnvelopeBlock {
    mean_score: f64,
    max_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_attacker: Option<AttackerFamily>,
}

#[derive(Serialize)]
struct AssessResults {
    replicates: Vec<ReplicateBlock>,
    /// Per-attacker score averaged over released replicates.
    attacker_means: BTreeMap<String, f64>,
    /// Mean of per-replicate scores (envelope mean when several attackers).
    mean_score: f64,
}

pub fn assess(args: AssessArgs) -> Result<(), CliError> {
    if let Some(probs) = &args.probs_in {
        return assess_from_probs(&args, probs.clone());
    }
    let started = Instant::now();
    let (original_path, sensitive) = require_data(&args.data)?;
    let schema = load_schema(&args.data.schema)?;
    let original = load_dataset(&original_path, schema.as_ref())?;
    let options = assess_options(&args.data)?;
    let attackers = if args.data.attackers.is_empty() {
        vec![AttackerArg::Rf]
    } else {
        args.data.attackers.clone()
    };
    if args.records_out.is_some() && (args.data.released.len() > 1 || attackers.len() > 1) {
        return Err(config(
            "--records-out needs exactly one --released and one --attacker",
        ));
    }

    let mut inputs = vec![digest_file(&original_path)?];
    if let Some(s) = &args.data.schema {
        inputs.push(digest_file(s)?);
    }
    let mut replicates = Vec::new();
    let mut per_attacker: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut replicate_means = Vec::new();
    for rel_path in &args.data.released {
        inputs.push(digest_file(rel_path)?);
        let released = load_dataset(rel_path, schema.as_ref())?;
        let mut results = Vec::new();
        for &att in &attackers {
            let spec = attacker_spec(att, args.data.seed);
            let res = rapid_assess(
                &original,
                &released,
                &args.data.qi,
                sensitive,
                &spec,
                &options,
            )?;
            if let Some(out) = &args.records_out {
                write_text(Some(out), &records_csv(&res))?;
            }
            per_attacker
                .entry(spec.family().to_string())
                .or_default()
                .push(res.score);
            results.push(res);
        }
        let envelope = if results.len() > 1 {
            let agg = aggregate_multi_model(&results)?;
            replicate_means.push(agg.mean_score);
            Some(EnvelopeBlock {
                mean_score: agg.mean_score,
                max_score: agg.max_score,
                max_attacker: agg.max_attacker,
            })
        } else {
            replicate_means.push(results[0].score);
            None
        };
        let summaries = results
            .iter()
            .map(|r| AssessmentSummary::from_result(r, args.boot, args.level, args.data.seed))
            .collect::<Result<Vec<_>, _>>()?;
        replicates.push(ReplicateBlock {
            released: rel_path.display().to_string(),
            attackers: summaries,
            envelope,
        });
    }
    let results = AssessResults {
        replicates,
        attacker_means: per_attacker
            .into_iter()
            .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
            .collect(),
        mean_score: replicate_means.iter().sum::<f64>() / replicate_means.len() as f64,
    };
    let cfg = AssessConfig {
        qi: args.data.qi.clone(),
        sensitive: sensitive.to_string(),
        attackers: attackers
            .iter()
            .map(|a| attacker_spec(*a, 0).family().to_string())
            .collect(),
        tau: args.data.tau,
        epsilon: args.data.epsilon,
        metric: metric(args.data.metric, args.data.delta)?,
        mode: match args.data.mode {
            ModeArg::All => "all".into(),
            ModeArg::Holdout => "holdout".into(),
        },
        baseline_policy: "all_original".into(),
        seed: args.data.seed,
        boot: args.boot,
        level: args.level,
    };
    let rep = report::report("assess", inputs, cfg, results, started);
    report::write_report(&rep, args.report.as_deref())
}

#[derive(Serialize)]
struct ProbsConfig {
    tau: f64,
    seed: u64,
    boot: usize,
    level: f64,
    baselines: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ProbsResults {
    summary: AssessmentSummary,
}

/// Precomputed-probability mode: score a CSV of attacker class probabilities
/// without training anything.
fn assess_from_probs(args: &AssessArgs, path: PathBuf) -> Result<(), CliError> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("probability CSV: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let true_col = headers
        .iter()
        .position(|h| h == "true")
        .ok_or_else(|| config("probability CSV needs a `true` column"))?;
    let classes: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != true_col)
        .map(|(_, h)| h.clone())
        .collect();
    let mut probs: Vec<Vec<f64>> = Vec::new();
    let mut y_true: Vec<u32> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("probability CSV: {e}")))?;
        let mut row = Vec::with_capacity(classes.len());
        for (i, cell) in record.iter().enumerate() {
            if i == true_col {
                let y = classes
                    .iter()
                    .position(|c| c == cell)
                    .ok_or_else(|| CliError::Data(format!("unknown true class {cell:?}")))?;
                y_true.push(y as u32);
            } else {
                row.push(
                    cell.parse::<f64>()
                        .map_err(|_| CliError::Data(format!("bad probability {cell:?}")))?,
                );
            }
        }
        probs.push(row);
    }
    let baselines_map: BTreeMap<String, f64> = match &args.baselines {
        Some(spec) => spec
            .split(',')
            .map(|pair| {
                let (name, val) = pair
                    .split_once('=')
                    .ok_or_else(|| config(format!("bad baseline entry {pair:?}")))?;
                let v: f64 = val
                    .parse()
                    .map_err(|_| config(format!("bad baseline value {val:?}")))?;
                Ok((name.trim().to_string(), v))
            })
            .collect::<Result<_, CliError>>()?,
        None => {
            // fall back to the marginals of the supplied true labels
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for &y in &y_true {
                *counts.entry(classes[y as usize].clone()).or_default() += 1;
            }
            counts
                .into_iter()
                .map(|(k, c)| (k, c as f64 / y_true.len() as f64))
                .collect()
        }
    };
    let baseline_vec: Vec<f64> = classes
        .iter()
        .map(|c| baselines_map.get(c).copied().unwrap_or(f64::NAN))
        .collect();
    let res = rapid_categorical(&probs, &y_true, &baseline_vec, args.data.tau)?;
    let summary = AssessmentSummary::from_result(&res, args.boot, args.level, args.data.seed)?;
    let rep = report::report(
        "assess",
        vec![digest_file(&path)?],
        ProbsConfig {
            tau: args.data.tau,
            seed: args.data.seed,
            boot: args.boot,
            level: args.level,
            baselines: baselines_map,
        },
        ProbsResults { summary },
        started,
    );
    report::write_report(&rep, args.report.as_deref())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(config(format!("--grid must be start:stop:step, got {spec:?}")));
    };
    let parse = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| config(format!("bad grid number {t:?}")))
    };
    let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
    if step <= 0.0 || stop < start {
        return Err(config("grid needs stop >= start and step > 0"));
    }
    let mut grid = Vec::new();
    let mut i = 0_usize;
    loop {
        // round away accumulated float noise (0.30000000000000004 -> 0.3)
        let v = ((start + step * i as f64) * 1e10).round() / 1e10;
        if v > stop + 1e-12 {
            break;
        }
        grid.push(v);
        i += 1;
    }
    if grid.is_empty() {
        return Err(config("empty threshold grid"));
    }
    Ok(grid)
}

pub fn curve(args: CurveArgs) -> Result<(), CliError> {
    let grid = parse_grid(&args.grid)?;
    let (original_path, sensitive) = require_data(&args.data)?;
    let schema = load_schema(&args.data.schema)?;
    let original = load_dataset(&original_path, schema.as_ref())?;
    let options = assess_options(&args.data)?;
    let attacker = args.data.attackers.first().copied().unwrap_or(AttackerArg::Rf);
    let spec = attacker_spec(attacker, args.data.seed);
    let mut per_replicate: Vec<Vec<f64>> = Vec::new();
    let mut kind = None;
    for rel_path in &args.data.released {
        let released = load_dataset(rel_path, schema.as_ref())?;
        let res = rapid_assess(
            &original,
            &released,
            &args.data.qi,
            sensitive,
            &spec,
            &options,
        )?;
        let c = threshold_curve(&res.records, &grid)?;
        kind = Some(c.kind);
        per_replicate.push(c.scores);
    }
    let m = per_replicate.len() as f64;
    let scores: Vec<f64> = (0..grid.len())
        .map(|j| per_replicate.iter().map(|r| r[j]).sum::<f64>() / m)
        .collect();
    let curve = rapid_core::calibration::ThresholdCurve {
        grid,
        scores,
        kind: kind.expect("at least one replicate"),
        replicate_scores: (per_replicate.len() > 1).then_some(per_replicate),
    };
    write_text(args.out.as_deref(), &curve.to_csv_string())
}

#[derive(Serialize)]
struct CvConfig {
    qi: Vec<String>,
    sensitive: String,
    k: usize,
    synthesizer: String,
    attacker: String,
    tau: f64,
    epsilon: f64,
    seed: u64,
    baseline_policy: String,
}

pub fn cv(args: CvArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if args.qi.is_empty() {
        return Err(config("--qi is required"));
    }
    let sensitive = args
        .sensitive
        .as_deref()
        .ok_or_else(|| config("--sensitive is required"))?;
    if args.synth_cmd.is_none() && args.synth != "internal-cart" {
        return Err(config(format!(
            "unknown synthesizer {:?} (use internal-cart or --synth-cmd)",
            args.synth
        )));
    }
    let schema = load_schema(&args.schema)?;
    let original = load_dataset(&args.original, schema.as_ref())?;
    let spec = attacker_spec(args.attacker, args.seed);
    let options = CvOptions {
        k: args.k,
        tau: args.tau,
        epsilon: args.epsilon,
        metric: metric(args.metric, args.delta)?,
        rng_seed: args.seed,
    };
    let synth_cmd = args.synth_cmd.clone();
    let synthesize = |train: &Dataset, seed: u64| -> rapid_core::Result<Dataset> {
        match &synth_cmd {
            None => Ok(synthesize_cart(train, &SynthesisPlan {
                m: 1,
                ..SynthesisPlan::with_seed(seed)
            })?
            .remove(0)),
            Some(cmd) => external_synthesize(cmd, train, seed),
        }
    };
    let result = rapid_synthesizer_cv(&original, synthesize, &args.qi, sensitive, &spec, &options)?;
    let mut inputs = vec![digest_file(&args.original)?];
    if let Some(s) = &args.schema {
        inputs.push(digest_file(s)?);
    }
    let cfg = CvConfig {
        qi: args.qi.clone(),
        sensitive: sensitive.to_string(),
        k: args.k,
        synthesizer: args.synth_cmd.clone().unwrap_or_else(|| args.synth.clone()),
        attacker: spec.family().to_string(),
        tau: args.tau,
        epsilon: args.epsilon,
        seed: args.seed,
        baseline_policy: "training_folds".into(),
    };
    let rep = report::report("cv", inputs, cfg, result, started);
    report::write_report(&rep, args.report.as_deref())
}

/// External synthesizer bridge: the command reads a training CSV on stdin
/// and writes a synthetic CSV on stdout; its seed arrives in RAPID_SEED.
fn external_synthesize(cmd: &str, train: &Dataset, seed: u64) -> rapid_core::Result<Dataset> {
    use std::process::{Command, Stdio};
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .env("RAPID_SEED", seed.to_string())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(train.to_csv_string().as_bytes())?;
    let out = child.wait_with_output()?;
    if !out.status.success() {
        return Err(rapid_core::RapidError::Schema(format!(
            "synthesizer command exited with {}",
            out.status
        )));
    }
    let text = String::from_utf8(out.stdout)
        .map_err(|e| rapid_core::RapidError::Schema(format!("synthesizer output: {e}")))?;
    let synthetic = Dataset::parse_csv(&text, None, "synthesizer command")?;
    let names = |d: &Dataset| -> Vec<String> {
        d.schema().columns.iter().map(|c| c.name.clone()).collect()
    };
    if names(&synthetic) != names(train) {
        return Err(rapid_core::RapidError::Schema(
            "synthesizer output columns do not match the input".into(),
        ));
    }
    Ok(synthetic)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let data = simgen::generate(&simgen::SimConfig {
        n: args.n,
        kappa: args.kappa,
        rng_seed: args.seed,
    })?;
    write_text(args.out.as_deref(), &data.to_csv_string())
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    if args.kappas.is_empty() {
        return Err(config("--kappas is required"));
    }
    let result = simgen::kappa_sweep(&args.kappas, &simgen::SweepConfig {
        n: args.n,
        replications: args.reps,
        attacker: attacker_spec(args.attacker, args.seed),
        tau: args.tau,
        rng_seed: args.seed,
    })?;
    let mut csv = String::from("kappa,replication,rapid,accuracy\n");
    for run in &result.runs {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            run.kappa, run.replication, run.rapid, run.accuracy
        ));
    }
    write_text(args.out.as_deref(), &csv)?;
    for row in &result.table {
        eprintln!(
            "kappa={} mean_rapid={:.4} sd={:.4} mean_accuracy={:.4}",
            row.kappa, row.mean_rapid, row.sd_rapid, row.mean_accuracy
        );
    }
    Ok(())
}

pub fn synthesize(args: SynthesizeArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema)?;
    let original = load_dataset(&args.original, schema.as_ref())?;
    let plan = SynthesisPlan {
        m: args.m,
        ..SynthesisPlan::with_seed(args.seed)
    };
    let replicates = synthesize_cart(&original, &plan)?;
    for (i, synth) in replicates.iter().enumerate() {
        let path = PathBuf::from(format!("{}_{}.csv", args.out_prefix.display(), i + 1));
        synth.write_csv(&path)?;
        eprintln!(
            "wrote {} ({} rows, {} replicated originals)",
            path.display(),
            synth.n(),
            replicated_rows(&original, synth)
        );
    }
    Ok(())
}

fn parse_stratify(spec: &str) -> Result<StratifyBy, CliError> {
    match spec.split_once(':') {
        None => Ok(StratifyBy::column(spec)),
        Some((col, bins)) => {
            let bins: usize = bins
                .parse()
                .map_err(|_| config(format!("bad bin count in {spec:?}")))?;
            Ok(StratifyBy::binned(col, bins))
        }
    }
}

pub fn attribute(args: AttributeArgs) -> Result<(), CliError> {
    if args.qi.is_empty() {
        return Err(config("--qi is required"));
    }
    let text = std::fs::read_to_string(&args.records).map_err(|e| {
        config(format!(
            "cannot read per-record CSV {}: {e} (produce one with assess --records-out)",
            args.records.display()
        ))
    })?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("per-record CSV: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let row_col = headers
        .iter()
        .position(|h| h == "row")
        .ok_or_else(|| CliError::Data("per-record CSV needs a `row` column".into()))?;
    let flag_col = headers
        .iter()
        .position(|h| h == "at_risk")
        .ok_or_else(|| CliError::Data("per-record CSV needs an `at_risk` column".into()))?;
    let mut rows: Vec<usize> = Vec::new();
    let mut flags: Vec<bool> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("per-record CSV: {e}")))?;
        rows.push(
            record[row_col]
                .parse()
                .map_err(|_| CliError::Data(format!("bad row index {:?}", &record[row_col])))?,
        );
        flags.push(
            record[flag_col]
                .parse()
                .map_err(|_| CliError::Data(format!("bad flag {:?}", &record[flag_col])))?,
        );
    }
    let schema = load_schema(&args.schema)?;
    let data = load_dataset(&args.data, schema.as_ref())?;
    if let Some(&bad) = rows.iter().find(|&&r| r >= data.n()) {
        return Err(CliError::Data(format!(
            "record row {bad} is out of range for {} rows",
            data.n()
        )));
    }
    let evaluated = data.subset(&rows);

    let mut conditioning = BTreeMap::new();
    for spec in &args.conditioning {
        let (col, vals) = spec
            .split_once('=')
            .ok_or_else(|| config(format!("bad conditioning spec {spec:?}")))?;
        let vals: Vec<f64> = vals
            .split('|')
            .map(|v| {
                v.parse()
                    .map_err(|_| config(format!("bad conditioning value {v:?}")))
            })
            .collect::<Result<_, _>>()?;
        conditioning.insert(col.to_string(), vals);
    }
    let options = AttributionOptions {
        interactions: match args.interactions {
            InteractionsArg::None => Interactions::None,
            InteractionsArg::TwoWay => Interactions::TwoWay,
            InteractionsArg::ThreeWay => Interactions::ThreeWay,
        },
        conditioning,
    };
    let model = fit_attribution(&flags, &evaluated, &args.qi, &options)?;
    let mut terms = String::from("term,estimate,se,z\n");
    for t in &model.terms {
        terms.push_str(&format!("{},{},{},{}\n", t.name, t.estimate, t.se, t.z));
    }
    if model.ridge_applied {
        eprintln!("note: separation detected; ridge fallback applied");
    }
    for d in &model.dropped_terms {
        eprintln!("note: dropped rank-deficient term {d}");
    }
    write_text(args.terms_out.as_deref(), &terms)?;
    if let Some(grid_out) = &args.grid_out {
        let mut grid = String::from("combination,log_odds\n");
        for p in &model.grid {
            grid.push_str(&format!("{},{}\n", p.labels.join(";"), p.log_odds));
        }
        write_text(Some(grid_out), &grid)?;
    }
    if !args.stratify_by.is_empty() {
        let by = args
            .stratify_by
            .iter()
            .map(|s| parse_stratify(s))
            .collect::<Result<Vec<_>, _>>()?;
        let strata = stratify_flags(&flags, &evaluated, &by)?;
        let mut out = String::from("group,n,n_at_risk,rate,ci_lower,ci_upper\n");
        for g in &strata.groups {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                g.labels.join(";"),
                g.n,
                g.n_at_risk,
                g.rate,
                g.ci.lower,
                g.ci.upper
            ));
        }
        write_text(args.strata_out.as_deref(), &out)?;
    }
    Ok(())
}
