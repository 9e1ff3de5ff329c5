use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gzsl_core::dataset::{
    generate_split, load_dataset, read_class_embeddings, read_features, synth_generate, LabelVector,
};
use gzsl_core::eval::{compute_report, curve_from_gammas, seen_unseen_curve, EvalReport, SuCurve};
use gzsl_core::features::{pool_videos, read_frame_features, write_pooled};
use gzsl_core::io::{read_json, write_json};
use gzsl_core::zsl::{Hyperparams, ModelFile};
use gzsl_core::{Dataset, Error, JointScorer, Method, SplitSpec, SynthSpec};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const FEATURES_FILE: &str = "features.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";

/// Writes the synthetic dataset as `features.csv`, `embeddings.csv` and
/// `split.json` under `out_dir`.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<Dataset, CliError> {
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let ds = synth_generate(spec)?;
    ds.save(
        &out_dir.join(FEATURES_FILE),
        &out_dir.join(EMBEDDINGS_FILE),
        &out_dir.join(SPLIT_FILE),
    )?;
    Ok(ds)
}

/// Mean-pools and L1-normalizes every video of a frame-feature file.
/// Returns the number of videos written.
pub fn cmd_pool(input: &Path, output: &Path) -> Result<usize, CliError> {
    let (dims, videos) = read_frame_features(input)?;
    let pooled = pool_videos(&videos)?;
    write_pooled(output, dims, &pooled)?;
    Ok(pooled.len())
}

/// Dataset as configured, with its file split or (when none is given) a
/// split drawn from the first seed.
fn base_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    cfg.validate()?;
    if let Some(spec) = &cfg.synthetic {
        return Ok(synth_generate(spec)?);
    }
    let paths = cfg.dataset.as_ref().expect("validated");
    if let Some(split) = &paths.split {
        return Ok(load_dataset(&paths.features, &paths.embeddings, split)?);
    }
    let classes = read_class_embeddings(&paths.embeddings)?;
    let (features, labels) = read_features(&paths.features)?;
    let split = generate_split(classes.class_count(), &labels, &cfg.split_options(), cfg.split.seeds[0])?;
    let labels = LabelVector::new(labels, classes.class_count())?;
    Ok(Dataset::new(features, labels, classes, split)?)
}

fn has_split_file(cfg: &ExperimentConfig) -> bool {
    cfg.dataset.as_ref().is_some_and(|d| d.split.is_some())
}

/// Seeds to run. A dataset with a fixed split file runs one trial under
/// that split's seed.
fn trial_seeds(cfg: &ExperimentConfig, base: &Dataset) -> Vec<u64> {
    if has_split_file(cfg) {
        vec![base.split().seed]
    } else {
        cfg.split.seeds.clone()
    }
}

fn trial_dataset(cfg: &ExperimentConfig, base: &Dataset, seed: u64) -> Result<Dataset, Error> {
    if has_split_file(cfg) {
        return Ok(base.clone());
    }
    let split = generate_split(base.classes().class_count(), base.labels(), &cfg.split_options(), seed)?;
    base.with_split(split)
}

/// Writes `<out>/split.json` for `seed` (default: the first configured seed).
pub fn cmd_split(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<SplitSpec, CliError> {
    let base = base_dataset(cfg)?;
    let seed = seed.unwrap_or(cfg.split.seeds[0]);
    let split = generate_split(base.classes().class_count(), base.labels(), &cfg.split_options(), seed)?;
    split.save(&cfg.out_dir.join(SPLIT_FILE))?;
    Ok(split)
}

fn validation_score(method: Method, ds: &Dataset, params: &Hyperparams) -> Result<f64, Error> {
    let model = method.train(ds, params)?;
    let scorer = JointScorer::for_dataset(method, model, ds)?;
    Ok(compute_report(&scorer.test_scores(ds)?).a_u_to_u.unwrap_or(0.0))
}

/// Hyperparameters to use on `ds`: the configured ones, or the search
/// candidate with the best validation-fold `a_u_to_u` (first on ties).
/// Candidates whose training fails numerically are skipped.
fn select_hyperparams(cfg: &ExperimentConfig, method: Method, ds: &Dataset) -> Result<Hyperparams, Error> {
    if cfg.search.is_empty() {
        return Ok(cfg.hyperparams.clone());
    }
    let fold = ds.with_split(ds.split().validation_fold(ds.labels())?)?;
    let candidates = cfg.candidates().map_err(|e| Error::Validation(e.to_string()))?;
    let mut best: Option<(f64, Hyperparams)> = None;
    let mut last_err = None;
    for params in candidates {
        match validation_score(method, &fold, &params) {
            Ok(score) => {
                if best.as_ref().is_none_or(|(b, _)| score > *b) {
                    best = Some((score, params));
                }
            }
            Err(e @ (Error::Training(_) | Error::Solver(_))) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((_, params)) => Ok(params),
        None => Err(last_err.unwrap_or_else(|| Error::Training("no search candidate trained".into()))),
    }
}

fn trained_model(cfg: &ExperimentConfig, method: Method, ds: &Dataset) -> Result<ModelFile, Error> {
    let hyperparams = select_hyperparams(cfg, method, ds)?;
    let model = method.train(ds, &hyperparams)?;
    Ok(ModelFile {
        method,
        hyperparams,
        model,
    })
}

/// Trains the configured method and writes `<out>/model.json`.
pub fn cmd_train(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<ModelFile, CliError> {
    let method = cfg.method()?;
    let base = base_dataset(cfg)?;
    let seed = seed.unwrap_or_else(|| trial_seeds(cfg, &base)[0]);
    let ctx = |source| CliError::Trial {
        method: method.to_string(),
        seed,
        source,
    };
    let ds = trial_dataset(cfg, &base, seed).map_err(ctx)?;
    let file = trained_model(cfg, method, &ds).map_err(ctx)?;
    file.save(&cfg.out_dir.join(MODEL_FILE)).map_err(ctx)?;
    Ok(file)
}

fn evaluate(cfg: &ExperimentConfig, file: ModelFile, ds: &Dataset) -> Result<(EvalReport, SuCurve), Error> {
    let scorer = JointScorer::for_dataset(file.method, file.model, ds)?;
    let scores = scorer.test_scores(ds)?;
    let accuracy = compute_report(&scores);
    let curve = match &cfg.eval.gamma_grid {
        Some(grid) => curve_from_gammas(&scores, grid)?,
        None => seen_unseen_curve(&scores)?,
    };
    let mut report = EvalReport::new(file.method.as_str(), ds.split().seed, &accuracy, Some(&curve));
    if cfg.eval.per_class_mean {
        report.per_class = Some(accuracy.per_class);
    }
    report.hyperparams = serde_json::to_value(&file.hyperparams)?;
    Ok((report, curve))
}

fn write_trial(dir: &Path, report: &EvalReport, curve: &SuCurve) -> Result<(), Error> {
    write_json(&dir.join(REPORT_FILE), report)?;
    curve.write_csv(&dir.join(CURVE_FILE))
}

/// Evaluates a saved model on the test split of `seed`, writing
/// `<out>/report.json` and `<out>/curve.csv`.
pub fn cmd_eval(cfg: &ExperimentConfig, model_path: &Path, seed: Option<u64>) -> Result<EvalReport, CliError> {
    let file = ModelFile::load(model_path)?;
    let base = base_dataset(cfg)?;
    let seed = seed.unwrap_or_else(|| trial_seeds(cfg, &base)[0]);
    let ctx = |source| CliError::Trial {
        method: file.method.to_string(),
        seed,
        source,
    };
    let ds = trial_dataset(cfg, &base, seed).map_err(ctx)?;
    let (report, curve) = evaluate(cfg, file.clone(), &ds).map_err(ctx)?;
    write_trial(&cfg.out_dir, &report, &curve).map_err(ctx)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Trials in which the metric was defined.
    pub count: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; 0 for a single trial.
    pub std: Option<f64>,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MetricSummary { count: 0, mean: None, std: None };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MetricSummary {
            count: n,
            mean: Some(mean),
            std: Some(std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, MetricSummary>,
}

impl Aggregate {
    pub fn from_reports(method: &str, reports: &[EvalReport]) -> Self {
        let mut metrics = BTreeMap::new();
        if let Some(first) = reports.first() {
            for (i, (name, _)) in first.metrics().iter().enumerate() {
                let values: Vec<f64> = reports.iter().filter_map(|r| r.metrics()[i].1).collect();
                metrics.insert(name.to_string(), MetricSummary::of(&values));
            }
        }
        Aggregate {
            method: method.to_string(),
            seeds: reports.iter().map(|r| r.split_seed).collect(),
            metrics,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<EvalReport>,
    pub aggregate: Aggregate,
}

pub fn trial_dir(out_dir: &Path, method: Method, seed: u64) -> PathBuf {
    out_dir.join(method.as_str()).join(format!("seed-{seed}"))
}

/// Train and evaluate once per seed, then aggregate across seeds.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let method = cfg.method()?;
    let base = base_dataset(cfg)?;
    let mut reports = Vec::new();
    for seed in trial_seeds(cfg, &base) {
        let trial = || -> Result<EvalReport, Error> {
            let ds = trial_dataset(cfg, &base, seed)?;
            let file = trained_model(cfg, method, &ds)?;
            let (report, curve) = evaluate(cfg, file, &ds)?;
            write_trial(&trial_dir(&cfg.out_dir, method, seed), &report, &curve)?;
            Ok(report)
        };
        reports.push(trial().map_err(|source| CliError::Trial {
            method: method.to_string(),
            seed,
            source,
        })?);
    }
    let aggregate = Aggregate::from_reports(method.as_str(), &reports);
    write_json(&cfg.out_dir.join(AGGREGATE_FILE), &aggregate)?;
    Ok(RunSummary { reports, aggregate })
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Text table (accuracies in percent) of every trial report under
/// `out_dir`, followed by the aggregate when present.
pub fn cmd_report(out_dir: &Path) -> Result<String, CliError> {
    let names: Vec<&str> = ["a_u_to_u", "a_s_to_s", "a_u_to_total", "a_s_to_total", "mean", "harmonic", "ausuc"].to_vec();
    let mut out = format!("{:<12} {:>6} {}\n", "method", "seed", names.iter().map(|n| format!(" {n:>13}")).collect::<String>());
    let mut found = 0;
    for method_dir in sorted_dirs(out_dir)? {
        for trial in sorted_dirs(&method_dir)? {
            let path = trial.join(REPORT_FILE);
            if !path.is_file() {
                continue;
            }
            let r: EvalReport = read_json(&path)?;
            let cells: String = r.metrics().iter().map(|(_, v)| format!(" {:>13}", percent(*v))).collect();
            writeln!(out, "{:<12} {:>6} {cells}", r.method, r.split_seed).expect("string write");
            found += 1;
        }
    }
    let agg_path = out_dir.join(AGGREGATE_FILE);
    if agg_path.is_file() {
        let agg: Aggregate = read_json(&agg_path)?;
        let cells: String = names
            .iter()
            .map(|n| {
                let m = agg.metrics.get(*n);
                let mean = percent(m.and_then(|m| m.mean));
                let std = m.and_then(|m| m.std).map_or(String::new(), |s| format!("±{:.2}", 100.0 * s));
                format!(" {:>13}", format!("{mean}{std}"))
            })
            .collect();
        writeln!(out, "{:<12} {:>6} {cells}", agg.method, "mean").expect("string write");
        found += 1;
    }
    if found == 0 {
        return Err(CliError::Core(Error::Argument(format!(
            "no reports found under {}",
            out_dir.display()
        ))));
    }
    Ok(out)
}
