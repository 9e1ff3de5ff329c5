use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gzsl_core::zsl::Hyperparams;
use gzsl_core::{Method, SplitOptions, SynthSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Paths of a file-based dataset. Without `split`, splits are generated
/// per seed from the split section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub features: PathBuf,
    pub embeddings: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Defaults to `class_count - seen_count` for synthetic data.
    pub unseen_count: Option<usize>,
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    pub val_class_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let opts = SplitOptions::default();
        SplitConfig {
            unseen_count: None,
            seeds: vec![1, 2, 3],
            test_fraction: opts.test_fraction,
            val_class_fraction: opts.val_class_fraction,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Replaces the exact γ sweep with these calibration values.
    pub gamma_grid: Option<Vec<f64>>,
    /// Adds per-class mean accuracies to each report.
    pub per_class_mean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetPaths>,
    pub synthetic: Option<SynthSpec>,
    pub method: String,
    pub hyperparams: Hyperparams,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    /// Hyperparameter name → candidate values, searched on the validation fold.
    pub search: BTreeMap<String, Vec<serde_json::Value>>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            synthetic: None,
            method: Method::Conse.to_string(),
            hyperparams: Hyperparams::default(),
            split: SplitConfig::default(),
            eval: EvalConfig::default(),
            search: BTreeMap::new(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub method: Option<String>,
}

impl ExperimentConfig {
    /// Reads a config file. Relative dataset paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(paths) = &mut cfg.dataset {
            for p in [&mut paths.features, &mut paths.embeddings]
                .into_iter()
                .chain(paths.split.as_mut())
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Config from an optional file with flag overrides applied.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(out) = &overrides.out_dir {
            self.out_dir = out.clone();
        }
        if let Some(seed) = overrides.seed {
            self.split.seeds = vec![seed];
        }
        if let Some(m) = &overrides.method {
            self.method = m.clone();
        }
    }

    pub fn method(&self) -> Result<Method, CliError> {
        self.method.parse().map_err(|e: gzsl_core::Error| CliError::Config(e.to_string()))
    }

    /// Checks the structural invariants shared by every subcommand that
    /// needs data.
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either dataset or synthetic, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config("one of dataset or synthetic is required".into()))
            }
            (None, Some(spec)) => spec.validate().map_err(|e| CliError::Config(e.to_string()))?,
            (Some(paths), None) => {
                if paths.split.is_none() && self.split.unseen_count.is_none() {
                    return Err(CliError::Config(
                        "split.unseen_count is required when the dataset has no split file".into(),
                    ));
                }
            }
        }
        if self.split.seeds.is_empty() {
            return Err(CliError::Config("split.seeds must not be empty".into()));
        }
        self.method()?;
        self.hyperparams
            .train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(grid) = &self.eval.gamma_grid {
            if grid.iter().any(|g| g.is_nan()) {
                return Err(CliError::Config("eval.gamma_grid contains NaN".into()));
            }
        }
        let known = serde_json::to_value(&self.hyperparams).expect("serializable");
        for (key, values) in &self.search {
            if known.get(key).is_none() {
                return Err(CliError::Config(format!("search key {key:?} is not a hyperparameter")));
            }
            if values.is_empty() {
                return Err(CliError::Config(format!("search key {key:?} has no candidates")));
            }
        }
        Ok(())
    }

    /// Split generation options for a dataset with `class_count` classes.
    pub fn split_options(&self) -> SplitOptions {
        let unseen_count = self.split.unseen_count.unwrap_or_else(|| {
            self.synthetic
                .as_ref()
                .map_or(0, |s| s.class_count - s.seen_count)
        });
        SplitOptions {
            unseen_count,
            test_fraction: self.split.test_fraction,
            val_class_fraction: self.split.val_class_fraction,
        }
    }

    /// Every combination of the search grid applied to the base
    /// hyperparameters, keys varying in sorted order (last key fastest).
    pub fn candidates(&self) -> Result<Vec<Hyperparams>, CliError> {
        let mut combos = vec![serde_json::to_value(&self.hyperparams).expect("serializable")];
        for (key, values) in &self.search {
            combos = combos
                .into_iter()
                .flat_map(|base| {
                    values.iter().map(move |v| {
                        let mut c = base.clone();
                        c[key.as_str()] = v.clone();
                        c
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .map(|v| {
                serde_json::from_value(v)
                    .map_err(|e| CliError::Config(format!("bad search value: {e}")))
            })
            .collect()
    }
}
