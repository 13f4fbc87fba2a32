//! Layered run configuration: profile defaults, then a JSON file, then
//! `--set key=value` overrides, then command flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use chanpred::dataset::{SplitConfig, ThresholdRule};
use chanpred::models::TrainConfig;
use chanpred::profile::Profile;
use chanpred::sim::ScenarioConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub profile: String,
    pub scenario: ScenarioConfig,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdSection {
    Percentile(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub t_len: usize,
    pub span_d: usize,
    pub n_train_per_run: usize,
    pub n_test_per_run: usize,
    pub threshold: ThresholdSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Seeds of the training runs; the fresh channel must avoid them.
    pub run_seeds: Vec<u64>,
    pub fresh_seed: u64,
    pub fresh_examples: usize,
}

impl PipelineConfig {
    pub fn from_profile(p: &Profile) -> Self {
        PipelineConfig {
            profile: p.name.to_string(),
            scenario: p.scenario.clone(),
            dataset: DatasetSection {
                t_len: p.split.t_len,
                span_d: p.split.span_d,
                n_train_per_run: p.split.n_train_per_run,
                n_test_per_run: p.split.n_test_per_run,
                threshold: match p.split.threshold {
                    ThresholdRule::Percentile(q) => ThresholdSection::Percentile(q),
                    ThresholdRule::Absolute(v) => ThresholdSection::Absolute(v),
                },
            },
            train: TrainSection {
                batch_size: p.train.batch_size,
                epochs: p.train.epochs,
                lr: p.train.lr,
                seed: p.train.seed,
                shuffle: p.train.shuffle,
            },
            eval: EvalSection {
                run_seeds: p.run_seeds.clone(),
                fresh_seed: p.fresh_seed,
                fresh_examples: p.fresh_examples,
            },
        }
    }

    /// Resolves the layers. The file and overrides may change any key but
    /// not introduce new ones.
    pub fn load(profile: &str, file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let base = PipelineConfig::from_profile(&Profile::by_name(profile)?);
        let mut value = serde_json::to_value(&base).expect("config serializes");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let patch: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: invalid JSON: {e}", path.display())))?;
            if !patch.is_object() {
                return Err(CliError::usage(format!("{}: top level must be an object", path.display())));
            }
            merge(&mut value, patch);
        }
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let cfg: PipelineConfig =
            serde_json::from_value(value).map_err(|e| CliError::usage(format!("invalid configuration: {e}")))?;
        cfg.scenario.validate()?;
        Ok(cfg)
    }

    pub fn split(&self) -> SplitConfig {
        SplitConfig {
            t_len: self.dataset.t_len,
            span_d: self.dataset.span_d,
            n_train_per_run: self.dataset.n_train_per_run,
            n_test_per_run: self.dataset.n_test_per_run,
            threshold: match self.dataset.threshold {
                ThresholdSection::Percentile(q) => ThresholdRule::Percentile(q),
                ThresholdSection::Absolute(v) => ThresholdRule::Absolute(v),
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            lr: self.train.lr,
            seed: self.train.seed,
            shuffle: self.train.shuffle,
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// `a.b.c=value`; the value is parsed as JSON, falling back to a string.
fn apply_override(root: &mut Value, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--set expects key=value, got {item:?}")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| CliError::usage(format!("unknown configuration key {key:?}")))?;
    }
    *slot = parsed;
    Ok(())
}
