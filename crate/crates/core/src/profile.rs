//! Bundled run profiles: the full reference scale and a desk scale that
//! runs the whole pipeline in seconds.

use crate::dataset::{SplitConfig, ThresholdRule};
use crate::error::{Error, Result};
use crate::models::TrainConfig;
use crate::sim::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub name: &'static str,
    /// Scenario shared by every run; each run overrides only the seed.
    pub scenario: ScenarioConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    /// One simulation run per seed feeds the train/test split.
    pub run_seeds: Vec<u64>,
    /// Seed of the unseen channel used by the fresh-channel check.
    pub fresh_seed: u64,
    pub fresh_examples: usize,
}

impl Profile {
    /// Reference scale: 128 bins, 64-snapshot windows, 10 steps ahead,
    /// 2 × (4096 train + 512 test) examples, 30 epochs.
    pub fn full() -> Self {
        Profile {
            name: "full",
            scenario: ScenarioConfig::default(),
            split: SplitConfig {
                t_len: 64,
                span_d: 10,
                n_train_per_run: 4096,
                n_test_per_run: 512,
                threshold: ThresholdRule::default(),
            },
            train: TrainConfig::default(),
            run_seeds: vec![1, 2],
            fresh_seed: 3,
            fresh_examples: 4096,
        }
    }

    /// Desk scale: a 2.5 µs window gives 32 bins; 16-snapshot windows,
    /// 4 steps ahead, 2 × (256 train + 64 test) examples, 5 epochs. Batches
    /// of 32 keep the update count per epoch meaningful on the small set.
    pub fn desk() -> Self {
        Profile {
            name: "desk",
            scenario: ScenarioConfig { window_p: 2.5e-6, ..ScenarioConfig::default() },
            split: SplitConfig {
                t_len: 16,
                span_d: 4,
                n_train_per_run: 256,
                n_test_per_run: 64,
                threshold: ThresholdRule::default(),
            },
            train: TrainConfig { epochs: 5, batch_size: 32, ..TrainConfig::default() },
            run_seeds: vec![1, 2],
            fresh_seed: 3,
            fresh_examples: 512,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Profile::full()),
            "desk" => Ok(Profile::desk()),
            other => Err(Error::config(format!("unknown profile {other:?}, expected full or desk"))),
        }
    }

    /// Snapshots each training run must simulate.
    pub fn snapshots_per_run(&self) -> usize {
        self.split.required_snapshots()
    }

    /// Snapshots of the fresh channel.
    pub fn fresh_snapshots(&self) -> usize {
        self.fresh_examples + self.split.t_len + self.split.span_d - 1
    }

    pub fn run_configs(&self) -> Vec<ScenarioConfig> {
        self.run_seeds
            .iter()
            .map(|&seed| ScenarioConfig { seed, ..self.scenario.clone() })
            .collect()
    }

    pub fn fresh_config(&self) -> ScenarioConfig {
        ScenarioConfig { seed: self.fresh_seed, ..self.scenario.clone() }
    }
}
