//! Experiment configuration and its validation.

use std::path::PathBuf;

use anyhow::Result;
use regswap::ansatz::{SweepCase, SweepConfig, VqeConfig};
use regswap::dnc::DncConfig;
use regswap::instances::{WeightKind, WeightRange};
use regswap::mitigation::StudyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_ROOT_SEED: u64 = 7;
pub const PAPER_SCALE_INSTANCES: usize = 10;
pub const PAPER_SCALE_INITS: usize = 100;
pub const PAPER_SCALE_MAX_DEPTH: usize = 30;

/// Rejected configuration; the binary maps it to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub root_seed: u64,
    pub weight_range: WeightRange,
    pub weight_kind: WeightKind,
    /// Instances per city count.
    pub instances: usize,
    /// Random initializations per instance and depth.
    pub inits: usize,
    pub cases: Vec<SweepCase>,
    pub vqe: VqeConfig,
    pub run_vqe: RunVqeSection,
    pub dnc: DncSection,
    pub mitigation: MitigationSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunVqeSection {
    pub n: usize,
    pub layers: usize,
    pub instance_index: usize,
}

impl Default for RunVqeSection {
    fn default() -> Self {
        Self {
            n: 5,
            layers: 10,
            instance_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DncSection {
    /// Fixture JSON; when absent, instance 0 for `n` under the root seed.
    pub instance: Option<PathBuf>,
    pub n: usize,
    /// Index of the optimizer seed drawn from the root seed.
    pub seed_index: u64,
    /// Multiplier on the default penalty weight.
    pub penalty_scale: f64,
    pub optimizer: DncConfig,
}

impl Default for DncSection {
    fn default() -> Self {
        Self {
            instance: None,
            n: 5,
            seed_index: 0,
            penalty_scale: 1.0,
            optimizer: DncConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MitigationSection {
    pub trials: usize,
    pub study: StudyConfig,
}

impl Default for MitigationSection {
    fn default() -> Self {
        Self {
            trials: 200,
            study: StudyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSection {
    /// Run directories to merge; empty means the output directory itself.
    pub inputs: Vec<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            root_seed: DEFAULT_ROOT_SEED,
            weight_range: WeightRange::default(),
            weight_kind: WeightKind::Continuous,
            instances: 3,
            inits: 20,
            cases: vec![
                SweepCase {
                    n: 4,
                    depths: vec![3, 5, 10],
                },
                SweepCase {
                    n: 5,
                    depths: vec![4, 9, 10, 12],
                },
                SweepCase {
                    n: 6,
                    depths: vec![5, 12, 30],
                },
            ],
            vqe: VqeConfig::default(),
            run_vqe: RunVqeSection::default(),
            dnc: DncSection::default(),
            mitigation: MitigationSection::default(),
            report: ReportSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()).into())
    }

    /// Ten instances, a hundred initializations, depths `n-1..=30`.
    pub fn paper_scale(mut self) -> Self {
        self.instances = PAPER_SCALE_INSTANCES;
        self.inits = PAPER_SCALE_INITS;
        for case in &mut self.cases {
            case.depths = (case.n - 1..=PAPER_SCALE_MAX_DEPTH).collect();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ConfigError(msg).into());
        if self.instances == 0 || self.inits == 0 {
            return bad("instances and inits must be positive".into());
        }
        if self.cases.is_empty() {
            return bad("no sweep cases".into());
        }
        for case in &self.cases {
            if case.n < 3 {
                return bad(format!("n = {} is below 3", case.n));
            }
            if case.depths.is_empty() {
                return bad(format!("empty depth list for n = {}", case.n));
            }
            if case.depths.contains(&0) {
                return bad(format!("zero depth for n = {}", case.n));
            }
        }
        if !(self.weight_range.lo >= 0.0 && self.weight_range.lo <= self.weight_range.hi) {
            return bad("weight range must satisfy 0 <= lo <= hi".into());
        }
        if self.run_vqe.layers == 0 || self.run_vqe.n < 3 {
            return bad("run_vqe needs n >= 3 and layers >= 1".into());
        }
        if self.dnc.n < 3 || self.dnc.penalty_scale <= 0.0 || self.dnc.optimizer.shots == 0 {
            return bad("dnc needs n >= 3, positive penalty scale and shots".into());
        }
        if self.mitigation.trials == 0 || self.mitigation.study.shots == 0 {
            return bad("mitigation study needs trials and shots".into());
        }
        Ok(())
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            cases: self.cases.clone(),
            instances: self.instances,
            inits: self.inits,
            root_seed: self.root_seed,
            weight_range: self.weight_range,
            weight_kind: self.weight_kind,
            vqe: self.vqe,
        }
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
