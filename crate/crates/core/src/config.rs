//! Command configuration: a TOML file plus flag overrides, resolved into a
//! snapshot that fully determines a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::GenConfig;
use crate::error::{Error, Result};
use crate::info::RiskMode;
use crate::oracle::{derive_seed, StudyConfig};
use crate::pipeline::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Synthetic source, used when `csv` is unset and by the oracle commands.
    pub generator: GenConfig,
    pub csv: Option<PathBuf>,
    pub num_classes: Option<usize>,
    pub holdout_fraction: f64,
    pub holdout_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { generator: GenConfig::default(), csv: None, num_classes: None, holdout_fraction: 0.3, holdout_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub resamples: usize,
    /// Defaults to the generator's own class counts.
    pub train_size: Option<usize>,
    pub eval_size: usize,
    pub test_per_class: usize,
    pub risk_mode: RiskMode,
    pub seed: u64,
    /// Shared depth for `sweep`; defaults to the full trunk.
    pub sweep_depth: Option<usize>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            resamples: 20,
            train_size: None,
            eval_size: 2000,
            test_per_class: 50,
            risk_mode: RiskMode::Restricted,
            seed: 0,
            sweep_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSettings {
    pub trials: usize,
    pub seed: u64,
}

impl Default for LemmaSettings {
    fn default() -> Self {
        Self { trials: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandConfig {
    /// Master seed; when set every named seed below is derived from it.
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Worker threads for oracle jobs; unset uses all cores.
    pub jobs: Option<usize>,
    pub data: DataConfig,
    pub run: RunConfig,
    pub study: StudySettings,
    pub lemma: LemmaSettings,
}

impl Default for CommandConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: PathBuf::from("run"),
            jobs: None,
            data: DataConfig::default(),
            run: RunConfig::default(),
            study: StudySettings::default(),
            lemma: LemmaSettings::default(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub grid_c: Option<Vec<usize>>,
    pub grid_w: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub resamples: Option<usize>,
    pub train_size: Option<usize>,
    pub trials: Option<usize>,
    pub no_refine: bool,
}

impl CommandConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Derives every named seed from the master seed, if one is set.
    pub fn resolve_seeds(&mut self) {
        let Some(s) = self.seed else { return };
        self.data.generator.seed = derive_seed(s, 100, 0);
        self.data.holdout_seed = derive_seed(s, 101, 0);
        self.run.init_seed = derive_seed(s, 102, 0);
        self.run.stage1.seed = derive_seed(s, 103, 0);
        self.run.stage2.seed = derive_seed(s, 104, 0);
        self.run.refine.seed = derive_seed(s, 105, 0);
        self.study.seed = derive_seed(s, 106, 0);
        self.lemma.seed = s;
    }

    /// Applies flags, resolves seeds and validates.
    pub fn apply(mut self, o: &Overrides) -> Result<Self> {
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        self.resolve_seeds();
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
        if let Some(cs) = &o.grid_c {
            self.run.c_candidates = Some(cs.clone());
        }
        if let Some(ws) = &o.grid_w {
            self.run.w_candidates = ws.clone();
        }
        if let Some(t) = o.tau {
            self.run.tau = t;
        }
        if let Some(m) = o.resamples {
            self.study.resamples = m;
        }
        if let Some(n) = o.train_size {
            self.study.train_size = Some(n);
        }
        if let Some(t) = o.trials {
            self.lemma.trials = t;
        }
        if o.no_refine {
            self.run.refine.epochs = 0;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.data.generator.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.data.holdout_fraction) {
            return Err(Error::Config(format!("holdout fraction {} outside [0, 1)", self.data.holdout_fraction)));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if self.study.eval_size == 0 || self.study.test_per_class == 0 {
            return Err(Error::Config("eval_size and test_per_class must be positive".into()));
        }
        if let Some(c) = self.study.sweep_depth {
            if c > self.run.trunk_widths.len() {
                return Err(Error::Config(format!("sweep depth {c} exceeds trunk depth")));
            }
        }
        Ok(())
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        if self.data.csv.is_some() {
            return Err(Error::Config("oracle studies need a synthetic generator, not a CSV dataset".into()));
        }
        Ok(StudyConfig {
            generator: self.data.generator.clone(),
            train_size: self.study.train_size,
            eval_size: self.study.eval_size,
            test_per_class: self.study.test_per_class,
            risk_mode: self.study.risk_mode,
            seed: self.study.seed,
        })
    }
}

/// Parses `0,1,2` style lists.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("cannot parse list item {t:?}"))))
        .collect()
}
