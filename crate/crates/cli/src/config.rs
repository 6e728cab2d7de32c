//! Experiment configuration, read from TOML. Every section rejects unknown
//! keys so that a typo fails loudly instead of silently using a default.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabsynth::balance::{KeepPolicy, TargetPreset, Targets};
use tabsynth::classifiers::ClassifierSpec;
use tabsynth::ctgan::GanConfig;
use tabsynth::gmm::GmmConfig;

use crate::error::{RunError, RunResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Stratified training subsample and a short GAN schedule.
    #[default]
    Desk,
    /// Everything as configured.
    Full,
}

/// The three training-data variants compared by an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Unbalanced training data.
    Org,
    /// Random oversampling.
    RndOSamp,
    /// CTGAN balancing.
    CtganSamp,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Org, Arm::RndOSamp, Arm::CtganSamp];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Org => "ORG",
            Arm::RndOSamp => "RndOSamp",
            Arm::CtganSamp => "CTGANSamp",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSet {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Training split in the raw comma-separated record format.
    pub train: PathBuf,
    #[serde(default, rename = "test")]
    pub tests: Vec<TestSet>,
    /// Replacement attack-name table; the shipped one otherwise.
    #[serde(default)]
    pub attack_map: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Scale continuous columns by their training-split L2 norm.
    pub normalize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { normalize: true }
    }
}

/// What the desk profile changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskConfig {
    /// Training fraction kept, per class.
    pub fraction: f64,
    pub ctgan_epochs: usize,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            fraction: 0.1,
            ctgan_epochs: 30,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    pub preset: TargetPreset,
    /// Explicit per-class targets (Normal, DoS, Probe, U2R, R2L); overrides
    /// the preset.
    pub targets: Option<Targets>,
    pub keep: KeepPolicy,
}

impl BalanceConfig {
    pub fn targets_for(&self, counts: &Targets) -> Targets {
        self.targets.unwrap_or_else(|| self.preset.targets(counts))
    }
}

fn default_arms() -> Vec<Arm> {
    Arm::ALL.to_vec()
}

fn default_one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required: every random stream derives from it.
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default = "default_one")]
    pub workers: usize,
    /// Classifier fits per cell; metrics are the per-metric median.
    #[serde(default = "default_one")]
    pub repeats: usize,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    pub data: DataConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub balance: BalanceConfig,
    #[serde(default)]
    pub gmm: GmmConfig,
    #[serde(default)]
    pub ctgan: GanConfig,
    #[serde(default)]
    pub desk: DeskConfig,
    #[serde(default = "ClassifierSpec::defaults", rename = "classifier")]
    pub classifiers: Vec<ClassifierSpec>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub profile: Option<Profile>,
    pub workers: Option<usize>,
    pub repeats: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> RunResult<Self> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    /// Reads `path`, resolves relative paths against its directory, applies
    /// overrides and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> RunResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        for t in &mut self.data.tests {
            fix(&mut t.path);
        }
        if let Some(p) = &mut self.data.attack_map {
            fix(p);
        }
        fix(&mut self.out);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(p) = o.profile {
            self.profile = p;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(r) = o.repeats {
            self.repeats = r;
        }
    }

    pub fn validate(&self) -> RunResult<()> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.workers == 0 || self.repeats == 0 {
            return bad("workers and repeats must be at least 1".into());
        }
        if self.arms.is_empty() || self.classifiers.is_empty() {
            return bad("at least one arm and one classifier are required".into());
        }
        let mut arms = self.arms.clone();
        arms.sort();
        arms.dedup();
        if arms.len() != self.arms.len() {
            return bad("arms are listed more than once".into());
        }
        let mut names: Vec<&str> = self.data.tests.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.data.tests.len() {
            return bad("test set names must be unique".into());
        }
        if !(self.desk.fraction > 0.0 && self.desk.fraction <= 1.0) {
            return bad("desk.fraction must lie in (0, 1]".into());
        }
        let mut paths = vec![&self.data.train];
        paths.extend(self.data.tests.iter().map(|t| &t.path));
        paths.extend(self.data.attack_map.as_ref());
        for p in paths {
            if !p.is_file() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// GAN settings with the profile applied.
    pub fn effective_gan(&self) -> GanConfig {
        let mut g = self.ctgan.clone();
        if self.profile == Profile::Desk {
            g.epochs = self.desk.ctgan_epochs;
        }
        g
    }

    /// Display names for the classifiers, numbered when a kind repeats.
    pub fn classifier_names(&self) -> Vec<String> {
        self.classifiers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let dup = self.classifiers.iter().filter(|o| o.name() == c.name()).count() > 1;
                if dup {
                    format!("{}#{}", c.name(), i + 1)
                } else {
                    c.name().to_string()
                }
            })
            .collect()
    }
}
