//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//! output = "out"
//! jobs = 4
//!
//! [dataset]
//! kind = "synthetic"      # or "directory" with `path = "..."`
//! count = 20
//! channels = 3
//! height = 32
//! width = 32
//!
//! [model]
//! kind = "planted"        # "mlp" or "bridge"
//!
//! [explainers]
//! builtin = ["random", "sobel", "gaussian", "rise", "ground_truth"]
//!
//! [metrics]
//! baselines = ["black", "white"]
//! ```
//!
//! Relative paths, `output` included, resolve against the config file's
//! directory. Every table other than `dataset`, `model` and `explainers` is optional.
//! See `configs/demo.toml` for the full key set.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainers::RiseConfig;
use crate::metrics::complexity::DEFAULT_EPSILON;
use crate::metrics::randomization::Similarity;
use crate::metrics::Metric;
use crate::models::Normalization;
use crate::perturbation::BaselineSpec;

/// Names accepted in `explainers.builtin`.
pub const BUILTIN_EXPLAINERS: [&str; 5] = ["random", "sobel", "gaussian", "rise", "ground_truth"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[serde(default)]
    pub jobs: Option<usize>,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub explainers: ExplainerRoster,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub stats: StatsConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn three() -> usize {
    3
}

fn thirty_two() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic {
        count: usize,
        /// Defaults to a stream of the global seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "three")]
        channels: usize,
        #[serde(default = "thirty_two")]
        height: usize,
        #[serde(default = "thirty_two")]
        width: usize,
    },
    /// PNG files, resized to `height × width`.
    Directory {
        path: PathBuf,
        #[serde(default = "three")]
        channels: usize,
        #[serde(default = "thirty_two")]
        height: usize,
        #[serde(default = "thirty_two")]
        width: usize,
        /// Keep only the first `limit` files in name order.
        #[serde(default)]
        limit: Option<usize>,
    },
}

impl DatasetConfig {
    pub fn dims(&self) -> (usize, usize, usize) {
        match *self {
            DatasetConfig::Synthetic { channels, height, width, .. }
            | DatasetConfig::Directory { channels, height, width, .. } => (channels, height, width),
        }
    }
}

fn planted_weights() -> [f64; 2] {
    [0.02, 0.08]
}

fn mlp_hidden() -> [usize; 2] {
    crate::models::Mlp::DEFAULT_HIDDEN
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Logistic model over a rectangular evidence block.
    Planted {
        #[serde(default)]
        seed: Option<u64>,
        /// `[top, left, rows, cols]`; defaults to an off-centre quarter-size
        /// block in the upper right.
        #[serde(default)]
        block: Option<[usize; 4]>,
        #[serde(default = "planted_weights")]
        weights: [f64; 2],
        /// Defaults to centring the logit of a mid-grey image at zero.
        #[serde(default)]
        bias: Option<f64>,
    },
    Mlp {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "mlp_hidden")]
        hidden: [usize; 2],
        #[serde(default = "ten")]
        classes: usize,
    },
    Bridge {
        address: String,
        /// `"imagenet"` or `"cifar10"`, applied before images are sent.
        #[serde(default)]
        normalization: Option<String>,
        #[serde(default)]
        timeout_secs: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecomputedSource {
    pub name: String,
    /// Directory of `<image_id>.smap` files.
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainerRoster {
    #[serde(default)]
    pub builtin: Vec<String>,
    /// Methods hosted by the bridge server.
    #[serde(default)]
    pub bridge: Vec<String>,
    #[serde(default)]
    pub precomputed: Vec<PrecomputedSource>,
    #[serde(default)]
    pub rise: RiseSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiseSettings {
    pub masks: usize,
    pub grid: usize,
    pub keep_prob: f64,
}

impl Default for RiseSettings {
    fn default() -> Self {
        let d = RiseConfig::default();
        Self {
            masks: d.masks,
            grid: d.grid,
            keep_prob: d.keep_prob,
        }
    }
}

impl From<RiseSettings> for RiseConfig {
    fn from(s: RiseSettings) -> Self {
        RiseConfig {
            masks: s.masks,
            grid: s.grid,
            keep_prob: s.keep_prob,
        }
    }
}

fn all_metrics() -> Vec<String> {
    Metric::ALL.iter().map(|m| m.name().to_owned()).collect()
}

fn black() -> Vec<String> {
    vec!["black".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "all_metrics")]
    pub roster: Vec<String>,
    /// Every faithfulness metric is run once per baseline.
    #[serde(default = "black")]
    pub baselines: Vec<String>,
    #[serde(default)]
    pub faithfulness: FaithfulnessParams,
    #[serde(default)]
    pub robustness: RobustnessParams,
    #[serde(default)]
    pub randomization: RandomizationParams,
    #[serde(default)]
    pub complexity: ComplexityParams,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            roster: all_metrics(),
            baselines: black(),
            faithfulness: Default::default(),
            robustness: Default::default(),
            randomization: Default::default(),
            complexity: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaithfulnessParams {
    pub subset_fraction: f64,
    pub runs: usize,
    /// Pixel-removal steps; defaults to the image height.
    pub steps: Option<usize>,
    pub patch_size: usize,
}

impl Default for FaithfulnessParams {
    fn default() -> Self {
        Self {
            subset_fraction: 0.05,
            runs: 100,
            steps: None,
            patch_size: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessParams {
    pub radius: f64,
    pub samples: usize,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        Self {
            radius: 0.02,
            samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationParams {
    pub similarity: String,
}

impl Default for RandomizationParams {
    fn default() -> Self {
        Self {
            similarity: "spearman".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComplexityParams {
    pub epsilon: f64,
}

impl Default for ComplexityParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub alpha: f64,
    /// Monte Carlo permutations per metric pair when there are more than
    /// seven methods.
    pub trials: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            alpha: crate::stats::DEFAULT_ALPHA,
            trials: 100_000,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub only: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative dataset and map directories are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetConfig::Directory { path, .. } = &mut self.dataset {
            fix(path);
        }
        for src in &mut self.explainers.precomputed {
            fix(&mut src.dir);
        }
        fix(&mut self.output);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.output {
            self.output = out.clone();
        }
        if let Some(j) = o.jobs {
            self.jobs = Some(j);
        }
        if let Some(only) = &o.only {
            self.metrics.roster = only.clone();
        }
    }

    pub fn metrics(&self) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for name in &self.metrics.roster {
            let m: Metric = name.parse()?;
            if out.contains(&m) {
                return Err(Error::Config(format!("metric {name:?} listed twice")));
            }
            out.push(m);
        }
        Ok(out)
    }

    /// Baselines in configured order, seeds left at zero.
    pub fn baselines(&self) -> Result<Vec<BaselineSpec>> {
        let mut out: Vec<BaselineSpec> = Vec::new();
        for name in &self.metrics.baselines {
            let b: BaselineSpec = name.parse()?;
            if out.contains(&b) {
                return Err(Error::Config(format!("baseline {name:?} listed twice")));
            }
            out.push(b);
        }
        Ok(out)
    }

    pub fn similarity(&self) -> Result<Similarity> {
        self.metrics.randomization.similarity.parse()
    }

    pub fn normalization(&self) -> Result<Option<Normalization>> {
        match &self.model {
            ModelConfig::Bridge { normalization: Some(name), .. } => Normalization::by_name(name)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("unknown normalization {name:?}"))),
            _ => Ok(None),
        }
    }

    /// Method names in roster order: builtin, bridge, precomputed.
    pub fn method_names(&self) -> Vec<String> {
        let r = &self.explainers;
        r.builtin
            .iter()
            .chain(&r.bridge)
            .cloned()
            .chain(r.precomputed.iter().map(|p| p.name.clone()))
            .collect()
    }

    /// Static checks that need no I/O.
    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.dataset.dims();
        if c == 0 || h < 3 || w < 3 {
            return Err(Error::Config(format!("image geometry {c}x{h}x{w} is too small")));
        }
        if let DatasetConfig::Synthetic { count: 0, .. } = self.dataset {
            return Err(Error::Config("synthetic dataset needs count >= 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let names = self.method_names();
        if names.is_empty() {
            return Err(Error::Config("explainer roster is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() || n.contains(['/', '\\', ',']) || n == "." || n == ".." {
                return Err(Error::Config(format!("method name {n:?} is not usable as a path or CSV field")));
            }
            if !seen.insert(n) {
                return Err(Error::Config(format!("method {n:?} listed twice")));
            }
        }
        for b in &self.explainers.builtin {
            if !BUILTIN_EXPLAINERS.contains(&b.as_str()) {
                return Err(Error::Config(format!(
                    "unknown builtin explainer {b:?}; available: {}",
                    BUILTIN_EXPLAINERS.join(", ")
                )));
            }
            if b == "ground_truth" && !matches!(self.model, ModelConfig::Planted { .. }) {
                return Err(Error::Config("ground_truth needs the planted model".into()));
            }
        }
        if !self.explainers.bridge.is_empty() && !matches!(self.model, ModelConfig::Bridge { .. }) {
            return Err(Error::Config("bridge explainers need a bridge model".into()));
        }
        if self.explainers.builtin.iter().any(|b| b == "rise") {
            RiseConfig::from(self.explainers.rise).validate(h, w)?;
        }
        let metrics = self.metrics()?;
        if metrics.is_empty() {
            return Err(Error::Config("metric roster is empty".into()));
        }
        let baselines = self.baselines()?;
        if baselines.is_empty() && metrics.iter().any(Metric::uses_baseline) {
            return Err(Error::Config("faithfulness metrics need at least one baseline".into()));
        }
        let f = &self.metrics.faithfulness;
        if !(f.subset_fraction > 0.0 && f.subset_fraction <= 1.0) || f.runs < 2 {
            return Err(Error::Config(
                "faithfulness needs 0 < subset_fraction <= 1 and runs >= 2".into(),
            ));
        }
        if f.steps == Some(0) || f.steps.is_some_and(|s| s > h * w) {
            return Err(Error::Config(format!("steps must be in 1..={}", h * w)));
        }
        if f.patch_size == 0 || h % f.patch_size != 0 || w % f.patch_size != 0 {
            return Err(Error::Config(format!(
                "patch_size {} must divide the {h}x{w} image",
                f.patch_size
            )));
        }
        let r = &self.metrics.robustness;
        if !(r.radius > 0.0) || r.samples == 0 {
            return Err(Error::Config("robustness needs radius > 0 and samples >= 1".into()));
        }
        self.similarity()?;
        self.normalization()?;
        let eps = self.metrics.complexity.epsilon;
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Config(format!("complexity epsilon {eps} outside [0, 1)")));
        }
        let s = &self.stats;
        if !(s.alpha > 0.0 && s.alpha < 1.0) || s.trials == 0 {
            return Err(Error::Config("stats needs 0 < alpha < 1 and trials >= 1".into()));
        }
        if let ModelConfig::Mlp { classes, hidden, .. } = &self.model {
            if *classes < 2 || hidden.contains(&0) {
                return Err(Error::Config("mlp needs >= 2 classes and non-empty hidden layers".into()));
            }
        }
        Ok(())
    }
}
