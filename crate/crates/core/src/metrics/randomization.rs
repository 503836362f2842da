//! Randomization metrics: explanations should change when the model's
//! weights or the explained class are randomized.

use rand::Rng as _;

use super::{Curve, MetricOutcome};
use crate::error::{Error, Result};
use crate::explainers::Explainer;
use crate::models::{Predictor, Randomizable};
use crate::seed;
use crate::stats::{pearson, spearman};
use crate::tensor::{ImageTensor, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    /// Rank correlation of the flattened maps.
    Spearman,
    Pearson,
}

impl Similarity {
    pub fn name(&self) -> &'static str {
        match self {
            Similarity::Spearman => "spearman",
            Similarity::Pearson => "pearson",
        }
    }

    /// `None` when either map is constant.
    pub fn compare(&self, a: &SaliencyMap, b: &SaliencyMap) -> Result<Option<f64>> {
        match self {
            Similarity::Spearman => spearman(a.data(), b.data()),
            Similarity::Pearson => pearson(a.data(), b.data()),
        }
    }
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spearman" => Ok(Similarity::Spearman),
            "pearson" => Ok(Similarity::Pearson),
            other => Err(Error::Config(format!("unknown similarity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationConfig {
    pub similarity: Similarity,
    /// Seeds explainer calls.
    pub seed: u64,
    /// Seeds layer re-initialization. Share it across methods so every
    /// explainer sees the same randomized models.
    pub model_seed: u64,
    /// Seeds the choice of the off-target class.
    pub logit_seed: u64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            similarity: Similarity::Spearman,
            seed: 0,
            model_seed: 2,
            logit_seed: 1,
        }
    }
}

impl RandomizationConfig {
    /// Explainer seed for the original model (`None`) or after randomizing
    /// `k` layers.
    pub fn explain_seed(&self, layers: Option<usize>) -> u64 {
        match layers {
            None => self.seed,
            Some(k) => seed::derive(self.seed, k as u64),
        }
    }
}

/// Similarity between the original explanation and explanations after
/// cumulatively randomizing the top 1, 2, …, L layers; x = k / L. The curve
/// starts at (0, 1), the unrandomized model agreeing with itself, so its
/// AUC is defined for any L.
pub fn model_parameter_randomization_curve(
    model: &dyn Randomizable,
    explainer: &dyn Explainer,
    image: &ImageTensor,
    class: usize,
    cfg: &RandomizationConfig,
) -> Result<MetricOutcome> {
    let layers = model.num_layers();
    if layers == 0 {
        return Err(Error::Parameter("model exposes no randomizable layers".into()));
    }
    let original = explainer
        .explain(model, image, class, cfg.explain_seed(None))
        .map_err(|e| Error::explainer("original model", e))?;
    let mut x = Vec::with_capacity(layers + 1);
    let mut y = Vec::with_capacity(layers + 1);
    x.push(0.0);
    y.push(1.0);
    for k in 1..=layers {
        let randomized = model.randomize_top_layers(k, cfg.model_seed)?;
        let e = explainer
            .explain(randomized.as_ref(), image, class, cfg.explain_seed(Some(k)))
            .map_err(|e| Error::explainer(format!("top {k} layers randomized"), e))?;
        match cfg.similarity.compare(&original, &e)? {
            Some(s) => y.push(s),
            None => {
                return Ok(MetricOutcome::Undefined(format!(
                    "similarity undefined after randomizing {k} layers (constant map)"
                )))
            }
        }
        x.push(k as f64 / layers as f64);
    }
    Ok(MetricOutcome::Curve(Curve { x, y }))
}

/// Uniformly random class other than `class`.
pub fn off_target_class(classes: usize, class: usize, seed: u64) -> Result<usize> {
    if classes < 2 {
        return Err(Error::Config(format!(
            "random logit needs at least 2 classes, model has {classes}"
        )));
    }
    if class >= classes {
        return Err(Error::Parameter(format!("class {class} out of range for {classes} classes")));
    }
    let pick = seed::rng(seed).gen_range(0..classes - 1);
    Ok(if pick >= class { pick + 1 } else { pick })
}

/// `1 − similarity` between the explanation of `class` and that of a random
/// other class, clipped to `[0, 2]`. Both calls share the explainer seed.
pub fn random_logit_distance(
    model: &dyn Predictor,
    explainer: &dyn Explainer,
    image: &ImageTensor,
    class: usize,
    cfg: &RandomizationConfig,
) -> Result<MetricOutcome> {
    let other = off_target_class(model.num_classes(), class, cfg.logit_seed)?;
    let seed = cfg.explain_seed(None);
    let a = explainer
        .explain(model, image, class, seed)
        .map_err(|e| Error::explainer(format!("class {class}"), e))?;
    let b = explainer
        .explain(model, image, other, seed)
        .map_err(|e| Error::explainer(format!("class {other}"), e))?;
    Ok(match cfg.similarity.compare(&a, &b)? {
        Some(s) => MetricOutcome::Scalar((1.0 - s).clamp(0.0, 2.0)),
        None => MetricOutcome::Undefined("similarity undefined (constant map)".into()),
    })
}
