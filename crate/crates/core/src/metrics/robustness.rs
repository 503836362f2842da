//! Explanation stability under small input perturbations, estimated from
//! seeded Monte Carlo neighbourhoods. Distances are Euclidean norms of the
//! raw flattened maps.

use super::MetricOutcome;
use crate::error::{Error, Result};
use crate::explainers::Explainer;
use crate::models::Predictor;
use crate::perturbation::{NeighborhoodSampler, UniformNoise};
use crate::seed;
use crate::tensor::{ImageTensor, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessConfig {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            radius: 0.02,
            samples: 10,
            seed: 0,
        }
    }
}

impl RobustnessConfig {
    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || self.samples == 0 {
            return Err(Error::Parameter(format!(
                "robustness needs radius > 0 and samples >= 1, got {} and {}",
                self.radius, self.samples
            )));
        }
        Ok(())
    }

    fn noise_seed(&self, sample: usize, attempt: usize) -> u64 {
        seed::derive(seed::derive(seed::derive(self.seed, 0x4E4F_4953), sample as u64), attempt as u64)
    }

    /// Explainer seed for the reference map (`None`) or a neighbour.
    pub fn explain_seed(&self, sample: Option<usize>) -> u64 {
        match sample {
            None => self.seed,
            Some(i) => seed::derive(self.seed, 1 + i as u64),
        }
    }
}

/// One neighbour's contribution: `‖e(x') − e(x)‖₂` and `‖x' − x‖₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDistance {
    pub explanation: f64,
    pub input: f64,
}

fn explain_at(
    explainer: &dyn Explainer,
    model: &dyn Predictor,
    image: &ImageTensor,
    class: usize,
    seed: u64,
    context: impl FnOnce() -> String,
) -> Result<SaliencyMap> {
    explainer
        .explain(model, image, class, seed)
        .map_err(|e| Error::explainer(context(), e))
}

/// Explains `cfg.samples` neighbours drawn by `sampler`. With
/// `reject_identical`, neighbours equal to the input are redrawn, failing
/// after `cfg.samples` consecutive identical draws.
pub fn sample_distances(
    model: &dyn Predictor,
    explainer: &dyn Explainer,
    image: &ImageTensor,
    class: usize,
    cfg: &RobustnessConfig,
    sampler: &dyn NeighborhoodSampler,
    reject_identical: bool,
) -> Result<Vec<SampleDistance>> {
    cfg.validate()?;
    let reference = explain_at(explainer, model, image, class, cfg.explain_seed(None), || {
        "unperturbed input".into()
    })?;
    let mut out = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let mut attempt = 0;
        let neighbour = loop {
            let x = sampler.sample(image, cfg.noise_seed(i, attempt))?;
            if !reject_identical || x.l2_distance(image) > 0.0 {
                break x;
            }
            attempt += 1;
            if attempt >= cfg.samples {
                return Err(Error::Degenerate(format!(
                    "sample {i}: {attempt} consecutive draws identical to the input"
                )));
            }
        };
        let e = explain_at(explainer, model, &neighbour, class, cfg.explain_seed(Some(i)), || {
            format!("neighbour sample {i}")
        })?;
        if e.height() != reference.height() || e.width() != reference.width() {
            return Err(Error::Dimension(format!("explanation of sample {i} changed size")));
        }
        out.push(SampleDistance {
            explanation: e.l2_distance(&reference),
            input: neighbour.l2_distance(image),
        });
    }
    Ok(out)
}

fn uniform(cfg: &RobustnessConfig) -> UniformNoise {
    UniformNoise { radius: cfg.radius }
}

pub fn max_of(d: &[SampleDistance]) -> f64 {
    d.iter().map(|s| s.explanation).fold(0.0, f64::max)
}

/// Clamped to `max_of` so summation rounding cannot put the mean above it.
pub fn mean_of(d: &[SampleDistance]) -> f64 {
    let mean = d.iter().map(|s| s.explanation).sum::<f64>() / d.len() as f64;
    mean.min(max_of(d))
}

pub fn lipschitz_of(d: &[SampleDistance]) -> f64 {
    d.iter().map(|s| s.explanation / s.input).fold(0.0, f64::max)
}

/// Largest explanation change over the sampled neighbourhood.
pub fn max_sensitivity(
    model: &dyn Predictor,
    explainer: &dyn Explainer,
    image: &ImageTensor,
    class: usize,
    cfg: &RobustnessConfig,
) -> Result<MetricOutcome> {
    let d = sample_distances(model, explainer, image, class, cfg, &uniform(cfg), false)?;
    Ok(MetricOutcome::Scalar(max_of(&d)))
}

/// Mean explanation change over the sampled neighbourhood.
pub fn avg_sensitivity(
    model: &dyn Predictor,
    explainer: &dyn Explainer,
    image: &ImageTensor,
    class: usize,
    cfg: &RobustnessConfig,
) -> Result<MetricOutcome> {
    let d = sample_distances(model, explainer, image, class, cfg, &uniform(cfg), false)?;
    Ok(MetricOutcome::Scalar(mean_of(&d)))
}

/// Largest ratio of explanation change to input change.
pub fn local_lipschitz_estimate(
    model: &dyn Predictor,
    explainer: &dyn Explainer,
    image: &ImageTensor,
    class: usize,
    cfg: &RobustnessConfig,
) -> Result<MetricOutcome> {
    local_lipschitz_with(model, explainer, image, class, cfg, &uniform(cfg))
}

pub fn local_lipschitz_with(
    model: &dyn Predictor,
    explainer: &dyn Explainer,
    image: &ImageTensor,
    class: usize,
    cfg: &RobustnessConfig,
    sampler: &dyn NeighborhoodSampler,
) -> Result<MetricOutcome> {
    let d = sample_distances(model, explainer, image, class, cfg, sampler, true)?;
    Ok(MetricOutcome::Scalar(lipschitz_of(&d)))
}
