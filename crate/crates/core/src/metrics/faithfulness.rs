//! Faithfulness metrics: how well attribution magnitudes track the model's
//! response when the attributed features are replaced by a baseline.
//!
//! All six metrics explain the model's argmax class on the unperturbed
//! image. Features are ranked by absolute attribution; attribution sums that
//! enter correlations keep their sign.

use rand::seq::index;

use super::{Curve, MetricOutcome};
use crate::error::{Error, Result};
use crate::models::{argmax, Predictor};
use crate::perturbation::{BaselineSpec, PerturbationPlan, Remover};
use crate::seed;
use crate::stats::{pearson, spearman};
use crate::tensor::{descending_order, feature_sums, Granularity, ImageTensor, SaliencyMap};

/// Size of the random subsets used by faithfulness correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsetSize {
    /// Fraction of the pixel count, rounded, at least one.
    Fraction(f64),
    Count(usize),
}

impl SubsetSize {
    pub fn resolve(&self, features: usize) -> usize {
        match *self {
            SubsetSize::Fraction(f) => ((f * features as f64).round() as usize).clamp(1, features),
            SubsetSize::Count(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaithfulnessConfig {
    pub baseline: BaselineSpec,
    pub subset: SubsetSize,
    /// Number of random subsets for faithfulness correlation.
    pub runs: usize,
    /// Pixel removal plan; `None` uses `min(H·W, H)` equal chunks.
    pub plan: Option<PerturbationPlan>,
    /// Selectivity patch side.
    pub patch_size: usize,
    pub seed: u64,
}

impl Default for FaithfulnessConfig {
    fn default() -> Self {
        Self {
            baseline: BaselineSpec::Black,
            subset: SubsetSize::Fraction(0.05),
            runs: 100,
            plan: None,
            patch_size: 2,
            seed: 0,
        }
    }
}

impl FaithfulnessConfig {
    fn pixel_plan(&self, image: &ImageTensor) -> Result<PerturbationPlan> {
        let plan = match &self.plan {
            Some(p) => p.clone(),
            None => PerturbationPlan::default_for(image.height(), image.width(), Granularity::Pixel)?,
        };
        plan.validate(image.height(), image.width())?;
        Ok(plan)
    }
}

struct Setup {
    class: usize,
    p0: f64,
}

fn setup(model: &dyn Predictor, image: &ImageTensor, map: &SaliencyMap) -> Result<Setup> {
    if map.height() != image.height() || map.width() != image.width() {
        return Err(Error::Dimension(format!(
            "map is {}x{}, image is {}x{}",
            map.height(),
            map.width(),
            image.height(),
            image.width()
        )));
    }
    let probs = model.predict(image)?;
    let class = argmax(&probs);
    Ok(Setup {
        class,
        p0: probs[class],
    })
}

/// Pearson correlation between the probability drop after replacing a
/// random pixel subset and the summed attribution of that subset.
pub fn faithfulness_correlation(
    model: &dyn Predictor,
    image: &ImageTensor,
    map: &SaliencyMap,
    cfg: &FaithfulnessConfig,
) -> Result<MetricOutcome> {
    if cfg.runs < 2 {
        return Err(Error::Parameter(format!(
            "faithfulness correlation needs at least 2 runs, got {}",
            cfg.runs
        )));
    }
    let Setup { class, p0 } = setup(model, image, map)?;
    let n = image.pixel_count();
    let k = cfg.subset.resolve(n);
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("subset size {k} invalid for {n} pixels")));
    }
    let mut drops = Vec::with_capacity(cfg.runs);
    let mut attrs = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let run_seed = seed::derive(cfg.seed, run as u64);
        let subset = index::sample(&mut seed::rng(run_seed), n, k).into_vec();
        let remover = Remover::new(image, Granularity::Pixel, cfg.baseline.derive(run as u64))?;
        let mut x = image.clone();
        for &p in &subset {
            remover.remove(&mut x, p);
        }
        drops.push(p0 - model.predict(&x)?[class]);
        attrs.push(subset.iter().map(|&p| map.data()[p]).sum());
    }
    Ok(MetricOutcome::from_correlation(
        pearson(&attrs, &drops)?,
        "subset drop or attribution series",
    ))
}

/// Probabilities along cumulative removal in `order`, chunked by `plan`:
/// index 0 is the unperturbed image.
fn deletion_probabilities(
    model: &dyn Predictor,
    image: &ImageTensor,
    class: usize,
    p0: f64,
    chunks: &[&[usize]],
    remover: &Remover,
) -> Result<Vec<f64>> {
    let mut x = image.clone();
    let mut probs = Vec::with_capacity(chunks.len() + 1);
    probs.push(p0);
    for chunk in chunks {
        for &f in *chunk {
            remover.remove(&mut x, f);
        }
        probs.push(model.predict(&x)?[class]);
    }
    Ok(probs)
}

/// Pearson correlation between each step's probability drop and the summed
/// attribution of the chunk removed at that step (descending order).
pub fn faithfulness_estimate(
    model: &dyn Predictor,
    image: &ImageTensor,
    map: &SaliencyMap,
    cfg: &FaithfulnessConfig,
) -> Result<MetricOutcome> {
    let Setup { class, p0 } = setup(model, image, map)?;
    let plan = cfg.pixel_plan(image)?;
    let order = descending_order(map, plan.granularity)?;
    let chunks = plan.chunk_ordering(&order)?;
    let remover = Remover::new(image, plan.granularity, cfg.baseline)?;
    let probs = deletion_probabilities(model, image, class, p0, &chunks, &remover)?;
    let sums = feature_sums(map, plan.granularity)?;
    let drops: Vec<f64> = probs.windows(2).map(|w| w[0] - w[1]).collect();
    let attrs: Vec<f64> = chunks
        .iter()
        .map(|c| c.iter().map(|&f| sums[f]).sum())
        .collect();
    if drops.len() < 2 {
        return Err(Error::Parameter("faithfulness estimate needs at least 2 steps".into()));
    }
    Ok(MetricOutcome::from_correlation(
        pearson(&attrs, &drops)?,
        "chunk drop or attribution series",
    ))
}

/// Fraction of insertion steps at which the target probability does not
/// decrease, starting from the fully replaced image and restoring features
/// in ascending attribution order.
pub fn monotonicity_arya_ratio(
    model: &dyn Predictor,
    image: &ImageTensor,
    map: &SaliencyMap,
    cfg: &FaithfulnessConfig,
) -> Result<MetricOutcome> {
    let Setup { class, .. } = setup(model, image, map)?;
    let plan = cfg.pixel_plan(image)?;
    let mut ascending = descending_order(map, plan.granularity)?;
    ascending.indices.reverse();
    let chunks = plan.chunk_ordering(&ascending)?;
    let remover = Remover::new(image, plan.granularity, cfg.baseline)?;

    let mut x = remover.fully_removed().clone();
    let mut prev = model.predict(&x)?[class];
    let mut non_decreasing = 0usize;
    for chunk in &chunks {
        for &f in *chunk {
            remover.copy_feature(image, &mut x, f);
        }
        let p = model.predict(&x)?[class];
        if p >= prev {
            non_decreasing += 1;
        }
        prev = p;
    }
    Ok(MetricOutcome::Scalar(non_decreasing as f64 / chunks.len() as f64))
}

/// Spearman correlation between chunk attribution sums and the absolute
/// probability change when that chunk alone is replaced.
pub fn monotonicity_nguyen(
    model: &dyn Predictor,
    image: &ImageTensor,
    map: &SaliencyMap,
    cfg: &FaithfulnessConfig,
) -> Result<MetricOutcome> {
    let Setup { class, p0 } = setup(model, image, map)?;
    let plan = cfg.pixel_plan(image)?;
    let order = descending_order(map, plan.granularity)?;
    let chunks = plan.chunk_ordering(&order)?;
    if chunks.len() < 2 {
        return Err(Error::Parameter("monotonicity needs at least 2 steps".into()));
    }
    let remover = Remover::new(image, plan.granularity, cfg.baseline)?;
    let sums = feature_sums(map, plan.granularity)?;
    let mut attrs = Vec::with_capacity(chunks.len());
    let mut changes = Vec::with_capacity(chunks.len());
    for chunk in &chunks {
        let mut x = image.clone();
        for &f in *chunk {
            remover.remove(&mut x, f);
        }
        changes.push((p0 - model.predict(&x)?[class]).abs());
        attrs.push(chunk.iter().map(|&f| sums[f]).sum());
    }
    Ok(MetricOutcome::from_correlation(
        spearman(&attrs, &changes)?,
        "chunk attribution or change series",
    ))
}

fn deletion_curve(
    model: &dyn Predictor,
    image: &ImageTensor,
    map: &SaliencyMap,
    plan: &PerturbationPlan,
    baseline: BaselineSpec,
) -> Result<MetricOutcome> {
    let Setup { class, p0 } = setup(model, image, map)?;
    plan.validate(image.height(), image.width())?;
    let order = descending_order(map, plan.granularity)?;
    let chunks = plan.chunk_ordering(&order)?;
    let remover = Remover::new(image, plan.granularity, baseline)?;
    let y = deletion_probabilities(model, image, class, p0, &chunks, &remover)?;
    let total = plan.feature_count() as f64;
    let mut x = Vec::with_capacity(y.len());
    let mut removed = 0usize;
    x.push(0.0);
    for &n in &plan.schedule {
        removed += n;
        x.push(removed as f64 / total);
    }
    Ok(MetricOutcome::Curve(Curve { x, y }))
}

/// Target probability after each cumulative removal step, most relevant
/// pixels first. Length `steps + 1`; x is the fraction of pixels removed.
pub fn pixel_flipping_curve(
    model: &dyn Predictor,
    image: &ImageTensor,
    map: &SaliencyMap,
    cfg: &FaithfulnessConfig,
) -> Result<MetricOutcome> {
    let plan = cfg.pixel_plan(image)?;
    deletion_curve(model, image, map, &plan, cfg.baseline)
}

/// Like pixel flipping, removing one `patch_size` square per step in
/// descending patch-attribution order.
pub fn selectivity_curve(
    model: &dyn Predictor,
    image: &ImageTensor,
    map: &SaliencyMap,
    cfg: &FaithfulnessConfig,
) -> Result<MetricOutcome> {
    let plan = PerturbationPlan::default_for(image.height(), image.width(), Granularity::Patch(cfg.patch_size))?;
    deletion_curve(model, image, map, &plan, cfg.baseline)
}
