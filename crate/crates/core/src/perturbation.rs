//! Feature removal by baseline replacement, and input-neighbourhood sampling.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{min_max, FeatureOrdering, Granularity, ImageTensor};

/// Value used to simulate removing a feature. Images live in `[0, 1]`, so
/// black is 0 and white is 1 in every channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineSpec {
    Black,
    White,
    /// I.i.d. `U[0, 1)` per element.
    Random(u64),
    /// One draw per replaced region, uniform between the region's minimum
    /// and maximum value.
    Uniform(u64),
}

impl BaselineSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineSpec::Black => "black",
            BaselineSpec::White => "white",
            BaselineSpec::Random(_) => "random",
            BaselineSpec::Uniform(_) => "uniform",
        }
    }

    /// Same kind with the seed replaced by `seed`.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            BaselineSpec::Random(_) => BaselineSpec::Random(seed),
            BaselineSpec::Uniform(_) => BaselineSpec::Uniform(seed),
            fixed => fixed,
        }
    }

    /// Same kind with an independent seed for sub-stream `stream`.
    pub fn derive(self, stream: u64) -> Self {
        match self {
            BaselineSpec::Random(s) | BaselineSpec::Uniform(s) => {
                self.with_seed(seed::derive(s, stream))
            }
            fixed => fixed,
        }
    }

    /// Full replacement image: the value every element would take if its
    /// feature (at `granularity`) were removed.
    pub fn replacement(&self, image: &ImageTensor, granularity: Granularity) -> Result<ImageTensor> {
        let (c, h, w) = (image.channels(), image.height(), image.width());
        match *self {
            BaselineSpec::Black => ImageTensor::filled(c, h, w, 0.0),
            BaselineSpec::White => ImageTensor::filled(c, h, w, 1.0),
            BaselineSpec::Random(s) => {
                let mut rng = seed::rng(s);
                ImageTensor::new(c, h, w, (0..c * h * w).map(|_| rng.gen::<f64>()).collect())
            }
            BaselineSpec::Uniform(s) => {
                granularity.validate(h, w)?;
                let mut rng = seed::rng(s);
                let mut out = image.clone();
                let n = image.pixel_count();
                for f in 0..granularity.feature_count(h, w) {
                    let pixels = granularity.pixels_of(f, w);
                    let values: Vec<f64> = (0..c)
                        .flat_map(|ch| pixels.iter().map(move |&p| (ch, p)))
                        .map(|(ch, p)| image.at(ch, p))
                        .collect();
                    let (lo, hi) = min_max(&values);
                    let v = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                    let data = out.data_mut();
                    for ch in 0..c {
                        for &p in &pixels {
                            data[ch * n + p] = v;
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

impl fmt::Display for BaselineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineSpec {
    type Err = Error;

    /// Parses a baseline kind; seeded kinds start with seed 0 and are
    /// reseeded by the caller.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "black" => Ok(BaselineSpec::Black),
            "white" => Ok(BaselineSpec::White),
            "random" => Ok(BaselineSpec::Random(0)),
            "uniform" => Ok(BaselineSpec::Uniform(0)),
            other => Err(Error::Config(format!(
                "unknown baseline {other:?} (expected black, white, random or uniform)"
            ))),
        }
    }
}

/// Copies replacement values into an image one feature at a time.
#[derive(Debug, Clone)]
pub struct Remover {
    replacement: ImageTensor,
    granularity: Granularity,
}

impl Remover {
    pub fn new(image: &ImageTensor, granularity: Granularity, spec: BaselineSpec) -> Result<Self> {
        granularity.validate(image.height(), image.width())?;
        Ok(Self {
            replacement: spec.replacement(image, granularity)?,
            granularity,
        })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn feature_count(&self) -> usize {
        self.granularity
            .feature_count(self.replacement.height(), self.replacement.width())
    }

    /// Replaces `feature` in `target` (which must share the source shape).
    pub fn remove(&self, target: &mut ImageTensor, feature: usize) {
        self.copy_feature(&self.replacement, target, feature);
    }

    /// Copies `feature` from `source` into `target`.
    pub fn copy_feature(&self, source: &ImageTensor, target: &mut ImageTensor, feature: usize) {
        let w = source.width();
        let n = source.pixel_count();
        let pixels = self.granularity.pixels_of(feature, w);
        let src = source.data();
        let dst = target.data_mut();
        for ch in 0..source.channels() {
            for &p in &pixels {
                dst[ch * n + p] = src[ch * n + p];
            }
        }
    }

    /// Image with every feature removed.
    pub fn fully_removed(&self) -> &ImageTensor {
        &self.replacement
    }
}

/// Returns a copy of `image` with the listed pixels replaced by the baseline.
pub fn apply_baseline(image: &ImageTensor, pixels: &[usize], spec: BaselineSpec) -> Result<ImageTensor> {
    if let Some(&p) = pixels.iter().find(|&&p| p >= image.pixel_count()) {
        return Err(Error::Parameter(format!(
            "pixel index {p} out of range for {} pixels",
            image.pixel_count()
        )));
    }
    let remover = Remover::new(image, Granularity::Pixel, spec)?;
    let mut out = image.clone();
    for &p in pixels {
        remover.remove(&mut out, p);
    }
    Ok(out)
}

/// How many features are removed at each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationPlan {
    pub granularity: Granularity,
    pub schedule: Vec<usize>,
}

impl PerturbationPlan {
    /// `steps` equal chunks over `features`; the remainder goes to the last
    /// chunk. `steps` is clamped to `features`.
    pub fn equal_chunks(granularity: Granularity, features: usize, steps: usize) -> Result<Self> {
        if features == 0 || steps == 0 {
            return Err(Error::Parameter("a plan needs at least one feature and one step".into()));
        }
        let steps = steps.min(features);
        let size = features / steps;
        let mut schedule = vec![size; steps];
        schedule[steps - 1] += features - size * steps;
        Ok(Self {
            granularity,
            schedule,
        })
    }

    /// Default plan: `min(H·W, H)` pixel chunks, or one patch per step.
    pub fn default_for(height: usize, width: usize, granularity: Granularity) -> Result<Self> {
        granularity.validate(height, width)?;
        let features = granularity.feature_count(height, width);
        let steps = match granularity {
            Granularity::Pixel => (height * width).min(height),
            Granularity::Patch(_) => features,
        };
        Self::equal_chunks(granularity, features, steps)
    }

    /// One feature per step.
    pub fn per_feature(height: usize, width: usize, granularity: Granularity) -> Result<Self> {
        granularity.validate(height, width)?;
        let features = granularity.feature_count(height, width);
        Self::equal_chunks(granularity, features, features)
    }

    pub fn steps(&self) -> usize {
        self.schedule.len()
    }

    pub fn feature_count(&self) -> usize {
        self.schedule.iter().sum()
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        self.granularity.validate(height, width)?;
        let expected = self.granularity.feature_count(height, width);
        if self.schedule.is_empty() || self.schedule.contains(&0) {
            return Err(Error::Parameter("plan steps must each remove at least one feature".into()));
        }
        if self.feature_count() != expected {
            return Err(Error::Parameter(format!(
                "plan covers {} features, image has {expected}",
                self.feature_count()
            )));
        }
        Ok(())
    }

    /// Splits an ordering into the per-step feature chunks.
    pub fn chunks<'a>(&self, order: &'a [usize]) -> Vec<&'a [usize]> {
        let mut out = Vec::with_capacity(self.schedule.len());
        let mut start = 0;
        for &n in &self.schedule {
            out.push(&order[start..start + n]);
            start += n;
        }
        out
    }

    /// Chunks of `ordering`, checking that it matches the plan.
    pub fn chunk_ordering<'a>(&self, ordering: &'a FeatureOrdering) -> Result<Vec<&'a [usize]>> {
        if ordering.granularity != self.granularity || ordering.indices.len() != self.feature_count() {
            return Err(Error::Parameter("ordering does not match the perturbation plan".into()));
        }
        Ok(self.chunks(&ordering.indices))
    }
}

/// Draws one perturbed neighbour of an image.
pub trait NeighborhoodSampler: Send + Sync {
    fn sample(&self, image: &ImageTensor, seed: u64) -> Result<ImageTensor>;
}

/// `x + δ` with `δ` i.i.d. uniform in `[-radius, radius]` per element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformNoise {
    pub radius: f64,
}

impl NeighborhoodSampler for UniformNoise {
    fn sample(&self, image: &ImageTensor, seed: u64) -> Result<ImageTensor> {
        let mut rng = seed::rng(seed);
        let r = self.radius;
        let data = image
            .data()
            .iter()
            .map(|v| v + if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 })
            .collect();
        ImageTensor::new(image.channels(), image.height(), image.width(), data)
    }
}

/// `count` neighbours of `image`; neighbour `i` is drawn from seed stream `i`.
pub fn sample_neighborhood(image: &ImageTensor, radius: f64, count: usize, seed: u64) -> Result<Vec<ImageTensor>> {
    if !(radius > 0.0) || count == 0 {
        return Err(Error::Parameter(format!(
            "neighbourhood needs radius > 0 and count >= 1, got {radius} and {count}"
        )));
    }
    let sampler = UniformNoise { radius };
    (0..count)
        .map(|i| sampler.sample(image, seed::derive(seed, i as u64)))
        .collect()
}
