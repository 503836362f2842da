//! Explainer contract and the native explainers: RISE plus the three dummy
//! maps used to probe metric reliability.

use std::any::Any;
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::models::{check_shape, PlantedEvidenceModel, Predictor};
use crate::seed;
use crate::tensor::{ImageTensor, SaliencyMap};

/// What an explainer's output depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ExplainerProperties {
    pub input_dependent: bool,
    pub model_dependent: bool,
    pub class_dependent: bool,
    /// Same arguments (including seed) give bit-equal maps.
    pub deterministic: bool,
}

pub trait Explainer: Send + Sync {
    fn name(&self) -> &str;

    fn properties(&self) -> ExplainerProperties;

    /// Attribution map for `class`, with the spatial size of `image`.
    fn explain(
        &self,
        model: &dyn Predictor,
        image: &ImageTensor,
        class: usize,
        seed: u64,
    ) -> Result<SaliencyMap>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiseConfig {
    pub masks: usize,
    /// Side of the low-resolution binary grid.
    pub grid: usize,
    /// Probability that a grid cell is kept.
    pub keep_prob: f64,
}

impl Default for RiseConfig {
    fn default() -> Self {
        Self {
            masks: 4000,
            grid: 7,
            keep_prob: 0.5,
        }
    }
}

impl RiseConfig {
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.masks == 0 {
            return Err(Error::Parameter("RISE needs at least one mask".into()));
        }
        if self.grid < 2 || self.grid >= height.min(width) {
            return Err(Error::Parameter(format!(
                "RISE grid {} must satisfy 2 <= s < min({height}, {width})",
                self.grid
            )));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob < 1.0) {
            return Err(Error::Parameter(format!(
                "RISE keep probability {} must be in (0, 1)",
                self.keep_prob
            )));
        }
        Ok(())
    }
}

/// Randomized input sampling: the saliency map is the score-weighted average
/// of random smooth occlusion masks.
#[derive(Debug, Clone)]
pub struct Rise {
    pub config: RiseConfig,
}

impl Rise {
    pub fn new(config: RiseConfig) -> Self {
        Self { config }
    }
}

/// Generates one RISE mask: a Bernoulli(`keep_prob`) grid, bilinearly
/// upsampled to `(grid+1)·cell` and cropped at a random sub-cell shift.
pub fn rise_mask(cfg: &RiseConfig, height: usize, width: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let s = cfg.grid;
    let cell_h = height.div_ceil(s);
    let cell_w = width.div_ceil(s);
    let up_h = (s + 1) * cell_h;
    let up_w = (s + 1) * cell_w;
    let grid: Vec<f64> = (0..s * s)
        .map(|_| if rng.gen::<f64>() < cfg.keep_prob { 1.0 } else { 0.0 })
        .collect();
    let dy = rng.gen_range(0..cell_h);
    let dx = rng.gen_range(0..cell_w);

    // Source coordinate of an upsampled pixel centre, edge-clamped.
    let src = |o: usize, up: usize| -> (usize, usize, f64) {
        let t = ((o as f64 + 0.5) * s as f64 / up as f64 - 0.5).clamp(0.0, (s - 1) as f64);
        let i0 = t.floor() as usize;
        let i1 = (i0 + 1).min(s - 1);
        (i0, i1, t - i0 as f64)
    };
    let cols: Vec<_> = (0..width).map(|c| src(c + dx, up_w)).collect();
    let mut mask = Vec::with_capacity(height * width);
    for r in 0..height {
        let (r0, r1, fr) = src(r + dy, up_h);
        for &(c0, c1, fc) in &cols {
            let top = grid[r0 * s + c0] * (1.0 - fc) + grid[r0 * s + c1] * fc;
            let bottom = grid[r1 * s + c0] * (1.0 - fc) + grid[r1 * s + c1] * fc;
            mask.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    mask
}

/// Element-wise product of every channel of `image` with a spatial mask.
pub fn mask_image(image: &ImageTensor, mask: &[f64]) -> Result<ImageTensor> {
    let n = image.pixel_count();
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| v * mask[i % n])
        .collect();
    ImageTensor::new(image.channels(), image.height(), image.width(), data)
}

pub fn rise_explain(
    model: &dyn Predictor,
    image: &ImageTensor,
    class: usize,
    cfg: &RiseConfig,
    seed: u64,
) -> Result<SaliencyMap> {
    check_shape(model, image)?;
    cfg.validate(image.height(), image.width())?;
    if class >= model.num_classes() {
        return Err(Error::Parameter(format!(
            "class {class} out of range for {} classes",
            model.num_classes()
        )));
    }
    let (h, w) = (image.height(), image.width());
    let mut rng = seed::rng(seed);
    let mut acc = vec![0.0; h * w];
    for _ in 0..cfg.masks {
        let mask = rise_mask(cfg, h, w, &mut rng);
        let score = model.predict(&mask_image(image, &mask)?)?[class];
        for (a, m) in acc.iter_mut().zip(&mask) {
            *a += score * m;
        }
    }
    let norm = cfg.masks as f64 * cfg.keep_prob;
    SaliencyMap::new(h, w, acc.into_iter().map(|v| v / norm).collect())
}

impl Explainer for Rise {
    fn name(&self) -> &str {
        "rise"
    }

    fn properties(&self) -> ExplainerProperties {
        ExplainerProperties {
            input_dependent: true,
            model_dependent: true,
            class_dependent: true,
            deterministic: true,
        }
    }

    fn explain(
        &self,
        model: &dyn Predictor,
        image: &ImageTensor,
        class: usize,
        seed: u64,
    ) -> Result<SaliencyMap> {
        rise_explain(model, image, class, &self.config, seed)
    }
}

/// I.i.d. `U[0, 1)` noise per pixel.
pub fn dummy_random(image: &ImageTensor, seed: u64) -> SaliencyMap {
    let mut rng = seed::rng(seed);
    let data = (0..image.pixel_count()).map(|_| rng.gen::<f64>()).collect();
    SaliencyMap::new(image.height(), image.width(), data).expect("finite by construction")
}

/// Sobel gradient magnitude of the channel-mean image, replicate padding.
pub fn dummy_sobel(image: &ImageTensor) -> Result<SaliencyMap> {
    let (h, w) = (image.height(), image.width());
    if h < 3 || w < 3 {
        return Err(Error::Dimension(format!(
            "sobel filter needs at least 3x3, got {h}x{w}"
        )));
    }
    let gray = image.grayscale();
    let px = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        gray[r * w + c]
    };
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let gx = (px(r - 1, c + 1) + 2.0 * px(r, c + 1) + px(r + 1, c + 1))
                - (px(r - 1, c - 1) + 2.0 * px(r, c - 1) + px(r + 1, c - 1));
            let gy = (px(r + 1, c - 1) + 2.0 * px(r + 1, c) + px(r + 1, c + 1))
                - (px(r - 1, c - 1) + 2.0 * px(r - 1, c) + px(r - 1, c + 1));
            data.push((gx * gx + gy * gy).sqrt());
        }
    }
    SaliencyMap::new(h, w, data)
}

/// Centered isotropic Gaussian `exp(-(u²+v²)/2)`, with the first and last
/// pixel centres along each axis mapped to -1 and +1.
pub fn dummy_gaussian(height: usize, width: usize) -> SaliencyMap {
    let coord = |i: usize, n: usize| {
        if n > 1 {
            -1.0 + 2.0 * i as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    let mut data = Vec::with_capacity(height * width);
    for r in 0..height {
        let v = coord(r, height);
        for c in 0..width {
            let u = coord(c, width);
            data.push((-(u * u + v * v) / 2.0).exp());
        }
    }
    SaliencyMap::new(height, width, data).expect("finite by construction")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomDummy;

#[derive(Debug, Clone, Copy, Default)]
pub struct SobelDummy;

#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianDummy;

impl Explainer for RandomDummy {
    fn name(&self) -> &str {
        "random"
    }

    fn properties(&self) -> ExplainerProperties {
        ExplainerProperties {
            input_dependent: false,
            model_dependent: false,
            class_dependent: false,
            deterministic: true,
        }
    }

    fn explain(&self, _: &dyn Predictor, image: &ImageTensor, _: usize, seed: u64) -> Result<SaliencyMap> {
        Ok(dummy_random(image, seed))
    }
}

impl Explainer for SobelDummy {
    fn name(&self) -> &str {
        "sobel"
    }

    fn properties(&self) -> ExplainerProperties {
        ExplainerProperties {
            input_dependent: true,
            model_dependent: false,
            class_dependent: false,
            deterministic: true,
        }
    }

    fn explain(&self, _: &dyn Predictor, image: &ImageTensor, _: usize, _: u64) -> Result<SaliencyMap> {
        dummy_sobel(image)
    }
}

impl Explainer for GaussianDummy {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn properties(&self) -> ExplainerProperties {
        ExplainerProperties {
            input_dependent: false,
            model_dependent: false,
            class_dependent: false,
            deterministic: true,
        }
    }

    fn explain(&self, _: &dyn Predictor, image: &ImageTensor, _: usize, _: u64) -> Result<SaliencyMap> {
        Ok(dummy_gaussian(image.height(), image.width()))
    }
}

/// Exact attribution of a [`PlantedEvidenceModel`]. Uses whatever planted
/// model it is handed, so randomized copies get their own ground truth.
/// Explaining class 0 yields the negated map.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruth;

impl Explainer for GroundTruth {
    fn name(&self) -> &str {
        "ground_truth"
    }

    fn properties(&self) -> ExplainerProperties {
        ExplainerProperties {
            input_dependent: true,
            model_dependent: true,
            class_dependent: true,
            deterministic: true,
        }
    }

    fn explain(&self, model: &dyn Predictor, image: &ImageTensor, class: usize, _: u64) -> Result<SaliencyMap> {
        let planted = model
            .as_any()
            .and_then(|m: &dyn Any| m.downcast_ref::<PlantedEvidenceModel>())
            .ok_or_else(|| {
                Error::Config("ground_truth explainer requires the planted-evidence model".into())
            })?;
        let map = planted.ground_truth_map(image)?;
        match class {
            1 => Ok(map),
            0 => map.map(|v| -v),
            _ => Err(Error::Parameter(format!("class {class} out of range for 2 classes"))),
        }
    }
}

/// Reads a map stored in the SMAP format.
pub fn load_map_file(path: &Path) -> Result<SaliencyMap> {
    SaliencyMap::load_smap(path)
}
