//! Black-box predictor contract and the built-in desk-scale models.

use std::any::Any;
use std::sync::Arc;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{ImageTensor, SaliencyMap, Shape};

/// A probability oracle over images of a fixed shape.
pub trait Predictor: Send + Sync {
    fn shape(&self) -> Shape;

    fn num_classes(&self) -> usize;

    /// Class probabilities for `image`: non-negative, summing to one.
    fn predict(&self, image: &ImageTensor) -> Result<Vec<f64>>;

    /// Whether concurrent `predict` calls are allowed. Serial predictors are
    /// driven from a single worker by the pipeline.
    fn concurrent(&self) -> bool {
        true
    }

    /// Downcasting hook for explainers that need to cooperate with a
    /// specific predictor implementation (the bridge).
    fn as_any(&self) -> Option<&dyn Any> {
        None
    }
}

/// A predictor whose top layers can be re-initialized.
pub trait Randomizable: Predictor {
    fn num_layers(&self) -> usize;

    /// Returns a copy with layers `L-1 ..= L-k` redrawn from the seeded
    /// initializer. `k = 0` yields an unmodified copy; `self` never changes.
    fn randomize_top_layers(&self, k: usize, seed: u64) -> Result<Box<dyn Predictor>>;
}

pub fn check_shape(model: &dyn Predictor, image: &ImageTensor) -> Result<()> {
    if image.shape() != model.shape() {
        return Err(Error::Input(format!(
            "image shape {} does not match model input {}",
            image.shape(),
            model.shape()
        )));
    }
    Ok(())
}

/// Probability of `class` for `image`.
pub fn class_probability(model: &dyn Predictor, image: &ImageTensor, class: usize) -> Result<f64> {
    let probs = model.predict(image)?;
    probs.get(class).copied().ok_or_else(|| {
        Error::Parameter(format!("class {class} out of range for {} classes", probs.len()))
    })
}

/// Index of the most probable class (lowest index on ties).
pub fn argmax(probs: &[f64]) -> usize {
    probs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Two-class logistic model whose evidence is a weighted sum of channel-mean
/// pixel values over a fixed region. The exact attribution of the positive
/// class is known: `w_i · x̄_i` on the region and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedEvidenceModel {
    shape: Shape,
    region: Vec<usize>,
    weights: Vec<f64>,
    bias: f64,
}

impl PlantedEvidenceModel {
    pub fn new(shape: Shape, region: Vec<usize>, weights: Vec<f64>, bias: f64) -> Result<Self> {
        if region.len() != weights.len() {
            return Err(Error::Parameter(format!(
                "{} region pixels but {} weights",
                region.len(),
                weights.len()
            )));
        }
        if let Some(&p) = region.iter().find(|&&p| p >= shape.pixels()) {
            return Err(Error::Parameter(format!("region pixel {p} outside {shape}")));
        }
        let mut sorted = region.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != region.len() {
            return Err(Error::Parameter("region pixels must be distinct".into()));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parameter("weights and bias must be finite".into()));
        }
        Ok(Self {
            shape,
            region,
            weights,
            bias,
        })
    }

    /// Rectangular evidence block `[top, top+rows) × [left, left+cols)` with
    /// weights drawn uniformly from `weight_range` using `seed`.
    pub fn block(
        shape: Shape,
        (top, left, rows, cols): (usize, usize, usize, usize),
        weight_range: (f64, f64),
        bias: f64,
        seed: u64,
    ) -> Result<Self> {
        if top + rows > shape.height || left + cols > shape.width {
            return Err(Error::Parameter(format!(
                "evidence block {rows}x{cols} at ({top},{left}) exceeds {shape}"
            )));
        }
        let mut rng = seed::rng(seed);
        let mut region = Vec::with_capacity(rows * cols);
        let mut weights = Vec::with_capacity(rows * cols);
        for r in top..top + rows {
            for c in left..left + cols {
                region.push(r * shape.width + c);
                weights.push(if weight_range.0 < weight_range.1 {
                    rng.gen_range(weight_range.0..weight_range.1)
                } else {
                    weight_range.0
                });
            }
        }
        Self::new(shape, region, weights, bias)
    }

    pub fn region(&self) -> &[usize] {
        &self.region
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Logit of the positive class.
    pub fn evidence(&self, image: &ImageTensor) -> f64 {
        self.region
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * image.channel_mean(p))
            .sum::<f64>()
            + self.bias
    }

    pub fn ground_truth_map(&self, image: &ImageTensor) -> Result<SaliencyMap> {
        if image.shape() != self.shape {
            return Err(Error::Input(format!(
                "image shape {} does not match model input {}",
                image.shape(),
                self.shape
            )));
        }
        let mut data = vec![0.0; self.shape.pixels()];
        for (&p, &w) in self.region.iter().zip(&self.weights) {
            data[p] = w * image.channel_mean(p);
        }
        SaliencyMap::new(self.shape.height, self.shape.width, data)
    }
}

impl Predictor for PlantedEvidenceModel {
    fn shape(&self) -> Shape {
        self.shape
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn predict(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        check_shape(self, image)?;
        let p = sigmoid(self.evidence(image));
        Ok(vec![1.0 - p, p])
    }

    fn as_any(&self) -> Option<&dyn Any> {
        Some(self)
    }
}

impl Randomizable for PlantedEvidenceModel {
    fn num_layers(&self) -> usize {
        1
    }

    fn randomize_top_layers(&self, k: usize, seed: u64) -> Result<Box<dyn Predictor>> {
        check_layers(k, 1)?;
        let mut model = self.clone();
        if k == 1 {
            let mut rng = seed::rng(seed::derive(seed, 0));
            for w in &mut model.weights {
                *w = rng.gen_range(-INIT_SCALE..INIT_SCALE);
            }
        }
        Ok(Box::new(model))
    }
}

fn check_layers(k: usize, layers: usize) -> Result<()> {
    if k > layers {
        return Err(Error::Parameter(format!(
            "cannot randomize {k} layers of a {layers}-layer model"
        )));
    }
    Ok(())
}

/// Half-width of the uniform initializer used for every built-in weight.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-INIT_SCALE..INIT_SCALE))
            .collect();
        let bias = (0..outputs)
            .map(|_| rng.gen_range(-INIT_SCALE..INIT_SCALE))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Fully connected network with two ReLU hidden layers and a softmax output.
/// Layer 0 is the input layer, layer 2 the output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    shape: Shape,
    layers: Vec<Arc<Dense>>,
}

impl Mlp {
    pub const DEFAULT_HIDDEN: [usize; 2] = [64, 32];

    pub fn new(shape: Shape, hidden: [usize; 2], classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 || hidden.contains(&0) {
            return Err(Error::Parameter(
                "mlp needs at least 2 classes and non-empty hidden layers".into(),
            ));
        }
        let sizes = [shape.len(), hidden[0], hidden[1], classes];
        let layers = (0..3)
            .map(|j| Arc::new(Dense::init(sizes[j], sizes[j + 1], seed::derive(seed, j as u64))))
            .collect();
        Ok(Self { shape, layers })
    }

    fn sizes(&self) -> (usize, usize) {
        (self.layers[0].inputs, self.layers[2].outputs)
    }
}

impl Predictor for Mlp {
    fn shape(&self) -> Shape {
        self.shape
    }

    fn num_classes(&self) -> usize {
        self.sizes().1
    }

    fn predict(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        check_shape(self, image)?;
        let mut x = image.data().to_vec();
        let last = self.layers.len() - 1;
        for (j, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x);
            if j < last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(softmax(&x))
    }
}

impl Randomizable for Mlp {
    fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn randomize_top_layers(&self, k: usize, seed: u64) -> Result<Box<dyn Predictor>> {
        let total = self.layers.len();
        check_layers(k, total)?;
        let mut model = self.clone();
        for j in total - k..total {
            let old = &model.layers[j];
            // Layer j always gets the same redraw for a given seed, so the
            // top-down sequence k = 1, 2, ... is cumulative.
            model.layers[j] = Arc::new(Dense::init(
                old.inputs,
                old.outputs,
                seed::derive(seed::derive(seed, 0x4C41_5945), j as u64),
            ));
        }
        Ok(Box::new(model))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-channel dataset normalization, applied at the model boundary after
/// any perturbation has been done in `[0, 1]` image space.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn imagenet() -> Self {
        Self {
            mean: vec![0.485, 0.456, 0.406],
            std: vec![0.229, 0.224, 0.225],
        }
    }

    pub fn cifar10() -> Self {
        Self {
            mean: vec![0.4914, 0.4822, 0.4465],
            std: vec![0.2023, 0.1994, 0.2010],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "imagenet" => Some(Self::imagenet()),
            "cifar10" => Some(Self::cifar10()),
            _ => None,
        }
    }

    pub fn apply(&self, image: &ImageTensor) -> Result<ImageTensor> {
        if self.mean.len() != image.channels() || self.std.len() != image.channels() {
            return Err(Error::Input(format!(
                "normalization has {} channels, image has {}",
                self.mean.len(),
                image.channels()
            )));
        }
        let n = image.pixel_count();
        let data = image
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i / n]) / self.std[i / n])
            .collect();
        ImageTensor::new(image.channels(), image.height(), image.width(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn shape() -> Shape {
        Shape::new(3, 4, 4)
    }

    #[test]
    fn empty_region_is_coin_flip() {
        let m = PlantedEvidenceModel::new(shape(), vec![], vec![], 0.0).unwrap();
        let img = ImageTensor::filled(3, 4, 4, 0.8).unwrap();
        assert_eq!(m.predict(&img).unwrap(), vec![0.5, 0.5]);
        assert_eq!(m.ground_truth_map(&img).unwrap().data(), &[0.0; 16]);
    }

    #[test]
    fn zero_evidence_pixel() {
        let m = PlantedEvidenceModel::new(shape(), vec![5], vec![1.0], 0.0).unwrap();
        let img = ImageTensor::filled(3, 4, 4, 0.0).unwrap();
        assert_eq!(m.predict(&img).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn logistic_of_two() {
        let s = Shape::new(1, 2, 2);
        let m = PlantedEvidenceModel::new(s, vec![0], vec![1.0], 0.0).unwrap();
        let img = ImageTensor::new(1, 2, 2, vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let p = m.predict(&img).unwrap();
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((p[1] - expected).abs() < 1e-15);
        assert!((p[1] - 0.8808).abs() < 1e-4);
        assert!((p[0] - (1.0 - expected)).abs() < 1e-15);
    }

    #[test]
    fn ground_truth_single_pixel() {
        let s = Shape::new(1, 2, 2);
        let m = PlantedEvidenceModel::new(s, vec![0], vec![2.0], 0.0).unwrap();
        let img = ImageTensor::new(1, 2, 2, vec![3.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.ground_truth_map(&img).unwrap().data(), &[6.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn ground_truth_matches_per_pixel_recomputation() {
        let mut rng = seed::rng(11);
        let s = Shape::new(3, 6, 5);
        let m = PlantedEvidenceModel::block(s, (1, 1, 3, 4), (-1.0, 2.0), 0.3, 4).unwrap();
        let img = ImageTensor::new(3, 6, 5, (0..90).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let gt = m.ground_truth_map(&img).unwrap();
        for r in 0..6 {
            for c in 0..5 {
                let pix = r * 5 + c;
                let mean = (img.get(0, r, c) + img.get(1, r, c) + img.get(2, r, c)) / 3.0;
                let expected = match m.region().iter().position(|&q| q == pix) {
                    Some(i) => m.weights()[i] * mean,
                    None => 0.0,
                };
                assert!((gt.get(r, c) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_input_error() {
        let m = PlantedEvidenceModel::new(shape(), vec![], vec![], 0.0).unwrap();
        let img = ImageTensor::filled(1, 4, 4, 0.0).unwrap();
        assert!(matches!(m.predict(&img), Err(Error::Input(_))));
    }

    fn probe() -> Vec<ImageTensor> {
        let mut rng = seed::rng(3);
        (0..4)
            .map(|_| ImageTensor::new(3, 4, 4, (0..48).map(|_| rng.gen::<f64>()).collect()).unwrap())
            .collect()
    }

    fn outputs(m: &dyn Predictor) -> Vec<Vec<f64>> {
        probe().iter().map(|x| m.predict(x).unwrap()).collect()
    }

    #[test]
    fn mlp_randomization_contract() {
        let mlp = Mlp::new(shape(), [8, 6], 5, 42).unwrap();
        assert_eq!(mlp.num_layers(), 3);
        let base = outputs(&mlp);
        for row in &base {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(outputs(mlp.randomize_top_layers(0, 9).unwrap().as_ref()), base);
        let k1 = outputs(mlp.randomize_top_layers(1, 9).unwrap().as_ref());
        assert_eq!(k1, outputs(mlp.randomize_top_layers(1, 9).unwrap().as_ref()));
        let k2 = outputs(mlp.randomize_top_layers(2, 9).unwrap().as_ref());
        assert_ne!(k1, base);
        assert_ne!(k1, k2);
        assert!(matches!(mlp.randomize_top_layers(4, 9), Err(Error::Parameter(_))));
        // original untouched
        assert_eq!(outputs(&mlp), base);
    }

    #[test]
    fn normalization_constants() {
        let img = ImageTensor::filled(3, 2, 2, 0.485).unwrap();
        let n = Normalization::imagenet().apply(&img).unwrap();
        assert!(n.data()[0].abs() < 1e-12);
        assert!(Normalization::cifar10().apply(&ImageTensor::filled(1, 2, 2, 0.0).unwrap()).is_err());
    }
}
