//! Experiment assembly and the explain/score stages.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{debug, info, warn};
use rayon::prelude::*;

use super::cache::MapCache;
use super::config::{DatasetConfig, ExperimentConfig, ModelConfig};
use super::dataset::{png_directory, synthetic_images, IngestFailure, Sample};
use super::scores::{column_name, ScoreRow, ScoresTable};
use crate::bridge::{BridgeClient, BridgeExplainer, BridgePredictor};
use crate::error::{Error, Result};
use crate::explainers::{Explainer, GaussianDummy, GroundTruth, RandomDummy, Rise, SobelDummy};
use crate::metrics::complexity::{complexity, effective_complexity, sparseness};
use crate::metrics::faithfulness::{
    faithfulness_correlation, faithfulness_estimate, monotonicity_arya_ratio, monotonicity_nguyen,
    pixel_flipping_curve, selectivity_curve, FaithfulnessConfig, SubsetSize,
};
use crate::metrics::randomization::{model_parameter_randomization_curve, random_logit_distance, RandomizationConfig};
use crate::metrics::robustness::{lipschitz_of, max_of, mean_of, sample_distances, RobustnessConfig};
use crate::metrics::{Metric, MetricOutcome};
use crate::models::{argmax, Mlp, PlantedEvidenceModel, Randomizable};
use crate::perturbation::{BaselineSpec, PerturbationPlan, UniformNoise};
use crate::seed::{derive, label};
use crate::tensor::{Granularity, SaliencyMap, Shape};

/// Where a method's maps come from.
pub enum MethodSource {
    Live(Box<dyn Explainer>),
    /// `<dir>/<image_id>.smap`; cannot be re-explained.
    Precomputed(PathBuf),
}

pub struct Method {
    pub name: String,
    pub source: MethodSource,
}

impl Method {
    pub fn live(explainer: impl Explainer + 'static) -> Self {
        Self {
            name: explainer.name().to_owned(),
            source: MethodSource::Live(Box::new(explainer)),
        }
    }
}

/// A per-item failure: logged, skipped, and reflected in the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub stage: &'static str,
    pub image_id: String,
    pub method: String,
    pub metric: String,
    pub message: String,
}

/// Everything a run needs, resolved and validated.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub samples: Vec<Sample>,
    pub ingest_failures: Vec<IngestFailure>,
    pub model: Box<dyn Randomizable>,
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    pub baselines: Vec<BaselineSpec>,
}

pub fn model_seed(cfg: &ExperimentConfig) -> u64 {
    match cfg.model {
        ModelConfig::Planted { seed: Some(s), .. } | ModelConfig::Mlp { seed: Some(s), .. } => s,
        _ => derive(cfg.seed, label("model")),
    }
}

/// Default planted block: a quarter-size square in the upper right.
pub fn default_block(height: usize, width: usize) -> [usize; 4] {
    [height / 8, width / 2 + width / 8, height / 4, width / 4]
}

fn build_model(cfg: &ExperimentConfig) -> Result<Box<dyn Randomizable>> {
    let (c, h, w) = cfg.dataset.dims();
    let shape = Shape::new(c, h, w);
    Ok(match &cfg.model {
        ModelConfig::Planted { block, weights, bias, .. } => {
            let [top, left, rows, cols] = block.unwrap_or_else(|| default_block(h, w));
            let m = PlantedEvidenceModel::block(shape, (top, left, rows, cols), (weights[0], weights[1]), 0.0, model_seed(cfg))
                .map_err(|e| Error::Config(e.to_string()))?;
            let bias = bias.unwrap_or_else(|| -0.5 * m.weights().iter().sum::<f64>());
            Box::new(PlantedEvidenceModel::new(shape, m.region().to_vec(), m.weights().to_vec(), bias)?)
        }
        ModelConfig::Mlp { hidden, classes, .. } => Box::new(Mlp::new(shape, *hidden, *classes, model_seed(cfg))?),
        ModelConfig::Bridge { address, timeout_secs, .. } => {
            let client = BridgeClient::connect(address.as_str(), timeout_secs.map(Duration::from_secs))
                .map_err(|e| Error::Config(format!("cannot reach bridge at {address}: {e}")))?;
            if client.info().shape() != shape {
                return Err(Error::Config(format!(
                    "bridge model expects {}, dataset produces {shape}",
                    client.info().shape()
                )));
            }
            for name in &cfg.explainers.bridge {
                if !client.info().explainers.contains(name) {
                    return Err(Error::Config(format!(
                        "bridge has no explainer {name:?}; available: {}",
                        client.info().explainers.join(", ")
                    )));
                }
            }
            Box::new(BridgePredictor::new(Arc::new(client), cfg.normalization()?))
        }
    })
}

fn build_methods(cfg: &ExperimentConfig) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in &cfg.explainers.builtin {
        out.push(match name.as_str() {
            "random" => Method::live(RandomDummy),
            "sobel" => Method::live(SobelDummy),
            "gaussian" => Method::live(GaussianDummy),
            "rise" => Method::live(Rise::new(cfg.explainers.rise.into())),
            "ground_truth" => Method::live(GroundTruth),
            other => return Err(Error::Config(format!("unknown builtin explainer {other:?}"))),
        });
    }
    for name in &cfg.explainers.bridge {
        out.push(Method::live(BridgeExplainer::new(name.clone())));
    }
    for src in &cfg.explainers.precomputed {
        if !src.dir.is_dir() {
            return Err(Error::Config(format!(
                "map directory {} for {:?} does not exist",
                src.dir.display(),
                src.name
            )));
        }
        out.push(Method {
            name: src.name.clone(),
            source: MethodSource::Precomputed(src.dir.clone()),
        });
    }
    Ok(out)
}

fn ingest(cfg: &ExperimentConfig) -> Result<(Vec<Sample>, Vec<IngestFailure>)> {
    match &cfg.dataset {
        DatasetConfig::Synthetic { count, seed, channels, height, width } => {
            let s = seed.unwrap_or_else(|| derive(cfg.seed, label("dataset")));
            Ok((synthetic_images(*count, *channels, *height, *width, s)?, Vec::new()))
        }
        DatasetConfig::Directory { path, channels, height, width, limit } => {
            png_directory(path, *channels, *height, *width, *limit)
        }
    }
}

impl Experiment {
    /// Validates the config, resolves every name and loads the images.
    /// Nothing is computed if any of that fails.
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let methods = build_methods(&config)?;
        let model = build_model(&config)?;
        let (samples, ingest_failures) = ingest(&config)?;
        if samples.is_empty() {
            return Err(Error::Config("dataset yielded no images".into()));
        }
        Self::from_parts(config, samples, ingest_failures, model, methods)
    }

    /// Assembles an experiment from already-built parts; the config still
    /// supplies metrics, baselines, seeds and hyperparameters.
    pub fn from_parts(
        config: ExperimentConfig,
        samples: Vec<Sample>,
        ingest_failures: Vec<IngestFailure>,
        model: Box<dyn Randomizable>,
        methods: Vec<Method>,
    ) -> Result<Self> {
        let metrics = config.metrics()?;
        let baselines = config.baselines()?;
        for s in &samples {
            if s.image.shape() != model.shape() {
                return Err(Error::Config(format!(
                    "image {} is {}, model expects {}",
                    s.id,
                    s.image.shape(),
                    model.shape()
                )));
            }
        }
        let mut names: Vec<&str> = methods.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || methods.is_empty() {
            return Err(Error::Config("method names must be unique and non-empty".into()));
        }
        Ok(Self {
            config,
            samples,
            ingest_failures,
            model,
            methods,
            metrics,
            baselines,
        })
    }

    pub fn output(&self) -> &Path {
        &self.config.output
    }

    /// Worker count: the configured limit, or one for serial models.
    pub fn jobs(&self) -> usize {
        if !self.model.concurrent() {
            return 1;
        }
        self.config
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Metric instances in column order.
    pub fn instances(&self) -> Vec<(Metric, Option<BaselineSpec>)> {
        let mut out = Vec::new();
        for &m in &self.metrics {
            if m.uses_baseline() {
                out.extend(self.baselines.iter().map(|&b| (m, Some(b))));
            } else {
                out.push((m, None));
            }
        }
        out
    }

    pub fn explain_seed(&self, method: &str, image_id: &str) -> u64 {
        derive(derive(derive(self.config.seed, label("explain")), label(method)), label(image_id))
    }

    fn image_seed(&self, stream: &str, image_id: &str) -> u64 {
        derive(derive(self.config.seed, label(stream)), label(image_id))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs())
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    fn target_class(&self, sample: &Sample) -> Result<usize> {
        Ok(argmax(&self.model.predict(&sample.image)?))
    }

    fn map_for(&self, cache: &MapCache, method: &Method, sample: &Sample, class: usize) -> Result<SaliencyMap> {
        let dims = (sample.image.height(), sample.image.width());
        match &method.source {
            MethodSource::Live(e) => cache.fetch_or_compute(&method.name, &sample.id, dims, || {
                debug!("explaining {} with {}", sample.id, method.name);
                e.explain(self.model.as_ref(), &sample.image, class, self.explain_seed(&method.name, &sample.id))
            }),
            MethodSource::Precomputed(dir) => {
                let map = SaliencyMap::load_smap(&dir.join(format!("{}.smap", sample.id)))?;
                if (map.height(), map.width()) != dims {
                    return Err(Error::Dimension(format!(
                        "precomputed map is {}x{}, image is {}x{}",
                        map.height(),
                        map.width(),
                        dims.0,
                        dims.1
                    )));
                }
                Ok(map)
            }
        }
    }

    /// Computes (or loads) every map. Returns the failures.
    pub fn explain_all(&self, cache: &MapCache) -> Result<Vec<Failure>> {
        let per_image: Vec<Vec<Failure>> = self.pool()?.install(|| {
            self.samples
                .par_iter()
                .map(|sample| {
                    let class = match self.target_class(sample) {
                        Ok(c) => c,
                        Err(e) => return vec![fail("explain", sample, "*", "", e)],
                    };
                    self.methods
                        .iter()
                        .filter_map(|m| self.map_for(cache, m, sample, class).err().map(|e| fail("explain", sample, &m.name, "", e)))
                        .collect()
                })
                .collect()
        });
        Ok(per_image.into_iter().flatten().collect())
    }

    /// Scores every image × method × metric instance. Rows come out in
    /// image, method, instance order whatever the worker count.
    pub fn score_all(&self, cache: &MapCache) -> Result<(ScoresTable, Vec<Failure>)> {
        let instances = self.instances();
        let per_image: Vec<(Vec<ScoreRow>, Vec<Failure>)> = self
            .pool()?
            .install(|| self.samples.par_iter().map(|s| self.score_image(cache, s, &instances)).collect());
        let mut table = ScoresTable::new();
        let mut failures = Vec::new();
        for (rows, fails) in per_image {
            for r in rows {
                table.push(r)?;
            }
            failures.extend(fails);
        }
        Ok((table, failures))
    }

    fn score_image(
        &self,
        cache: &MapCache,
        sample: &Sample,
        instances: &[(Metric, Option<BaselineSpec>)],
    ) -> (Vec<ScoreRow>, Vec<Failure>) {
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        let class = match self.target_class(sample) {
            Ok(c) => c,
            Err(e) => {
                failures.push(fail("score", sample, "*", "*", e));
                return (rows, failures);
            }
        };
        for method in &self.methods {
            let map = match self.map_for(cache, method, sample, class) {
                Ok(m) => m,
                Err(e) => {
                    failures.push(fail("explain", sample, &method.name, "*", e));
                    continue;
                }
            };
            let mut robustness: Option<Result<Vec<_>>> = None;
            for &(metric, baseline) in instances {
                let column = column_name(metric, baseline.map(|b| b.name()));
                let outcome = self.score_one(sample, class, method, &map, metric, baseline, &mut robustness);
                match outcome.and_then(|o| o.reduce().map(|v| (v, o))) {
                    Ok((value, outcome)) => {
                        if let MetricOutcome::Undefined(why) = &outcome {
                            debug!("{} / {} / {column}: undefined ({why})", sample.id, method.name);
                        }
                        rows.push(ScoreRow {
                            image_id: sample.id.clone(),
                            method: method.name.clone(),
                            metric,
                            baseline: baseline.map(|b| b.name().to_owned()),
                            value,
                            curve: outcome.curve().cloned(),
                        });
                    }
                    Err(e) => failures.push(fail("score", sample, &method.name, &column, e)),
                }
            }
        }
        (rows, failures)
    }

    #[allow(clippy::too_many_arguments)]
    fn score_one(
        &self,
        sample: &Sample,
        class: usize,
        method: &Method,
        map: &SaliencyMap,
        metric: Metric,
        baseline: Option<BaselineSpec>,
        robustness: &mut Option<Result<Vec<crate::metrics::robustness::SampleDistance>>>,
    ) -> Result<MetricOutcome> {
        let cfg = &self.config.metrics;
        let image = &sample.image;
        let metric_seed = derive(self.image_seed("metric", &sample.id), label(metric.name()));
        if let Some(b) = baseline {
            let plan = match cfg.faithfulness.steps {
                Some(s) => Some(PerturbationPlan::equal_chunks(Granularity::Pixel, image.pixel_count(), s)?),
                None => None,
            };
            let fc = FaithfulnessConfig {
                baseline: b.with_seed(self.image_seed("baseline", &sample.id)),
                subset: SubsetSize::Fraction(cfg.faithfulness.subset_fraction),
                runs: cfg.faithfulness.runs,
                plan,
                patch_size: cfg.faithfulness.patch_size,
                seed: metric_seed,
            };
            let model = self.model.as_ref();
            return match metric {
                Metric::FaithfulnessCorrelation => faithfulness_correlation(model, image, map, &fc),
                Metric::FaithfulnessEstimate => faithfulness_estimate(model, image, map, &fc),
                Metric::MonotonicityArya => monotonicity_arya_ratio(model, image, map, &fc),
                Metric::MonotonicityNguyen => monotonicity_nguyen(model, image, map, &fc),
                Metric::PixelFlipping => pixel_flipping_curve(model, image, map, &fc),
                Metric::Selectivity => selectivity_curve(model, image, map, &fc),
                other => Err(Error::Parameter(format!("{other} takes no baseline"))),
            };
        }
        match metric {
            Metric::Sparseness => return Ok(sparseness(map)),
            Metric::Complexity => return Ok(complexity(map)),
            Metric::EffectiveComplexity => {
                return Ok(MetricOutcome::Scalar(effective_complexity(map, cfg.complexity.epsilon) as f64))
            }
            _ => {}
        }
        let MethodSource::Live(explainer) = &method.source else {
            return Err(Error::Config(format!(
                "{metric} re-explains perturbed inputs; precomputed maps of {} cannot",
                method.name
            )));
        };
        let explainer = explainer.as_ref();
        match metric {
            Metric::ModelParameterRandomization | Metric::RandomLogit => {
                let rc = RandomizationConfig {
                    similarity: self.config.similarity()?,
                    seed: self.explain_seed(&method.name, &sample.id),
                    model_seed: derive(self.config.seed, label("randomize")),
                    logit_seed: metric_seed,
                };
                if metric == Metric::RandomLogit {
                    random_logit_distance(self.model.as_ref(), explainer, image, class, &rc)
                } else {
                    model_parameter_randomization_curve(self.model.as_ref(), explainer, image, class, &rc)
                }
            }
            Metric::LocalLipschitzEstimate | Metric::MaxSensitivity | Metric::AvgSensitivity => {
                // the three share one neighbourhood, so sample it once
                let d = robustness.get_or_insert_with(|| {
                    let rc = RobustnessConfig {
                        radius: cfg.robustness.radius,
                        samples: cfg.robustness.samples,
                        seed: self.image_seed("robustness", &sample.id),
                    };
                    let noise = UniformNoise { radius: rc.radius };
                    sample_distances(self.model.as_ref(), explainer, image, class, &rc, &noise, true)
                });
                let d = d.as_ref().map_err(clone_error)?;
                Ok(MetricOutcome::Scalar(match metric {
                    Metric::MaxSensitivity => max_of(d),
                    Metric::AvgSensitivity => mean_of(d),
                    _ => lipschitz_of(d),
                }))
            }
            other => Err(Error::Parameter(format!("{other} needs a baseline"))),
        }
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Degenerate(m) => Error::Degenerate(m.clone()),
        other => Error::Input(other.to_string()),
    }
}

fn fail(stage: &'static str, sample: &Sample, method: &str, metric: &str, e: Error) -> Failure {
    let f = Failure {
        stage,
        image_id: sample.id.clone(),
        method: method.to_owned(),
        metric: metric.to_owned(),
        message: e.to_string(),
    };
    warn!("{stage} failed for {} / {method} {metric}: {}", f.image_id, f.message);
    f
}

pub fn write_failures(path: &Path, ingest: &[IngestFailure], failures: &[Failure]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Input(e.to_string()))?;
    let mut rec = |r: [&str; 5]| w.write_record(r).map_err(|e| Error::Input(e.to_string()));
    rec(["stage", "image_id", "method", "metric", "message"])?;
    for f in ingest {
        rec(["ingest", &f.path.display().to_string(), "", "", &f.reason])?;
    }
    for f in failures {
        rec([f.stage, &f.image_id, &f.method, &f.metric, &f.message])?;
    }
    drop(rec);
    w.flush()?;
    info!("{} failures written to {}", ingest.len() + failures.len(), path.display());
    Ok(())
}
