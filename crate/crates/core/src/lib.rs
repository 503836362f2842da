//! Evaluation harness for saliency maps: perturbation-based metrics,
//! dummy explainers and rank-correlation meta-evaluation.

pub mod bridge;
pub mod error;
pub mod explainers;
pub mod metrics;
pub mod models;
pub mod perturbation;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use explainers::Explainer;
pub use metrics::{Metric, MetricFamily, MetricOutcome};
pub use models::{Predictor, Randomizable};
pub use tensor::{ImageTensor, SaliencyMap, Shape};
