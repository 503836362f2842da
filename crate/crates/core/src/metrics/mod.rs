//! The fourteen evaluation metrics and their registry metadata.

pub mod complexity;
pub mod faithfulness;
pub mod randomization;
pub mod robustness;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{auc, Direction};

/// A perturbation curve over the fraction of the experiment completed.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    pub fn auc(&self) -> Result<f64> {
        auc(&self.x, &self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricOutcome {
    Scalar(f64),
    Curve(Curve),
    /// The score is mathematically undefined for this input (for example a
    /// correlation over a constant series). Excluded from aggregation.
    Undefined(String),
}

impl MetricOutcome {
    /// Scalar value, or the AUC for curves; `None` when undefined.
    pub fn reduce(&self) -> Result<Option<f64>> {
        match self {
            MetricOutcome::Scalar(v) => Ok(Some(*v)),
            MetricOutcome::Curve(c) => c.auc().map(Some),
            MetricOutcome::Undefined(_) => Ok(None),
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            MetricOutcome::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn curve(&self) -> Option<&Curve> {
        match self {
            MetricOutcome::Curve(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, MetricOutcome::Undefined(_))
    }

    pub(crate) fn from_correlation(value: Option<f64>, what: &str) -> Self {
        match value {
            Some(v) => MetricOutcome::Scalar(v),
            None => MetricOutcome::Undefined(format!("{what} has zero variance")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFamily {
    Faithfulness,
    Randomization,
    Robustness,
    Complexity,
}

impl MetricFamily {
    pub const ALL: [MetricFamily; 4] = [
        MetricFamily::Faithfulness,
        MetricFamily::Randomization,
        MetricFamily::Robustness,
        MetricFamily::Complexity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricFamily::Faithfulness => "faithfulness",
            MetricFamily::Randomization => "randomization",
            MetricFamily::Robustness => "robustness",
            MetricFamily::Complexity => "complexity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FaithfulnessCorrelation,
    FaithfulnessEstimate,
    MonotonicityArya,
    MonotonicityNguyen,
    PixelFlipping,
    Selectivity,
    ModelParameterRandomization,
    RandomLogit,
    LocalLipschitzEstimate,
    MaxSensitivity,
    AvgSensitivity,
    Sparseness,
    Complexity,
    EffectiveComplexity,
}

impl Metric {
    /// Registry order: grouped by family.
    pub const ALL: [Metric; 14] = [
        Metric::FaithfulnessCorrelation,
        Metric::FaithfulnessEstimate,
        Metric::MonotonicityArya,
        Metric::MonotonicityNguyen,
        Metric::PixelFlipping,
        Metric::Selectivity,
        Metric::ModelParameterRandomization,
        Metric::RandomLogit,
        Metric::LocalLipschitzEstimate,
        Metric::MaxSensitivity,
        Metric::AvgSensitivity,
        Metric::Sparseness,
        Metric::Complexity,
        Metric::EffectiveComplexity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::FaithfulnessCorrelation => "faithfulness_correlation",
            Metric::FaithfulnessEstimate => "faithfulness_estimate",
            Metric::MonotonicityArya => "monotonicity_arya",
            Metric::MonotonicityNguyen => "monotonicity_nguyen",
            Metric::PixelFlipping => "pixel_flipping",
            Metric::Selectivity => "selectivity",
            Metric::ModelParameterRandomization => "model_parameter_randomization",
            Metric::RandomLogit => "random_logit",
            Metric::LocalLipschitzEstimate => "local_lipschitz_estimate",
            Metric::MaxSensitivity => "max_sensitivity",
            Metric::AvgSensitivity => "avg_sensitivity",
            Metric::Sparseness => "sparseness",
            Metric::Complexity => "complexity",
            Metric::EffectiveComplexity => "effective_complexity",
        }
    }

    pub fn family(&self) -> MetricFamily {
        use Metric::*;
        match self {
            FaithfulnessCorrelation | FaithfulnessEstimate | MonotonicityArya | MonotonicityNguyen
            | PixelFlipping | Selectivity => MetricFamily::Faithfulness,
            ModelParameterRandomization | RandomLogit => MetricFamily::Randomization,
            LocalLipschitzEstimate | MaxSensitivity | AvgSensitivity => MetricFamily::Robustness,
            Sparseness | Complexity | EffectiveComplexity => MetricFamily::Complexity,
        }
    }

    /// Which way is better once curves are reduced to their AUC.
    pub fn direction(&self) -> Direction {
        use Metric::*;
        match self {
            FaithfulnessCorrelation | FaithfulnessEstimate | MonotonicityArya | MonotonicityNguyen => {
                Direction::HigherBetter
            }
            // deletion curves: a faster drop is better
            PixelFlipping | Selectivity => Direction::LowerBetter,
            // low similarity after randomization is good
            ModelParameterRandomization => Direction::LowerBetter,
            RandomLogit => Direction::HigherBetter,
            LocalLipschitzEstimate | MaxSensitivity | AvgSensitivity => Direction::LowerBetter,
            Sparseness => Direction::HigherBetter,
            Complexity | EffectiveComplexity => Direction::LowerBetter,
        }
    }

    pub fn produces_curve(&self) -> bool {
        matches!(
            self,
            Metric::PixelFlipping | Metric::Selectivity | Metric::ModelParameterRandomization
        )
    }

    /// Whether the metric is parameterized by a removal baseline.
    pub fn uses_baseline(&self) -> bool {
        self.family() == MetricFamily::Faithfulness
    }

    /// Whether the metric must call the explainer again (rather than only
    /// reading the cached map).
    pub fn reexplains(&self) -> bool {
        matches!(
            self.family(),
            MetricFamily::Randomization | MetricFamily::Robustness
        )
    }

    /// Short label used in figures.
    pub fn abbreviation(&self) -> &'static str {
        use Metric::*;
        match self {
            FaithfulnessCorrelation => "FC",
            FaithfulnessEstimate => "FE",
            MonotonicityArya => "MA",
            MonotonicityNguyen => "MN",
            PixelFlipping => "PF",
            Selectivity => "Se",
            ModelParameterRandomization => "MPR",
            RandomLogit => "RL",
            LocalLipschitzEstimate => "LLE",
            MaxSensitivity => "MS",
            AvgSensitivity => "AS",
            Sparseness => "Sp",
            Complexity => "Co",
            EffectiveComplexity => "EC",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}
