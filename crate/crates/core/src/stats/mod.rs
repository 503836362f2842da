//! Aggregation and meta-evaluation statistics.

pub mod aggregate;
pub mod correlation;
pub mod holm;
pub mod meta;

pub use aggregate::{auc, build_score_matrix, rank_methods, rank_scores, Direction, PerImageScores, RankTable, ScoreMatrix};
pub use correlation::{
    concordance_percentage, kendall_p_value, kendall_tau_b, midranks, pearson, spearman,
    EXACT_PERMUTATION_LIMIT,
};
pub use holm::{holm_bonferroni, DEFAULT_ALPHA};
pub use meta::{correlate_metrics, CorrelationReport, CorrelationSettings, Family};
