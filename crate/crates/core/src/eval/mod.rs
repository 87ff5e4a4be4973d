//! Localization scoring: peak extraction, tolerance matching and
//! Jaccard / sensitivity / specificity.

mod extract;
mod matching;
mod metrics;
mod stack;

pub use extract::{extract_emitters, extract_emitters_with, ExtractConfig};
pub use matching::{match_emitters, MatchResult, MatchTolerance};
pub use metrics::{metrics, ConfusionCounts, Metrics};
pub use stack::{
    evaluate_stack, Aggregation, FrameReport, MetricsReport, StackEvalOptions, ToleranceReport,
};
