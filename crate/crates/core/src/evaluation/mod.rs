//! Holdout protocols, scoring rules, calibration diagnostics, baselines and
//! paired effect-size reports.

mod baselines;
mod gaps;
mod metrics;
mod split;

pub use baselines::{baselines, cv_best_agent, stack_logistic, Baselines, StackModel, STACK_GRAD_TOL, STACK_MAX_STEPS};
pub use gaps::{
    paired_gaps, paired_gaps_from_values, GapSummary, PairedGapReport, SplitKey, UnitMetrics, GAP_METRICS, Z_95,
};
pub use metrics::{
    auc, average_precision, bin_index, brier, logloss, score_metrics, MetricReport, Murphy, ReliabilityBin,
    DEFAULT_BINS, LOGLOSS_EPS,
};
pub use split::{audit, make_split, pair_from_index, AuditCheck, AuditReport, LabeledDyad, Regime, SplitSpec};
