//! Test-set metrics, significance tests, result tables and plots.

mod metrics;
mod plot;
mod table;
mod wilcoxon;

pub use metrics::{
    aux_accuracy, evaluate, expected_random_mae, mean_abs_error, pearson_cc, predicted_intensity, predicted_polarity,
    random_baseline, AuxAccuracy, EvalReport, UNIFORM_BASELINE_MAE,
};
pub use plot::{loss_curves_svg, scatter_svg};
pub use table::{results_table, Block, ResultsTable, TableCell, HUMAN_CC, HUMAN_MAE, PUBLISHED, RANDOM_MAE, TABLE_KIND};
pub use wilcoxon::{
    compare, midranks, wilcoxon_rank_sum, wilcoxon_signed_rank, PMethod, SignificanceResult, TestKind, TestOutcome,
    ALPHA, EXACT_LIMIT,
};

/// Container kind for per-cell evaluation reports.
pub const RESULTS_KIND: &str = "mmsa-results";
