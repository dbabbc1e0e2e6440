//! Statistics relating setpoint changes to power consumption.

mod batch;
mod correlation;
mod matched;
mod regression;
mod window;

pub use batch::{
    anova_oneway, batch_analysis, read_results_csv, summarize_batch, write_results_csv, AnovaResult, BatchOutput,
    BatchSummary, DirectionTally, QuartileBox, SkippedAnalysis, WindowGroupSummary, RESULTS_HEADER,
};
pub use correlation::{average_ranks, correlate, pearson, t_test_p_value, Correlation};
pub use matched::{matched_window_analysis, welch_t_test, MatchedComparison, PowerWindow, WelchTest};
pub use regression::{ols, LinearFit};
pub use window::{default_guard, plot_rows, window_analysis, write_plot_csv, AnalysisResult, PlotRow, WindowTag};

/// Significance level used for every test unless overridden.
pub const DEFAULT_ALPHA: f64 = 0.05;

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}
