//! Evaluation primitives: WAR/UAR/F1, MAE/MSE/RMSE, and rank correlations.

pub mod classification;
pub mod correlation;
pub mod regression;

pub use classification::{classification_metrics, ClassificationMetrics, ConfusionMatrix};
pub use correlation::{average_ranks, correlations, kendall_tau_b, pearson, spearman};
pub use regression::{regression_metrics, RegressionMetrics};
