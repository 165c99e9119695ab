//! Experiment orchestration (placeholder while the model stabilizes).
