//! MAE / MSE / RMSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

pub fn regression_metrics(pred: &[f64], target: &[f64]) -> Result<RegressionMetrics> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch {
            op: "regression_metrics",
            left: vec![pred.len()],
            right: vec![target.len()],
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidParameter {
            name: "pred",
            reason: "empty input".into(),
        });
    }
    let n = pred.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (&p, &t) in pred.iter().zip(target) {
        let d = p - t;
        abs += d.abs();
        sq += d * d;
    }
    let mse = sq / n;
    Ok(RegressionMetrics {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
    })
}
