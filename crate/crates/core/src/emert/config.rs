//! Model configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a prediction head is asked to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    Classify3,
    Classify7,
    RegressVa,
    RegressIntensity,
}

impl TaskMode {
    pub fn output_dim(self) -> usize {
        match self {
            TaskMode::Classify3 => 3,
            TaskMode::Classify7 => 7,
            TaskMode::RegressVa => 2,
            TaskMode::RegressIntensity => 1,
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, TaskMode::Classify3 | TaskMode::Classify7)
    }
}

/// Which modalities the model sees; masked modalities enter the fusion as
/// zero features and their encoders receive no gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityMask {
    pub face: bool,
    pub eye: bool,
    pub gaze: bool,
}

impl Default for ModalityMask {
    fn default() -> Self {
        Self {
            face: true,
            eye: true,
            gaze: true,
        }
    }
}

impl ModalityMask {
    pub fn any(self) -> bool {
        self.face || self.eye || self.gaze
    }

    pub fn label(self) -> String {
        let mut s = String::new();
        if self.face {
            s.push('F');
        }
        if self.eye {
            s.push('E');
        }
        if self.gaze {
            s.push('G');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Shared feature width S.
    pub feature_width: usize,
    pub face_dim: usize,
    pub eye_dim: usize,
    pub gaze_dim: usize,
    pub t_face: usize,
    pub t_eye: usize,
    pub t_gaze: usize,
    /// Fusion transformer depth and head count.
    pub layers: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub grl_lambda: f64,
    /// Weight of the adversarial loss in the overall objective.
    pub alpha_adv: f64,
    /// Weight of the two task losses in the overall objective.
    pub beta_task: f64,
    pub huber_delta: f64,
    pub batch_size: usize,
    pub layer_norm_eps: f64,
    pub er_task: TaskMode,
    pub fer_task: TaskMode,
    /// Head toggles for the single-task ablation.
    pub er_head: bool,
    pub fer_head: bool,
    /// Module toggles: adversarial decoupling objective and
    /// generic-as-query cross-attention fusion.
    pub mafd: bool,
    pub emt: bool,
    pub modality_mask: ModalityMask,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_width: 64,
            face_dim: 16,
            eye_dim: 8,
            gaze_dim: 8,
            t_face: 8,
            t_eye: 32,
            t_gaze: 32,
            layers: 2,
            heads: 4,
            ff_width: 128,
            grl_lambda: 1.0,
            alpha_adv: 0.3,
            beta_task: 0.1,
            huber_delta: 1.0,
            batch_size: 16,
            layer_norm_eps: 1e-5,
            er_task: TaskMode::Classify3,
            fer_task: TaskMode::Classify3,
            er_head: true,
            fer_head: true,
            mafd: true,
            emt: true,
            modality_mask: ModalityMask::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_width == 0 || self.feature_width % self.heads != 0 {
            return Err(Error::Config(format!(
                "feature width {} must be a positive multiple of head count {}",
                self.feature_width, self.heads
            )));
        }
        for (name, v) in [
            ("grl_lambda", self.grl_lambda),
            ("alpha_adv", self.alpha_adv),
            ("beta_task", self.beta_task),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.huber_delta <= 0.0 {
            return Err(Error::Config(format!(
                "huber_delta must be positive, got {}",
                self.huber_delta
            )));
        }
        if self.batch_size == 0 || self.layers == 0 {
            return Err(Error::Config("batch_size and layers must be positive".into()));
        }
        if !self.modality_mask.any() {
            return Err(Error::Config("modality mask cannot be empty".into()));
        }
        if !self.er_head && !self.fer_head {
            return Err(Error::Config("at least one prediction head must be enabled".into()));
        }
        Ok(())
    }

    /// Uses the split MLPs that produce generic/unique features (needed by
    /// either the adversarial objective or the cross-attention fusion).
    pub fn uses_decoupling(&self) -> bool {
        self.mafd || self.emt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn width_must_divide_heads() {
        let cfg = ModelConfig {
            feature_width: 30,
            heads: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_mask_rejected() {
        let cfg = ModelConfig {
            modality_mask: ModalityMask {
                face: false,
                eye: false,
                gaze: false,
            },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
