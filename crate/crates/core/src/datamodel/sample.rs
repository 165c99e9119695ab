//! One trial: aligned face / eye-movement / fixation feature sequences plus
//! the dual label set.

use serde::{Deserialize, Serialize};

use crate::datamodel::labels::{CoarseMapping, LabelSet};
use crate::diffkernel::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalSample {
    pub sample_id: String,
    /// [T_v, face_dim]
    pub face_seq: Tensor,
    /// [T_e, eye_dim]
    pub eyemove_seq: Tensor,
    /// [T_g, gaze_dim]
    pub fixation_seq: Tensor,
    pub labels: LabelSet,
}

impl MultimodalSample {
    pub fn validate(&self, mapping: CoarseMapping) -> Result<()> {
        for (name, t) in [
            ("face_seq", &self.face_seq),
            ("eyemove_seq", &self.eyemove_seq),
            ("fixation_seq", &self.fixation_seq),
        ] {
            if t.shape().len() != 2 {
                return Err(Error::Validation {
                    field: name.into(),
                    reason: format!("expected rank-2 sequence, got {:?}", t.shape()),
                });
            }
            if !t.all_finite() {
                return Err(Error::Validation {
                    field: name.into(),
                    reason: "contains non-finite values".into(),
                });
            }
        }
        self.labels.validate(mapping)
    }
}
