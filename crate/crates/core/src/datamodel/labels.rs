//! Dual label set: coarse/fine classes for both the felt-emotion (ER) and
//! displayed-expression (FER) views, continuous valence/arousal, and
//! expression intensity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseEmotion {
    Positive,
    Negative,
    Neutral,
}

impl CoarseEmotion {
    pub const ALL: [CoarseEmotion; 3] = [
        CoarseEmotion::Positive,
        CoarseEmotion::Negative,
        CoarseEmotion::Neutral,
    ];

    pub fn index(self) -> usize {
        match self {
            CoarseEmotion::Positive => 0,
            CoarseEmotion::Negative => 1,
            CoarseEmotion::Neutral => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FineEmotion {
    Happiness,
    Sadness,
    Fear,
    Surprise,
    Disgust,
    Anger,
    Neutral,
}

impl FineEmotion {
    pub const ALL: [FineEmotion; 7] = [
        FineEmotion::Happiness,
        FineEmotion::Sadness,
        FineEmotion::Fear,
        FineEmotion::Surprise,
        FineEmotion::Disgust,
        FineEmotion::Anger,
        FineEmotion::Neutral,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&f| f == self).unwrap()
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or(Error::Validation {
            field: "fine_emotion".into(),
            reason: format!("index {i} out of range"),
        })
    }
}

/// Fine-to-coarse mapping. The placement of surprise is configurable since
/// it is the one genuinely ambiguous class; everything else is fixed:
/// happiness is positive, sadness/fear/disgust/anger are negative, neutral
/// stays neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseMapping {
    pub surprise_positive: bool,
}

impl Default for CoarseMapping {
    fn default() -> Self {
        Self {
            surprise_positive: true,
        }
    }
}

impl CoarseMapping {
    pub fn coarse_of(self, fine: FineEmotion) -> CoarseEmotion {
        match fine {
            FineEmotion::Happiness => CoarseEmotion::Positive,
            FineEmotion::Surprise => {
                if self.surprise_positive {
                    CoarseEmotion::Positive
                } else {
                    CoarseEmotion::Negative
                }
            }
            FineEmotion::Sadness
            | FineEmotion::Fear
            | FineEmotion::Disgust
            | FineEmotion::Anger => CoarseEmotion::Negative,
            FineEmotion::Neutral => CoarseEmotion::Neutral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub er_coarse: CoarseEmotion,
    pub er_fine: FineEmotion,
    pub fer_coarse: CoarseEmotion,
    pub fer_fine: FineEmotion,
    pub er_valence: f64,
    pub er_arousal: f64,
    pub fer_valence: f64,
    pub fer_arousal: f64,
    pub fer_intensity: f64,
}

impl LabelSet {
    /// Build from fine labels, deriving the coarse ones through `mapping`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fine(
        er_fine: FineEmotion,
        fer_fine: FineEmotion,
        er_valence: f64,
        er_arousal: f64,
        fer_valence: f64,
        fer_arousal: f64,
        fer_intensity: f64,
        mapping: CoarseMapping,
    ) -> Result<Self> {
        let set = Self {
            er_coarse: mapping.coarse_of(er_fine),
            er_fine,
            fer_coarse: mapping.coarse_of(fer_fine),
            fer_fine,
            er_valence,
            er_arousal,
            fer_valence,
            fer_arousal,
            fer_intensity,
        };
        set.validate(mapping)?;
        Ok(set)
    }

    pub fn validate(&self, mapping: CoarseMapping) -> Result<()> {
        let unit = [
            ("er_valence", self.er_valence),
            ("er_arousal", self.er_arousal),
            ("fer_valence", self.fer_valence),
            ("fer_arousal", self.fer_arousal),
        ];
        for (field, v) in unit {
            if !(-1.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Validation {
                    field: field.into(),
                    reason: format!("{v} outside [-1, 1]"),
                });
            }
        }
        if !(0.0..=3.0).contains(&self.fer_intensity) || !self.fer_intensity.is_finite() {
            return Err(Error::Validation {
                field: "fer_intensity".into(),
                reason: format!("{} outside [0, 3]", self.fer_intensity),
            });
        }
        if self.er_coarse != mapping.coarse_of(self.er_fine) {
            return Err(Error::Validation {
                field: "er_coarse".into(),
                reason: format!(
                    "{:?} inconsistent with fine label {:?}",
                    self.er_coarse, self.er_fine
                ),
            });
        }
        if self.fer_coarse != mapping.coarse_of(self.fer_fine) {
            return Err(Error::Validation {
                field: "fer_coarse".into(),
                reason: format!(
                    "{:?} inconsistent with fine label {:?}",
                    self.fer_coarse, self.fer_fine
                ),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mapping() {
        let m = CoarseMapping::default();
        assert_eq!(m.coarse_of(FineEmotion::Happiness), CoarseEmotion::Positive);
        assert_eq!(m.coarse_of(FineEmotion::Surprise), CoarseEmotion::Positive);
        assert_eq!(m.coarse_of(FineEmotion::Sadness), CoarseEmotion::Negative);
        assert_eq!(m.coarse_of(FineEmotion::Fear), CoarseEmotion::Negative);
        assert_eq!(m.coarse_of(FineEmotion::Disgust), CoarseEmotion::Negative);
        assert_eq!(m.coarse_of(FineEmotion::Anger), CoarseEmotion::Negative);
        assert_eq!(m.coarse_of(FineEmotion::Neutral), CoarseEmotion::Neutral);
    }

    #[test]
    fn surprise_placement_is_configurable() {
        let m = CoarseMapping {
            surprise_positive: false,
        };
        assert_eq!(m.coarse_of(FineEmotion::Surprise), CoarseEmotion::Negative);
    }

    #[test]
    fn rejects_out_of_range_valence() {
        let err = LabelSet::from_fine(
            FineEmotion::Happiness,
            FineEmotion::Happiness,
            1.5,
            0.0,
            0.0,
            0.0,
            1.0,
            CoarseMapping::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("er_valence"), "{err}");
    }

    #[test]
    fn rejects_inconsistent_coarse_label() {
        let mut set = LabelSet::from_fine(
            FineEmotion::Sadness,
            FineEmotion::Neutral,
            -0.5,
            0.0,
            0.0,
            0.0,
            0.5,
            CoarseMapping::default(),
        )
        .unwrap();
        set.er_coarse = CoarseEmotion::Positive;
        assert!(set.validate(CoarseMapping::default()).is_err());
    }

    #[test]
    fn fine_indices_are_stable() {
        for (i, f) in FineEmotion::ALL.iter().enumerate() {
            assert_eq!(f.index(), i);
            assert_eq!(FineEmotion::from_index(i).unwrap(), *f);
        }
        assert!(FineEmotion::from_index(7).is_err());
    }
}
