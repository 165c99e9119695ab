//! Batched, time-major input assembly and per-head training targets.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::datamodel::sample::MultimodalSample;
use crate::diffkernel::tensor::Tensor;
use crate::emert::config::{ModelConfig, TaskMode};
use crate::error::{Error, Result};

/// One mini-batch. Sequences are stored time-major: row `t * B + b` holds
/// frame `t` of sample `b`, so a recurrence step is a contiguous row slice.
#[derive(Debug, Clone)]
pub struct BatchInput {
    pub face: Tensor,
    pub eye: Tensor,
    pub gaze: Tensor,
    pub batch: usize,
    pub sample_ids: Vec<String>,
}

fn time_major(
    seqs: &[&Tensor],
    t_len: usize,
    dim: usize,
    name: &'static str,
) -> Result<Tensor> {
    let b = seqs.len();
    for s in seqs {
        if s.shape() != [t_len, dim] {
            return Err(Error::Config(format!(
                "{name}: expected sequence shape [{t_len}, {dim}], got {:?}",
                s.shape()
            )));
        }
    }
    let mut data = vec![0.0; b * t_len * dim];
    for (bi, s) in seqs.iter().enumerate() {
        for t in 0..t_len {
            let dst = (t * b + bi) * dim;
            data[dst..dst + dim].copy_from_slice(s.row(t));
        }
    }
    Tensor::new(vec![b * t_len, dim], data)
}

impl BatchInput {
    pub fn from_samples(samples: &[&MultimodalSample], cfg: &ModelConfig) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "empty batch".into(),
            });
        }
        let face: Vec<&Tensor> = samples.iter().map(|s| &s.face_seq).collect();
        let eye: Vec<&Tensor> = samples.iter().map(|s| &s.eyemove_seq).collect();
        let gaze: Vec<&Tensor> = samples.iter().map(|s| &s.fixation_seq).collect();
        Ok(Self {
            face: time_major(&face, cfg.t_face, cfg.face_dim, "face")?,
            eye: time_major(&eye, cfg.t_eye, cfg.eye_dim, "eyemove")?,
            gaze: time_major(&gaze, cfg.t_gaze, cfg.gaze_dim, "fixation")?,
            batch: samples.len(),
            sample_ids: samples.iter().map(|s| s.sample_id.clone()).collect(),
        })
    }

    /// Same, with zero-mean Gaussian noise of the given variance added to
    /// every modality (fresh draw per element).
    pub fn from_samples_noisy<R: Rng>(
        samples: &[&MultimodalSample],
        cfg: &ModelConfig,
        variance: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if variance < 0.0 {
            return Err(Error::InvalidParameter {
                name: "variance",
                reason: format!("must be >= 0, got {variance}"),
            });
        }
        let mut batch = Self::from_samples(samples, cfg)?;
        if variance > 0.0 {
            let std = variance.sqrt();
            for t in [&mut batch.face, &mut batch.eye, &mut batch.gaze] {
                for v in t.data_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v += z * std;
                }
            }
        }
        Ok(batch)
    }
}

/// Targets for one prediction head.
#[derive(Debug, Clone)]
pub enum HeadTargets {
    Classes(Vec<usize>),
    /// [B, dim] regression targets.
    Values(Tensor),
}

/// Pull the target view a head trains against out of the labels.
pub fn head_targets(
    samples: &[&MultimodalSample],
    task: TaskMode,
    er_view: bool,
) -> Result<HeadTargets> {
    match task {
        TaskMode::Classify3 => Ok(HeadTargets::Classes(
            samples
                .iter()
                .map(|s| {
                    if er_view {
                        s.labels.er_coarse.index()
                    } else {
                        s.labels.fer_coarse.index()
                    }
                })
                .collect(),
        )),
        TaskMode::Classify7 => Ok(HeadTargets::Classes(
            samples
                .iter()
                .map(|s| {
                    if er_view {
                        s.labels.er_fine.index()
                    } else {
                        s.labels.fer_fine.index()
                    }
                })
                .collect(),
        )),
        TaskMode::RegressVa => {
            let mut data = Vec::with_capacity(samples.len() * 2);
            for s in samples {
                if er_view {
                    data.push(s.labels.er_valence);
                    data.push(s.labels.er_arousal);
                } else {
                    data.push(s.labels.fer_valence);
                    data.push(s.labels.fer_arousal);
                }
            }
            Ok(HeadTargets::Values(Tensor::new(
                vec![samples.len(), 2],
                data,
            )?))
        }
        TaskMode::RegressIntensity => {
            if er_view {
                return Err(Error::Config(
                    "intensity regression is only defined for the FER view".into(),
                ));
            }
            let data = samples.iter().map(|s| s.labels.fer_intensity).collect();
            Ok(HeadTargets::Values(Tensor::new(
                vec![samples.len(), 1],
                data,
            )?))
        }
    }
}
