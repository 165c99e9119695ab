//! JSONL persistence for multimodal samples: one object per line with the
//! sample id, per-modality shapes, flat feature arrays, and the label set.
//! f64 values round-trip bit-exactly through serde_json.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::labels::{CoarseMapping, LabelSet};
use crate::datamodel::sample::MultimodalSample;
use crate::diffkernel::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Shapes {
    face: Vec<usize>,
    eyemove: Vec<usize>,
    fixation: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    sample_id: String,
    shapes: Shapes,
    face: Vec<f64>,
    eyemove: Vec<f64>,
    fixation: Vec<f64>,
    labels: LabelSet,
}

impl SampleRecord {
    fn from_sample(s: &MultimodalSample) -> Self {
        Self {
            sample_id: s.sample_id.clone(),
            shapes: Shapes {
                face: s.face_seq.shape().to_vec(),
                eyemove: s.eyemove_seq.shape().to_vec(),
                fixation: s.fixation_seq.shape().to_vec(),
            },
            face: s.face_seq.data().to_vec(),
            eyemove: s.eyemove_seq.data().to_vec(),
            fixation: s.fixation_seq.data().to_vec(),
            labels: s.labels,
        }
    }

    fn into_sample(self, line: usize) -> Result<MultimodalSample> {
        let tensor = |name: &str, shape: Vec<usize>, data: Vec<f64>| {
            Tensor::new(shape, data).map_err(|e| Error::MalformedRecord {
                line,
                field: name.to_string(),
                reason: e.to_string(),
            })
        };
        let sample = MultimodalSample {
            sample_id: self.sample_id,
            face_seq: tensor("face", self.shapes.face, self.face)?,
            eyemove_seq: tensor("eyemove", self.shapes.eyemove, self.eyemove)?,
            fixation_seq: tensor("fixation", self.shapes.fixation, self.fixation)?,
            labels: self.labels,
        };
        sample
            .validate(CoarseMapping::default())
            .map_err(|e| match e {
                Error::Validation { field, reason } => Error::MalformedRecord {
                    line,
                    field,
                    reason,
                },
                other => other,
            })?;
        Ok(sample)
    }
}

pub fn save_dataset(samples: &[MultimodalSample], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, &SampleRecord::from_sample(s))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Load a JSONL dataset. An empty file yields an empty list; any malformed
/// record fails with its line number and offending field.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<MultimodalSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&text);
        let record: SampleRecord =
            serde_path_to_error::deserialize(&mut de).map_err(|e| Error::MalformedRecord {
                line: line_no,
                field: e.path().to_string(),
                reason: e.inner().to_string(),
            })?;
        out.push(record.into_sample(line_no)?);
    }
    Ok(out)
}
