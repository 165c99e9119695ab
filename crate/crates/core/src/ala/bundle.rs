//! Annotation bundles and consistency filtering.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved annotator id for the machine pre-labeler.
pub const MACHINE_ANNOTATOR: &str = "machine";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertLabel {
    pub annotator_id: String,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBundle {
    pub item_id: String,
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine_label: Option<usize>,
    #[serde(default)]
    pub expert_labels: Vec<ExpertLabel>,
}

impl AnnotationBundle {
    pub fn label_count(&self) -> usize {
        self.expert_labels.len() + usize::from(self.machine_label.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_count() == 0 {
            return Err(Error::Validation {
                field: "expert_labels".into(),
                reason: format!("item `{}` carries no labels", self.item_id),
            });
        }
        let check = |label: usize, field: &str| -> Result<()> {
            if label >= self.class_count {
                return Err(Error::Validation {
                    field: field.into(),
                    reason: format!(
                        "label {label} out of range for {} classes (item `{}`)",
                        self.class_count, self.item_id
                    ),
                });
            }
            Ok(())
        };
        if let Some(m) = self.machine_label {
            check(m, "machine_label")?;
        }
        for e in &self.expert_labels {
            check(e.label, "expert_labels")?;
        }
        Ok(())
    }
}

/// Outcome of filtering machine labels against the reference ER labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyOutcome {
    /// Items whose machine label matched the ER label, accepted as-is.
    pub accepted: BTreeMap<String, usize>,
    /// Items routed to expert re-annotation (mismatching or missing
    /// machine label).
    pub contested: Vec<String>,
}

/// Accept machine labels that agree with the ER label for the same item;
/// route everything else to the contested list.
pub fn consistency_filter(
    bundles: &[AnnotationBundle],
    er_labels: &BTreeMap<String, usize>,
) -> Result<ConsistencyOutcome> {
    let mut accepted = BTreeMap::new();
    let mut contested = Vec::new();
    for b in bundles {
        let er = er_labels.get(&b.item_id).ok_or_else(|| Error::Validation {
            field: "er_labels".into(),
            reason: format!("no ER label for item `{}`", b.item_id),
        })?;
        match b.machine_label {
            Some(m) if m == *er => {
                accepted.insert(b.item_id.clone(), m);
            }
            _ => contested.push(b.item_id.clone()),
        }
    }
    Ok(ConsistencyOutcome {
        accepted,
        contested,
    })
}

/// JSONL record: an [`AnnotationBundle`] plus the optional ER reference
/// label used by the consistency filter.
#[derive(Debug, Serialize, Deserialize)]
struct BundleRecord {
    #[serde(flatten)]
    bundle: AnnotationBundle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    er_label: Option<usize>,
}

pub fn load_bundles(
    path: impl AsRef<Path>,
) -> Result<(Vec<AnnotationBundle>, BTreeMap<String, usize>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut bundles = Vec::new();
    let mut er = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&text);
        let record: BundleRecord =
            serde_path_to_error::deserialize(&mut de).map_err(|e| Error::MalformedRecord {
                line: line_no,
                field: e.path().to_string(),
                reason: e.inner().to_string(),
            })?;
        record.bundle.validate().map_err(|e| match e {
            Error::Validation { field, reason } => Error::MalformedRecord {
                line: line_no,
                field,
                reason,
            },
            other => other,
        })?;
        if let Some(l) = record.er_label {
            er.insert(record.bundle.item_id.clone(), l);
        }
        bundles.push(record.bundle);
    }
    Ok((bundles, er))
}

pub fn save_bundles(
    bundles: &[AnnotationBundle],
    er_labels: &BTreeMap<String, usize>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for b in bundles {
        let record = BundleRecord {
            bundle: b.clone(),
            er_label: er_labels.get(&b.item_id).copied(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
