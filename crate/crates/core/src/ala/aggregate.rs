//! End-to-end annotation aggregation: consistency filtering, EM reliability
//! estimation over the contested items, reliability-weighted voting, and
//! per-label-type consistency reporting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ala::bundle::{consistency_filter, AnnotationBundle, MACHINE_ANNOTATOR};
use crate::ala::cronbach::cronbach_alpha;
use crate::ala::em::{em_reliability, weighted_vote};
use crate::error::Result;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CronbachReport {
    pub discrete: Option<f64>,
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationReport {
    /// Final fused label per item.
    pub fused: BTreeMap<String, usize>,
    pub accepted_count: usize,
    pub contested: Vec<String>,
    /// Reliability per annotator (empty when nothing was contested).
    pub alpha: BTreeMap<String, f64>,
    pub em_iterations: usize,
    pub log_likelihood: Option<f64>,
    pub cronbach: CronbachReport,
}

/// Rating matrix over items where every rater in `raters` provided the
/// requested rating; None when no such complete matrix exists.
fn rating_matrix(
    bundles: &[AnnotationBundle],
    raters: &[String],
    get: impl Fn(&AnnotationBundle, &str) -> Option<f64>,
) -> Option<Vec<Vec<f64>>> {
    if raters.len() < 2 {
        return None;
    }
    let mut rows = Vec::new();
    for b in bundles {
        let row: Option<Vec<f64>> = raters.iter().map(|r| get(b, r)).collect();
        if let Some(row) = row {
            rows.push(row);
        }
    }
    (rows.len() >= 2).then_some(rows)
}

fn expert_rating(b: &AnnotationBundle, rater: &str, pick: impl Fn(&crate::ala::bundle::ExpertLabel) -> Option<f64>) -> Option<f64> {
    b.expert_labels
        .iter()
        .find(|e| e.annotator_id == rater)
        .and_then(pick)
}

/// Consistency of the annotation streams per label type. Raters are the
/// machine plus every expert for the discrete type, experts only for
/// valence/arousal (the machine stream carries no continuous ratings).
pub fn consistency_report(bundles: &[AnnotationBundle]) -> CronbachReport {
    let mut experts: Vec<String> = bundles
        .iter()
        .flat_map(|b| b.expert_labels.iter().map(|e| e.annotator_id.clone()))
        .collect();
    experts.sort();
    experts.dedup();

    let mut discrete_raters = experts.clone();
    if bundles.iter().any(|b| b.machine_label.is_some()) {
        discrete_raters.insert(0, MACHINE_ANNOTATOR.to_string());
    }

    let discrete = rating_matrix(bundles, &discrete_raters, |b, r| {
        if r == MACHINE_ANNOTATOR {
            b.machine_label.map(|l| l as f64)
        } else {
            expert_rating(b, r, |e| Some(e.label as f64))
        }
    })
    .and_then(|m| cronbach_alpha(&m).ok());
    let valence = rating_matrix(bundles, &experts, |b, r| {
        expert_rating(b, r, |e| e.valence)
    })
    .and_then(|m| cronbach_alpha(&m).ok());
    let arousal = rating_matrix(bundles, &experts, |b, r| {
        expert_rating(b, r, |e| e.arousal)
    })
    .and_then(|m| cronbach_alpha(&m).ok());

    CronbachReport {
        discrete,
        valence,
        arousal,
    }
}

/// Full aggregation pass over a bundle set and its ER reference labels.
pub fn aggregate_annotations(
    bundles: &[AnnotationBundle],
    er_labels: &BTreeMap<String, usize>,
) -> Result<AnnotationReport> {
    let outcome = consistency_filter(bundles, er_labels)?;
    let mut fused: BTreeMap<String, usize> = outcome.accepted.clone();

    let contested_bundles: Vec<AnnotationBundle> = bundles
        .iter()
        .filter(|b| outcome.contested.contains(&b.item_id))
        .cloned()
        .collect();

    let (alpha, iterations, ll) = if contested_bundles.is_empty() {
        (BTreeMap::new(), 0, None)
    } else {
        let model = em_reliability(&contested_bundles)?;
        for b in &contested_bundles {
            fused.insert(b.item_id.clone(), weighted_vote(b, &model)?);
        }
        (model.alpha.clone(), model.iterations, Some(model.log_likelihood))
    };

    Ok(AnnotationReport {
        fused,
        accepted_count: outcome.accepted.len(),
        contested: outcome.contested,
        alpha,
        em_iterations: iterations,
        log_likelihood: ll,
        cronbach: consistency_report(bundles),
    })
}
