//! EM estimation of per-annotator reliability.
//!
//! Single-parameter symmetric noise model: annotator `i` reports the true
//! class with probability `alpha_i`, otherwise one of the remaining `K-1`
//! classes uniformly. The E-step computes the per-item posterior over the
//! true class; the M-step re-estimates each `alpha_i` as the expected
//! fraction of items where the annotator matches the posterior-weighted
//! truth, and the class prior as the mean posterior.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ala::bundle::{AnnotationBundle, MACHINE_ANNOTATOR};
use crate::error::{Error, Result};

pub const ALPHA_CLAMP: f64 = 1e-6;
pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 500;
/// Initial reliabilities: slightly asymmetric so EM cannot stall on the
/// symmetric saddle point.
pub const INIT_ALPHA_EXPERT: f64 = 0.7;
pub const INIT_ALPHA_MACHINE: f64 = 0.6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReliabilityModel {
    pub alpha: BTreeMap<String, f64>,
    pub class_prior: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Converged per-item posterior over the true class.
    pub posteriors: BTreeMap<String, Vec<f64>>,
    /// False when the input was degenerate and the 0.5 fallback was used.
    pub converged: bool,
}

/// Labels of one item as (annotator, class) pairs; machine labels
/// participate under [`MACHINE_ANNOTATOR`]. Sorted by annotator id so that
/// floating-point accumulation order is independent of input order.
fn item_labels(bundle: &AnnotationBundle) -> Vec<(String, usize)> {
    let mut labels: Vec<(String, usize)> = Vec::new();
    if let Some(m) = bundle.machine_label {
        labels.push((MACHINE_ANNOTATOR.to_string(), m));
    }
    for e in &bundle.expert_labels {
        labels.push((e.annotator_id.clone(), e.label));
    }
    labels.sort();
    labels
}

fn init_alpha(annotator: &str) -> f64 {
    if annotator == MACHINE_ANNOTATOR {
        INIT_ALPHA_MACHINE
    } else {
        INIT_ALPHA_EXPERT
    }
}

/// One E-step: posterior per item given `alpha` and `prior`, plus the data
/// log-likelihood under those parameters.
pub fn posterior_step(
    items: &[(String, Vec<(String, usize)>)],
    alpha: &BTreeMap<String, f64>,
    prior: &[f64],
    k: usize,
) -> (Vec<Vec<f64>>, f64) {
    let mut posteriors = Vec::with_capacity(items.len());
    let mut ll = 0.0;
    for (_, labels) in items {
        let mut q = vec![0.0f64; k];
        for (c, qc) in q.iter_mut().enumerate() {
            let mut log_p = prior[c].max(f64::MIN_POSITIVE).ln();
            for (annot, t) in labels {
                let a = alpha[annot];
                let lik = if *t == c { a } else { (1.0 - a) / (k - 1) as f64 };
                log_p += lik.max(f64::MIN_POSITIVE).ln();
            }
            *qc = log_p;
        }
        let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for qc in q.iter_mut() {
            *qc = (*qc - max).exp();
            sum += *qc;
        }
        for qc in q.iter_mut() {
            *qc /= sum;
        }
        ll += max + sum.ln();
        posteriors.push(q);
    }
    (posteriors, ll)
}

pub fn em_reliability(bundles: &[AnnotationBundle]) -> Result<ReliabilityModel> {
    if bundles.is_empty() {
        return Err(Error::InvalidParameter {
            name: "bundles",
            reason: "no items".into(),
        });
    }
    let k = bundles[0].class_count;
    for b in bundles {
        b.validate()?;
        if b.class_count != k {
            return Err(Error::InvalidParameter {
                name: "class_count",
                reason: format!("mixed class counts {k} and {}", b.class_count),
            });
        }
    }
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "class_count",
            reason: "need at least 2 classes".into(),
        });
    }

    let items: Vec<(String, Vec<(String, usize)>)> = bundles
        .iter()
        .map(|b| (b.item_id.clone(), item_labels(b)))
        .collect();
    let mut alpha: BTreeMap<String, f64> = BTreeMap::new();
    for (_, labels) in &items {
        for (annot, _) in labels {
            alpha
                .entry(annot.clone())
                .or_insert_with(|| init_alpha(annot));
        }
    }

    if alpha.len() < 2 || items.len() < 2 {
        eprintln!(
            "warning: degenerate annotation input ({} annotators over {} items); \
             falling back to alpha = 0.5",
            alpha.len(),
            items.len()
        );
        for a in alpha.values_mut() {
            *a = 0.5;
        }
        let prior = vec![1.0 / k as f64; k];
        let (posteriors, ll) = posterior_step(&items, &alpha, &prior, k);
        let posteriors = items
            .iter()
            .zip(posteriors)
            .map(|((id, _), q)| (id.clone(), q))
            .collect();
        return Ok(ReliabilityModel {
            alpha,
            class_prior: prior,
            log_likelihood: ll,
            iterations: 0,
            posteriors,
            converged: false,
        });
    }

    let mut prior = vec![1.0 / k as f64; k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    for iter in 1..=MAX_ITERATIONS {
        let (q, ll) = posterior_step(&items, &alpha, &prior, k);
        debug_assert!(
            ll >= prev_ll - 1e-9,
            "EM log-likelihood decreased: {prev_ll} -> {ll}"
        );
        iterations = iter;

        // M-step: alpha_i = expected match rate; prior = mean posterior.
        let mut match_mass: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for ((_, labels), qj) in items.iter().zip(&q) {
            for (annot, t) in labels {
                let e = match_mass.entry(annot.as_str()).or_insert((0.0, 0.0));
                e.0 += qj[*t];
                e.1 += 1.0;
            }
        }
        for (annot, a) in alpha.iter_mut() {
            if let Some((mass, n)) = match_mass.get(annot.as_str()) {
                *a = (mass / n).clamp(ALPHA_CLAMP, 1.0 - ALPHA_CLAMP);
            }
        }
        for c in 0..k {
            prior[c] = q.iter().map(|qj| qj[c]).sum::<f64>() / items.len() as f64;
        }

        let done = (ll - prev_ll).abs() < CONVERGENCE_TOL;
        prev_ll = ll;
        if done {
            break;
        }
    }
    let _ = prev_ll;
    // Posteriors and likelihood at the final parameter values.
    let (posteriors, final_ll) = posterior_step(&items, &alpha, &prior, k);

    Ok(ReliabilityModel {
        alpha,
        class_prior: prior,
        log_likelihood: prev_ll,
        iterations,
        posteriors: items
            .iter()
            .zip(posteriors)
            .map(|((id, _), q)| (id.clone(), q))
            .collect(),
        converged: true,
    })
}

/// Reliability-weighted vote over one bundle: argmax over classes of the
/// normalized-alpha mass on each class, ties broken toward the lower index.
pub fn weighted_vote(bundle: &AnnotationBundle, model: &ReliabilityModel) -> Result<usize> {
    bundle.validate()?;
    let labels = item_labels(bundle);
    if labels.is_empty() {
        return Err(Error::InvalidParameter {
            name: "bundle",
            reason: "no labels to vote on".into(),
        });
    }
    let mut total = 0.0;
    for (annot, _) in &labels {
        let a = model.alpha.get(annot).ok_or_else(|| {
            Error::Contract(format!("reliability model does not cover annotator `{annot}`"))
        })?;
        total += a;
    }
    let mut scores = vec![0.0f64; bundle.class_count];
    for (annot, t) in &labels {
        scores[*t] += model.alpha[annot] / total;
    }
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ala::bundle::ExpertLabel;

    fn bundle(id: &str, k: usize, labels: &[(&str, usize)]) -> AnnotationBundle {
        AnnotationBundle {
            item_id: id.to_string(),
            class_count: k,
            machine_label: None,
            expert_labels: labels
                .iter()
                .map(|(a, l)| ExpertLabel {
                    annotator_id: a.to_string(),
                    label: *l,
                    valence: None,
                    arousal: None,
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_agreement_drives_alpha_high() {
        let bundles: Vec<AnnotationBundle> = (0..6)
            .map(|i| bundle(&format!("i{i}"), 3, &[("a", i % 3), ("b", i % 3)]))
            .collect();
        let model = em_reliability(&bundles).unwrap();
        let (aa, ab) = (model.alpha["a"], model.alpha["b"]);
        assert!(aa > 0.99 && ab > 0.99, "{aa} {ab}");
        assert!((aa - ab).abs() < 1e-12);
        for q in model.posteriors.values() {
            assert!(q.iter().cloned().fold(0.0, f64::max) >= 0.99);
        }
    }

    #[test]
    fn contrarian_gets_low_alpha() {
        // two annotators agree, one always contradicts, K = 2
        let bundles: Vec<AnnotationBundle> = (0..8)
            .map(|i| {
                let c = i % 2;
                bundle(&format!("i{i}"), 2, &[("a", c), ("b", c), ("c", 1 - c)])
            })
            .collect();
        let model = em_reliability(&bundles).unwrap();
        assert!(model.alpha["c"] < 0.5, "contrarian alpha {}", model.alpha["c"]);
        assert!(model.alpha["a"] > 0.9);
    }

    #[test]
    fn latin_square_posterior_equals_vote_proportions_after_one_estep() {
        // Fully symmetric 3x3 fixture: every annotator picks a different
        // class on every item. With all-equal alpha and a uniform prior the
        // hand-computed E-step posterior is exactly uniform, matching the
        // per-item vote proportions (1/3 each).
        let bundles = vec![
            bundle("i0", 3, &[("a", 0), ("b", 1), ("c", 2)]),
            bundle("i1", 3, &[("a", 1), ("b", 2), ("c", 0)]),
            bundle("i2", 3, &[("a", 2), ("b", 0), ("c", 1)]),
        ];
        let items: Vec<(String, Vec<(String, usize)>)> = bundles
            .iter()
            .map(|b| {
                (
                    b.item_id.clone(),
                    b.expert_labels
                        .iter()
                        .map(|e| (e.annotator_id.clone(), e.label))
                        .collect(),
                )
            })
            .collect();
        let alpha: BTreeMap<String, f64> =
            [("a", 0.7), ("b", 0.7), ("c", 0.7)]
                .into_iter()
                .map(|(a, v)| (a.to_string(), v))
                .collect();
        let (q, _) = posterior_step(&items, &alpha, &[1.0 / 3.0; 3], 3);
        // Hand computation: every class explains exactly one of the three
        // labels, so each factor is alpha * ((1-alpha)/2)^2 regardless of c;
        // the posterior normalizes to 1/3 per class.
        for item_q in &q {
            for &p in item_q {
                assert!((p - 1.0 / 3.0).abs() < 1e-12, "{item_q:?}");
            }
        }
    }

    #[test]
    fn log_likelihood_non_decreasing_and_converges() {
        // run EM manually and track the likelihood trace
        let bundles: Vec<AnnotationBundle> = (0..10)
            .map(|i| {
                let c = i % 3;
                let b_label = if i % 4 == 0 { (c + 1) % 3 } else { c };
                bundle(&format!("i{i}"), 3, &[("a", c), ("b", b_label), ("c", c)])
            })
            .collect();
        let model = em_reliability(&bundles).unwrap();
        assert!(model.converged);
        assert!(model.iterations >= 1);
        assert!(model.log_likelihood.is_finite());
        assert!(model.alpha["b"] < model.alpha["a"]);
        let prior_sum: f64 = model.class_prior.iter().sum();
        assert!((prior_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_annotator_falls_back() {
        let bundles: Vec<AnnotationBundle> = (0..4)
            .map(|i| bundle(&format!("i{i}"), 2, &[("a", i % 2)]))
            .collect();
        let model = em_reliability(&bundles).unwrap();
        assert!(!model.converged);
        assert_eq!(model.alpha["a"], 0.5);
    }

    #[test]
    fn vote_unanimous_ignores_alpha() {
        let b = bundle("x", 4, &[("a", 2), ("b", 2), ("c", 2)]);
        let model = em_reliability(&[
            bundle("i0", 4, &[("a", 0), ("b", 0), ("c", 1)]),
            bundle("i1", 4, &[("a", 1), ("b", 1), ("c", 1)]),
        ])
        .unwrap();
        assert_eq!(weighted_vote(&b, &model).unwrap(), 2);
    }

    #[test]
    fn vote_follows_reliable_annotator() {
        // alpha = {0.9, 0.1, 0.1}, labels {A, B, B} -> A (0.818 > 0.182)
        let b = bundle("x", 2, &[("a", 0), ("b", 1), ("c", 1)]);
        let mut model = em_reliability(&[
            bundle("i0", 2, &[("a", 0), ("b", 0), ("c", 1)]),
            bundle("i1", 2, &[("a", 1), ("b", 1), ("c", 1)]),
        ])
        .unwrap();
        model.alpha.insert("a".into(), 0.9);
        model.alpha.insert("b".into(), 0.1);
        model.alpha.insert("c".into(), 0.1);
        assert_eq!(weighted_vote(&b, &model).unwrap(), 0);
    }

    #[test]
    fn vote_tie_breaks_toward_lower_class() {
        let b = bundle("x", 4, &[("a", 3), ("b", 1), ("c", 3), ("d", 1)]);
        let mut model = em_reliability(&[
            bundle("i0", 4, &[("a", 0), ("b", 0), ("c", 0), ("d", 0)]),
            bundle("i1", 4, &[("a", 1), ("b", 1), ("c", 1), ("d", 1)]),
        ])
        .unwrap();
        for a in model.alpha.values_mut() {
            *a = 0.6;
        }
        assert_eq!(weighted_vote(&b, &model).unwrap(), 1);
    }

    #[test]
    fn uniform_alpha_vote_equals_majority() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let model = {
            let mut m = em_reliability(&[
                bundle("i0", 3, &[("a", 0), ("b", 0), ("c", 0), ("d", 0), ("e", 0)]),
                bundle("i1", 3, &[("a", 1), ("b", 1), ("c", 1), ("d", 1), ("e", 1)]),
            ])
            .unwrap();
            for a in m.alpha.values_mut() {
                *a = 0.7;
            }
            m
        };
        for trial in 0..200 {
            let labels: Vec<(&str, usize)> = ["a", "b", "c", "d", "e"]
                .iter()
                .map(|&a| (a, rng.gen_range(0..3)))
                .collect();
            let b = bundle(&format!("t{trial}"), 3, &labels);
            let vote = weighted_vote(&b, &model).unwrap();
            let mut counts = [0usize; 3];
            for (_, l) in &labels {
                counts[*l] += 1;
            }
            let majority = (0..3).max_by_key(|&c| (counts[c], 3 - c)).unwrap();
            assert_eq!(vote, majority, "labels {labels:?}");
        }
    }

    #[test]
    fn annotator_order_does_not_change_outputs() {
        let fwd = vec![
            bundle("i0", 3, &[("a", 0), ("b", 1), ("c", 0)]),
            bundle("i1", 3, &[("a", 2), ("b", 2), ("c", 1)]),
            bundle("i2", 3, &[("a", 1), ("b", 1), ("c", 1)]),
        ];
        let rev: Vec<AnnotationBundle> = fwd
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.expert_labels.reverse();
                b
            })
            .collect();
        let m1 = em_reliability(&fwd).unwrap();
        let m2 = em_reliability(&rev).unwrap();
        assert_eq!(m1.alpha, m2.alpha);
        assert_eq!(m1.posteriors, m2.posteriors);
        for (a, b) in fwd.iter().zip(&rev) {
            assert_eq!(
                weighted_vote(a, &m1).unwrap(),
                weighted_vote(b, &m2).unwrap()
            );
        }
    }
}
