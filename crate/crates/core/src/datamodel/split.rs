//! Deterministic, stratified k-fold splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::sample::MultimodalSample;
use crate::datamodel::synth::CLASS_COUNT;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub fold_count: usize,
    /// Whether per-class stratification was possible.
    pub stratified: bool,
    assignments: BTreeMap<String, usize>,
}

impl DatasetSplit {
    pub fn fold_of(&self, sample_id: &str) -> Option<usize> {
        self.assignments.get(sample_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.fold_count];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Indices into `samples` held out as the test partition of `fold`.
    pub fn test_indices(&self, samples: &[MultimodalSample], fold: usize) -> Vec<usize> {
        samples
            .iter()
            .enumerate()
            .filter(|(_, s)| self.fold_of(&s.sample_id) == Some(fold))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, samples: &[MultimodalSample], fold: usize) -> Vec<usize> {
        samples
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let f = self.fold_of(&s.sample_id);
                f.is_some() && f != Some(fold)
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Split `samples` into `k` folds, stratifying by the fine ER label when
/// every class present has at least `k` members. Deterministic in `seed`;
/// global fold sizes never differ by more than one.
pub fn kfold_split(samples: &[MultimodalSample], k: usize, seed: u64) -> Result<DatasetSplit> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("need at least 2 folds, got {k}"),
        });
    }
    if samples.len() < k {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("{k} folds requested for {} samples", samples.len()),
        });
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); CLASS_COUNT];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.labels.er_fine.index()].push(i);
    }
    let stratified = by_class.iter().all(|c| c.is_empty() || c.len() >= k);
    let groups: Vec<Vec<usize>> = if stratified {
        by_class.into_iter().filter(|c| !c.is_empty()).collect()
    } else {
        eprintln!(
            "warning: some class has fewer than {k} members; falling back to unstratified split"
        );
        vec![(0..samples.len()).collect()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut loads = vec![0usize; k];
    let mut assignments = BTreeMap::new();
    for mut group in groups {
        group.shuffle(&mut rng);
        // Deal the group to folds ordered by current load (ties by index),
        // which keeps both per-class and global imbalance at <= 1.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&f| (loads[f], f));
        for (j, idx) in group.into_iter().enumerate() {
            let fold = order[j % k];
            loads[fold] += 1;
            assignments.insert(samples[idx].sample_id.clone(), fold);
        }
    }

    Ok(DatasetSplit {
        fold_count: k,
        stratified,
        assignments,
    })
}
