//! Mini-batch training loop with cosine-decayed SGD, per-epoch logging, and
//! the fresh-probe discriminator used to measure decoupling quality.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::sample::MultimodalSample;
use crate::diffkernel::graph::{Graph, Var};
use crate::diffkernel::optim::Sgd;
use crate::diffkernel::tensor::Tensor;
use crate::emert::batch::{head_targets, BatchInput, HeadTargets};
use crate::emert::config::TaskMode;
use crate::emert::model::EmertModel;
use crate::error::{Error, Result};
use crate::metrics::classification::ConfusionMatrix;
use crate::metrics::{classification_metrics, regression_metrics};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Seed for batch shuffling and (optional) train-time noise.
    pub seed: u64,
    /// Gaussian noise variance added to training inputs (0 = off).
    pub train_noise_variance: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 60,
            learning_rate: 1e-4,
            momentum: 0.9,
            seed: 0,
            train_noise_variance: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_adv: Option<f64>,
    pub loss_er: Option<f64>,
    pub loss_fer: Option<f64>,
    /// Adversarial discriminator accuracy on the generic features.
    pub disc_acc_fc: Option<f64>,
    /// Adversarial discriminator accuracy on the unique features.
    pub disc_acc_fp: Option<f64>,
    /// (name, value) pairs from the validation set, when one was given.
    pub val: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    (0..t.rows())
        .map(|i| {
            let row = t.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Clamp raw regression outputs to the legal label range (evaluation only;
/// losses always see the raw outputs).
pub fn clamp_regression(task: TaskMode, out: &mut Tensor) {
    let (lo, hi) = match task {
        TaskMode::RegressVa => (-1.0, 1.0),
        TaskMode::RegressIntensity => (0.0, 3.0),
        _ => return,
    };
    for v in out.data_mut() {
        *v = v.clamp(lo, hi);
    }
}

/// Small fixed evaluation for training logs: WAR for classification heads,
/// MAE for regression heads.
pub fn quick_eval(model: &EmertModel, samples: &[MultimodalSample]) -> Result<Vec<(String, f64)>> {
    let refs: Vec<&MultimodalSample> = samples.iter().collect();
    let (er_out, fer_out) = model.predict(&refs)?;
    let mut out = Vec::new();
    let mut record =
        |name: &str, task: TaskMode, raw: Option<Tensor>, er_view: bool| -> Result<()> {
            let Some(mut raw) = raw else { return Ok(()) };
            match head_targets(&refs, task, er_view)? {
                HeadTargets::Classes(truth) => {
                    let pred = argmax_rows(&raw);
                    let cm = ConfusionMatrix::from_pairs(&truth, &pred, task.output_dim())?;
                    out.push((format!("{name}_war"), classification_metrics(&cm)?.war));
                }
                HeadTargets::Values(truth) => {
                    clamp_regression(task, &mut raw);
                    let m = regression_metrics(raw.data(), truth.data())?;
                    out.push((format!("{name}_mae"), m.mae));
                }
            }
            Ok(())
        };
    record("er", model.config().er_task, er_out, true)?;
    record("fer", model.config().fer_task, fer_out, false)?;
    Ok(out)
}

fn disc_accuracy(g: &Graph, logits: Var, batch: usize) -> f64 {
    let values = g.value(logits);
    let pred = argmax_rows(&values);
    let mut hits = 0usize;
    for (i, &p) in pred.iter().enumerate() {
        if p == i / batch {
            hits += 1;
        }
    }
    hits as f64 / pred.len() as f64
}

/// Train in place. Deterministic for a fixed seed in single-threaded mode.
pub fn train(
    model: &mut EmertModel,
    data: &[MultimodalSample],
    settings: &TrainSettings,
    val: Option<&[MultimodalSample]>,
) -> Result<TrainLog> {
    if data.is_empty() {
        return Err(Error::InvalidParameter {
            name: "data",
            reason: "empty training set".into(),
        });
    }
    let cfg = model.config().clone();
    let batch_size = cfg.batch_size.min(data.len());
    let batches_per_epoch = data.len().div_ceil(batch_size);
    let total_steps = settings.epochs.max(1) * batches_per_epoch;
    let mut opt = Sgd::new(
        settings.learning_rate,
        settings.momentum,
        total_steps,
        model.params(),
    )?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(settings.seed);
    shuffle_rng.set_stream(3);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(settings.seed);
    noise_rng.set_stream(4);

    let mut log = TrainLog::default();
    let mut indices: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..settings.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut sums = (0.0f64, 0.0f64, 0.0f64, 0.0f64); // total, adv, er, fer
        let mut counts = (0usize, 0usize, 0usize);
        let mut disc_fc = (0.0f64, 0usize);
        let mut disc_fp = (0.0f64, 0usize);

        for chunk in indices.chunks(batch_size) {
            let refs: Vec<&MultimodalSample> = chunk.iter().map(|&i| &data[i]).collect();
            let batch = if settings.train_noise_variance > 0.0 {
                BatchInput::from_samples_noisy(
                    &refs,
                    &cfg,
                    settings.train_noise_variance,
                    &mut noise_rng,
                )?
            } else {
                BatchInput::from_samples(&refs, &cfg)?
            };
            let er_t = cfg
                .er_head
                .then(|| head_targets(&refs, cfg.er_task, true))
                .transpose()?;
            let fer_t = cfg
                .fer_head
                .then(|| head_targets(&refs, cfg.fer_task, false))
                .transpose()?;

            let g = Graph::new();
            let bound = model.params().bind(&g);
            let fwd = model.forward(&g, &bound, &batch)?;
            let losses = model.losses(&g, &fwd, &batch, &refs, er_t.as_ref(), fer_t.as_ref())?;

            let total = g.value(losses.total).data()[0];
            if !total.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss {total} at epoch {epoch}; offending batch: {:?}",
                    batch.sample_ids
                )));
            }
            sums.0 += total;
            if let Some(adv) = losses.adv {
                sums.1 += g.value(adv).data()[0];
                counts.0 += 1;
            }
            if let Some(er) = losses.er {
                sums.2 += g.value(er).data()[0];
                counts.1 += 1;
            }
            if let Some(fer) = losses.fer {
                sums.3 += g.value(fer).data()[0];
                counts.2 += 1;
            }
            if let (Some(lc), Some(lp)) = (fwd.disc_logits_fc, fwd.disc_logits_fp) {
                disc_fc.0 += disc_accuracy(&g, lc, batch.batch);
                disc_fc.1 += 1;
                disc_fp.0 += disc_accuracy(&g, lp, batch.batch);
                disc_fp.1 += 1;
            }

            g.backward(losses.total)?;
            let grads: Vec<Tensor> = bound.iter().map(|&v| g.grad(v)).collect();
            opt.step(model.params_mut(), grads)?;
        }

        let nb = batches_per_epoch as f64;
        let val_metrics = match val {
            Some(vs) if !vs.is_empty() => quick_eval(model, vs)?,
            _ => Vec::new(),
        };
        log.epochs.push(EpochLog {
            epoch,
            loss_total: sums.0 / nb,
            loss_adv: (counts.0 > 0).then(|| sums.1 / counts.0 as f64),
            loss_er: (counts.1 > 0).then(|| sums.2 / counts.1 as f64),
            loss_fer: (counts.2 > 0).then(|| sums.3 / counts.2 as f64),
            disc_acc_fc: (disc_fc.1 > 0).then(|| disc_fc.0 / disc_fc.1 as f64),
            disc_acc_fp: (disc_fp.1 > 0).then(|| disc_fp.0 / disc_fp.1 as f64),
            val: val_metrics,
        });

        if !model.params().all_finite() {
            return Err(Error::Numeric(format!(
                "non-finite parameter detected after epoch {epoch}"
            )));
        }
    }
    Ok(log)
}

/// Train a fresh 2-layer probe classifier on fixed feature vectors and
/// report its accuracy on a held-out quarter. Measures how much class
/// signal (e.g. modality identity) the features still carry.
pub fn probe_accuracy(features: &Tensor, targets: &[usize], seed: u64) -> Result<f64> {
    let n = features.rows();
    if n != targets.len() || n < 8 {
        return Err(Error::InvalidParameter {
            name: "features",
            reason: format!("need >= 8 labeled rows, got {n}"),
        });
    }
    let classes = targets.iter().max().unwrap() + 1;
    let width = features.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(5);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let split = n - n / 4;
    let gather = |idx: &[usize]| -> (Tensor, Vec<usize>) {
        let mut data = Vec::with_capacity(idx.len() * width);
        let mut t = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(features.row(i));
            t.push(targets[i]);
        }
        (
            Tensor::new(vec![idx.len(), width], data).expect("finite features"),
            t,
        )
    };
    let (train_x, train_y) = gather(&order[..split]);
    let (test_x, test_y) = gather(&order[split..]);

    let limit1 = (6.0 / (width + width) as f64).sqrt();
    let limit2 = (6.0 / (width + classes) as f64).sqrt();
    let mut w1 = Tensor::rand_uniform(&[width, width], limit1, &mut rng);
    let mut b1 = Tensor::zeros(&[width]);
    let mut w2 = Tensor::rand_uniform(&[width, classes], limit2, &mut rng);
    let mut b2 = Tensor::zeros(&[classes]);

    let epochs = 200;
    let mut velocity = [
        Tensor::zeros(w1.shape()),
        Tensor::zeros(b1.shape()),
        Tensor::zeros(w2.shape()),
        Tensor::zeros(b2.shape()),
    ];
    for step in 0..epochs {
        let g = Graph::new();
        let vars = [
            g.param(w1.clone()),
            g.param(b1.clone()),
            g.param(w2.clone()),
            g.param(b2.clone()),
        ];
        let x = g.constant(train_x.clone());
        let h = g.matmul(x, vars[0])?;
        let h = g.add_row(h, vars[1])?;
        let h = g.relu(h);
        let o = g.matmul(h, vars[2])?;
        let o = g.add_row(o, vars[3])?;
        let loss = g.cross_entropy_logits(o, &train_y)?;
        g.backward(loss)?;
        let lr = 0.1 * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / epochs as f64).cos());
        for (i, target) in [&mut w1, &mut b1, &mut w2, &mut b2].into_iter().enumerate() {
            let grad = g.grad(vars[i]);
            for (v, gv) in velocity[i].data_mut().iter_mut().zip(grad.data()) {
                *v = 0.9 * *v + gv;
            }
            target.add_scaled(&velocity[i], -lr)?;
        }
    }

    let g = Graph::new();
    let x = g.constant(test_x);
    let vars = [
        g.constant(w1),
        g.constant(b1),
        g.constant(w2),
        g.constant(b2),
    ];
    let h = g.matmul(x, vars[0])?;
    let h = g.add_row(h, vars[1])?;
    let h = g.relu(h);
    let o = g.matmul(h, vars[2])?;
    let o = g.add_row(o, vars[3])?;
    let pred = argmax_rows(&g.value(o));
    let hits = pred.iter().zip(&test_y).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / test_y.len() as f64)
}
