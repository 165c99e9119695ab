//! The EMERT model: per-modality encoders, modality-adversarial feature
//! decoupling through a gradient-reversal layer, emotion-sensitive
//! cross-attention fusion (generic features as queries, unique features as
//! keys/values), and dual prediction heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::sample::MultimodalSample;
use crate::diffkernel::graph::{Graph, Var};
use crate::diffkernel::optim::{ParamId, ParamStore};
use crate::diffkernel::tensor::Tensor;
use crate::emert::batch::{BatchInput, HeadTargets};
use crate::emert::config::{ModelConfig, TaskMode};
use crate::error::{Error, Result};

/// Target scheme for the adversarial discriminator. The default follows the
/// prose (a 3-way modality classifier); the emotion-label variant pairs the
/// generic features with the displayed label and the unique features with
/// the felt label, for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvTargetMode {
    #[default]
    Modality,
    EmotionLabel,
}

#[derive(Debug, Clone, Copy)]
struct MlpIds {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct RnnIds {
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct LayerIds {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    ff_w1: ParamId,
    ff_b1: ParamId,
    ff_w2: ParamId,
    ff_b2: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

#[derive(Debug, Clone)]
struct Ids {
    face_proj_w: ParamId,
    face_proj_b: ParamId,
    face_conv_w: ParamId,
    face_conv_b: ParamId,
    eye: RnnIds,
    gaze: RnnIds,
    mlp_c: Option<MlpIds>,
    mlp_unique: Option<[MlpIds; 3]>,
    disc: Option<MlpIds>,
    layers: Vec<LayerIds>,
    head_er: MlpIds,
    head_fer: MlpIds,
}

pub struct EmertModel {
    cfg: ModelConfig,
    adv_targets: AdvTargetMode,
    seed: u64,
    params: ParamStore,
    ids: Ids,
}

/// Everything the forward pass exposes for losses, metrics, and probes.
pub struct ForwardPass {
    pub batch: usize,
    /// Temporally pooled per-modality features, each [B, S].
    pub pooled: [Var; 3],
    /// Emotion-generic features, modality-major [3B, S].
    pub f_c: Option<Var>,
    /// Emotion-unique features, modality-major [3B, S].
    pub f_p: Option<Var>,
    /// Discriminator logits on the gradient-reversed generic features.
    pub disc_logits_fc: Option<Var>,
    /// Discriminator logits on the unique features (standard direction).
    pub disc_logits_fp: Option<Var>,
    /// Fused representation, [B, S].
    pub x_fu: Var,
    pub er_out: Option<Var>,
    pub fer_out: Option<Var>,
}

pub struct LossVars {
    pub adv: Option<Var>,
    pub er: Option<Var>,
    pub fer: Option<Var>,
    pub total: Var,
}

/// Decoupled features extracted for probing, with modality identities.
pub struct FeatureSet {
    pub f_c: Tensor,
    pub f_p: Tensor,
    pub modality: Vec<usize>,
}

fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::rand_uniform(&[rows, cols], limit, rng)
}

impl EmertModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        Self::with_adv_targets(cfg, seed, AdvTargetMode::default())
    }

    pub fn with_adv_targets(
        cfg: ModelConfig,
        seed: u64,
        adv_targets: AdvTargetMode,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.er_task == TaskMode::RegressIntensity {
            return Err(Error::Config(
                "intensity regression is only defined for the FER head".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let s = cfg.feature_width;

        let mut mat = |params: &mut ParamStore, name: String, rows, cols, rng: &mut ChaCha8Rng| {
            params.register(name, xavier(rng, rows, cols))
        };
        let mut mlp = |params: &mut ParamStore,
                       prefix: &str,
                       d_in: usize,
                       d_hidden: usize,
                       d_out: usize,
                       rng: &mut ChaCha8Rng| MlpIds {
            w1: params.register(format!("{prefix}.w1"), xavier(rng, d_in, d_hidden)),
            b1: params.register(format!("{prefix}.b1"), Tensor::zeros(&[d_hidden])),
            w2: params.register(format!("{prefix}.w2"), xavier(rng, d_hidden, d_out)),
            b2: params.register(format!("{prefix}.b2"), Tensor::zeros(&[d_out])),
        };

        let face_proj_w = mat(&mut params, "face.proj.w".into(), cfg.face_dim, s, &mut rng);
        let face_proj_b = params.register("face.proj.b", Tensor::zeros(&[s]));
        let face_conv_w = mat(&mut params, "face.conv.w".into(), 3 * s, s, &mut rng);
        let face_conv_b = params.register("face.conv.b", Tensor::zeros(&[s]));
        let mut rnn = |params: &mut ParamStore, prefix: &str, d_in: usize, rng: &mut ChaCha8Rng| RnnIds {
            wx: params.register(format!("{prefix}.wx"), xavier(rng, d_in, s)),
            wh: params.register(format!("{prefix}.wh"), xavier(rng, s, s)),
            b: params.register(format!("{prefix}.b"), Tensor::zeros(&[s])),
        };
        let eye = rnn(&mut params, "eye.rnn", cfg.eye_dim, &mut rng);
        let gaze = rnn(&mut params, "gaze.rnn", cfg.gaze_dim, &mut rng);

        let (mlp_c, mlp_unique) = if cfg.uses_decoupling() {
            let c = mlp(&mut params, "mlp_c", s, s, s, &mut rng);
            let v = mlp(&mut params, "mlp_v", s, s, s, &mut rng);
            let e = mlp(&mut params, "mlp_e", s, s, s, &mut rng);
            let g = mlp(&mut params, "mlp_g", s, s, s, &mut rng);
            (Some(c), Some([v, e, g]))
        } else {
            (None, None)
        };
        let disc = cfg.mafd.then(|| {
            let out = match adv_targets {
                AdvTargetMode::Modality => 3,
                AdvTargetMode::EmotionLabel => 7,
            };
            mlp(&mut params, "disc", s, s, out, &mut rng)
        });

        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let p = |suffix: &str| format!("fuse.{l}.{suffix}");
            layers.push(LayerIds {
                wq: mat(&mut params, p("wq"), s, s, &mut rng),
                bq: params.register(p("bq"), Tensor::zeros(&[s])),
                wk: mat(&mut params, p("wk"), s, s, &mut rng),
                bk: params.register(p("bk"), Tensor::zeros(&[s])),
                wv: mat(&mut params, p("wv"), s, s, &mut rng),
                bv: params.register(p("bv"), Tensor::zeros(&[s])),
                wo: mat(&mut params, p("wo"), s, s, &mut rng),
                bo: params.register(p("bo"), Tensor::zeros(&[s])),
                ln1_g: params.register(p("ln1.gamma"), Tensor::filled(&[s], 1.0)),
                ln1_b: params.register(p("ln1.beta"), Tensor::zeros(&[s])),
                ff_w1: mat(&mut params, p("ff.w1"), s, cfg.ff_width, &mut rng),
                ff_b1: params.register(p("ff.b1"), Tensor::zeros(&[cfg.ff_width])),
                ff_w2: mat(&mut params, p("ff.w2"), cfg.ff_width, s, &mut rng),
                ff_b2: params.register(p("ff.b2"), Tensor::zeros(&[s])),
                ln2_g: params.register(p("ln2.gamma"), Tensor::filled(&[s], 1.0)),
                ln2_b: params.register(p("ln2.beta"), Tensor::zeros(&[s])),
            });
        }

        // Heads stay registered even when disabled so the single-task
        // ablation can assert exactly-zero gradients and untouched values.
        let head_er = mlp(&mut params, "head_er", s, s, cfg.er_task.output_dim(), &mut rng);
        let head_fer = mlp(
            &mut params,
            "head_fer",
            s,
            s,
            cfg.fer_task.output_dim(),
            &mut rng,
        );

        Ok(Self {
            cfg,
            adv_targets,
            seed,
            params,
            ids: Ids {
                face_proj_w,
                face_proj_b,
                face_conv_w,
                face_conv_b,
                eye,
                gaze,
                mlp_c,
                mlp_unique,
                disc,
                layers,
                head_er,
                head_fer,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|(n, _)| n.to_string()).collect()
    }

    fn linear(&self, g: &Graph, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }

    fn mlp2(&self, g: &Graph, bound: &[Var], x: Var, ids: &MlpIds) -> Result<Var> {
        let h = self.linear(g, x, bound[ids.w1.0], bound[ids.b1.0])?;
        let h = g.relu(h);
        self.linear(g, h, bound[ids.w2.0], bound[ids.b2.0])
    }

    /// Face encoder: per-frame projection then a width-3 temporal
    /// convolution, both tanh. Returns one [B, S] var per frame.
    fn encode_face(&self, g: &Graph, bound: &[Var], x: Var, b: usize) -> Result<Vec<Var>> {
        let s = self.cfg.feature_width;
        let proj = self.linear(g, x, bound[self.ids.face_proj_w.0], bound[self.ids.face_proj_b.0])?;
        let proj = g.tanh(proj);
        let t_len = self.cfg.t_face;
        let frame = |t: usize| g.slice_rows(proj, t * b, b);
        let zero = g.constant(Tensor::zeros(&[b, s]));
        let mut out = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let prev = if t == 0 { zero } else { frame(t - 1)? };
            let cur = frame(t)?;
            let next = if t + 1 == t_len { zero } else { frame(t + 1)? };
            let cat = g.concat_cols(&[prev, cur, next])?;
            let h = self.linear(g, cat, bound[self.ids.face_conv_w.0], bound[self.ids.face_conv_b.0])?;
            out.push(g.tanh(h));
        }
        Ok(out)
    }

    /// Elman recurrence over a time-major sequence: one [B, S] var per step.
    fn encode_rnn(
        &self,
        g: &Graph,
        bound: &[Var],
        ids: &RnnIds,
        x: Var,
        t_len: usize,
        b: usize,
    ) -> Result<Vec<Var>> {
        let s = self.cfg.feature_width;
        let mut h = g.constant(Tensor::zeros(&[b, s]));
        let mut out = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let x_t = g.slice_rows(x, t * b, b)?;
            let from_input = g.matmul(x_t, bound[ids.wx.0])?;
            let from_state = g.matmul(h, bound[ids.wh.0])?;
            let pre = g.add(from_input, from_state)?;
            let pre = g.add_row(pre, bound[ids.b.0])?;
            h = g.tanh(pre);
            out.push(h);
        }
        Ok(out)
    }

    fn temporal_mean(&self, g: &Graph, steps: &[Var]) -> Result<Var> {
        let mut acc = steps[0];
        for &s in &steps[1..] {
            acc = g.add(acc, s)?;
        }
        Ok(g.scale(acc, 1.0 / steps.len() as f64))
    }

    /// Per-modality encoder outputs pooled over time, each [B, S]. Masked
    /// modalities become zero constants with no path into their encoder.
    fn encode_pooled(&self, g: &Graph, bound: &[Var], batch: &BatchInput) -> Result<[Var; 3]> {
        let b = batch.batch;
        let s = self.cfg.feature_width;
        let zeros = || g.constant(Tensor::zeros(&[b, s]));
        let face = if self.cfg.modality_mask.face {
            let x = g.constant(batch.face.clone());
            let steps = self.encode_face(g, bound, x, b)?;
            self.temporal_mean(g, &steps)?
        } else {
            zeros()
        };
        let eye = if self.cfg.modality_mask.eye {
            let x = g.constant(batch.eye.clone());
            let steps = self.encode_rnn(g, bound, &self.ids.eye, x, self.cfg.t_eye, b)?;
            self.temporal_mean(g, &steps)?
        } else {
            zeros()
        };
        let gaze = if self.cfg.modality_mask.gaze {
            let x = g.constant(batch.gaze.clone());
            let steps = self.encode_rnn(g, bound, &self.ids.gaze, x, self.cfg.t_gaze, b)?;
            self.temporal_mean(g, &steps)?
        } else {
            zeros()
        };
        Ok([face, eye, gaze])
    }

    /// Full per-sample encoder sequences (H_v, H_e, H_g); the temporal mean
    /// of these rows is exactly what the batched path pools.
    pub fn encode_sample(&self, sample: &MultimodalSample) -> Result<(Tensor, Tensor, Tensor)> {
        let g = Graph::new();
        let bound = self.params.bind(&g);
        let batch = BatchInput::from_samples(&[sample], &self.cfg)?;
        let face_x = g.constant(batch.face.clone());
        let eye_x = g.constant(batch.eye.clone());
        let gaze_x = g.constant(batch.gaze.clone());
        let face = self.encode_face(&g, &bound, face_x, 1)?;
        let eye = self.encode_rnn(&g, &bound, &self.ids.eye, eye_x, self.cfg.t_eye, 1)?;
        let gaze = self.encode_rnn(&g, &bound, &self.ids.gaze, gaze_x, self.cfg.t_gaze, 1)?;
        let h_v = g.concat_rows(&face)?;
        let h_e = g.concat_rows(&eye)?;
        let h_g = g.concat_rows(&gaze)?;
        Ok((g.value(h_v), g.value(h_e), g.value(h_g)))
    }

    /// Sample-major gather index: token `j` of sample `s` sits at row
    /// `j*B + s` of a modality-major stack.
    fn sample_major_idx(b: usize, tokens: usize) -> Vec<usize> {
        let mut idx = Vec::with_capacity(b * tokens);
        for s in 0..b {
            for j in 0..tokens {
                idx.push(j * b + s);
            }
        }
        idx
    }

    fn fuse_layer(
        &self,
        g: &Graph,
        bound: &[Var],
        l: &LayerIds,
        q_tokens: Var,
        kv_tokens: Var,
        b: usize,
        nq: usize,
        nkv: usize,
    ) -> Result<Var> {
        let q = self.linear(g, q_tokens, bound[l.wq.0], bound[l.bq.0])?;
        let k = self.linear(g, kv_tokens, bound[l.wk.0], bound[l.bk.0])?;
        let v = self.linear(g, kv_tokens, bound[l.wv.0], bound[l.bv.0])?;
        let mut per_sample = Vec::with_capacity(b);
        for s in 0..b {
            let qs = g.slice_rows(q, s * nq, nq)?;
            let ks = g.slice_rows(k, s * nkv, nkv)?;
            let vs = g.slice_rows(v, s * nkv, nkv)?;
            per_sample.push(multi_head_attention(g, qs, ks, vs, self.cfg.heads)?);
        }
        let attn = g.concat_rows(&per_sample)?;
        let attn = self.linear(g, attn, bound[l.wo.0], bound[l.bo.0])?;
        let x = g.add(q_tokens, attn)?;
        let x = g.layer_norm(x, bound[l.ln1_g.0], bound[l.ln1_b.0], self.cfg.layer_norm_eps)?;
        let ff = self.linear(g, x, bound[l.ff_w1.0], bound[l.ff_b1.0])?;
        let ff = g.relu(ff);
        let ff = self.linear(g, ff, bound[l.ff_w2.0], bound[l.ff_b2.0])?;
        let y = g.add(x, ff)?;
        g.layer_norm(y, bound[l.ln2_g.0], bound[l.ln2_b.0], self.cfg.layer_norm_eps)
    }

    /// Forward pass with the configured gradient-reversal strength.
    pub fn forward(&self, g: &Graph, bound: &[Var], batch: &BatchInput) -> Result<ForwardPass> {
        self.forward_with_grl(g, bound, batch, Some(self.cfg.grl_lambda))
    }

    /// Forward pass with an explicit reversal override; `None` wires the
    /// generic features straight into the discriminator (diagnostic use:
    /// comparing gradients with and without the reversal).
    pub fn forward_with_grl(
        &self,
        g: &Graph,
        bound: &[Var],
        batch: &BatchInput,
        grl: Option<f64>,
    ) -> Result<ForwardPass> {
        let b = batch.batch;
        let pooled = self.encode_pooled(g, bound, batch)?;

        let (f_c, f_p) = if self.cfg.uses_decoupling() {
            let all = g.concat_rows(&pooled)?;
            let c = self.mlp2(g, bound, all, self.ids.mlp_c.as_ref().unwrap())?;
            let unique = self.ids.mlp_unique.as_ref().unwrap();
            let mut parts = Vec::with_capacity(3);
            for (m, pool) in pooled.iter().enumerate() {
                parts.push(self.mlp2(g, bound, *pool, &unique[m])?);
            }
            let p = g.concat_rows(&parts)?;
            (Some(c), Some(p))
        } else {
            (None, None)
        };

        let (disc_logits_fc, disc_logits_fp) = if let Some(disc) = &self.ids.disc {
            let fc = f_c.unwrap();
            let fp = f_p.unwrap();
            let fc_in = match grl {
                Some(lambda) => g.grad_reverse(fc, lambda)?,
                None => fc,
            };
            let lc = self.mlp2(g, bound, fc_in, disc)?;
            let lp = self.mlp2(g, bound, fp, disc)?;
            (Some(lc), Some(lp))
        } else {
            (None, None)
        };

        // Fusion tokens, sample-major.
        let (q_tokens, kv_tokens, nq, nkv, self_attn) = if self.cfg.emt {
            let idx = Self::sample_major_idx(b, 3);
            let q = g.gather_rows(f_c.unwrap(), &idx)?;
            let kv = g.gather_rows(f_p.unwrap(), &idx)?;
            (q, kv, 3, 3, false)
        } else if self.cfg.uses_decoupling() {
            // adversarial decoupling without the cross-attention design:
            // plain self-attention over all six decoupled tokens
            let both = g.concat_rows(&[f_c.unwrap(), f_p.unwrap()])?;
            let idx = Self::sample_major_idx(b, 6);
            let t = g.gather_rows(both, &idx)?;
            (t, t, 6, 6, true)
        } else {
            // baseline: encoder outputs straight into the transformer
            let all = g.concat_rows(&pooled)?;
            let idx = Self::sample_major_idx(b, 3);
            let t = g.gather_rows(all, &idx)?;
            (t, t, 3, 3, true)
        };

        let mut q_tokens = q_tokens;
        for l in &self.ids.layers {
            let kv = if self_attn { q_tokens } else { kv_tokens };
            q_tokens = self.fuse_layer(g, bound, l, q_tokens, kv, b, nq, nkv)?;
        }
        let x_fu = g.avg_pool_rows(q_tokens, nq)?;

        let er_out = if self.cfg.er_head {
            Some(self.mlp2(g, bound, x_fu, &self.ids.head_er)?)
        } else {
            None
        };
        let fer_out = if self.cfg.fer_head {
            Some(self.mlp2(g, bound, x_fu, &self.ids.head_fer)?)
        } else {
            None
        };

        Ok(ForwardPass {
            batch: b,
            pooled,
            f_c,
            f_p,
            disc_logits_fc,
            disc_logits_fp,
            x_fu,
            er_out,
            fer_out,
        })
    }

    /// Adversarial targets for the discriminator rows of one feature stack.
    fn adv_targets_for(&self, batch: &BatchInput, samples: Option<&[&MultimodalSample]>, generic: bool) -> Vec<usize> {
        match self.adv_targets {
            AdvTargetMode::Modality => {
                let b = batch.batch;
                let mut t = Vec::with_capacity(3 * b);
                for m in 0..3 {
                    t.extend(std::iter::repeat(m).take(b));
                }
                t
            }
            AdvTargetMode::EmotionLabel => {
                let samples = samples.expect("emotion-label targets need samples");
                let mut t = Vec::with_capacity(3 * samples.len());
                for _ in 0..3 {
                    for s in samples {
                        t.push(if generic {
                            s.labels.fer_fine.index()
                        } else {
                            s.labels.er_fine.index()
                        });
                    }
                }
                t
            }
        }
    }

    /// Mean discriminator cross-entropy over both feature stacks: the
    /// generic rows reach the shared extractor through the reversal layer,
    /// the unique rows train the discriminator in the standard direction.
    pub fn adversarial_loss(
        &self,
        g: &Graph,
        fwd: &ForwardPass,
        batch: &BatchInput,
        samples: Option<&[&MultimodalSample]>,
    ) -> Result<Option<Var>> {
        let (Some(lc), Some(lp)) = (fwd.disc_logits_fc, fwd.disc_logits_fp) else {
            return Ok(None);
        };
        let t_c = self.adv_targets_for(batch, samples, true);
        let t_p = self.adv_targets_for(batch, samples, false);
        let ce_c = g.cross_entropy_logits(lc, &t_c)?;
        let ce_p = g.cross_entropy_logits(lp, &t_p)?;
        let sum = g.add(ce_c, ce_p)?;
        Ok(Some(g.scale(sum, 0.5)))
    }

    fn head_loss(
        &self,
        g: &Graph,
        out: Var,
        targets: &HeadTargets,
        delta: f64,
    ) -> Result<Var> {
        match targets {
            HeadTargets::Classes(classes) => g.cross_entropy_logits(out, classes),
            HeadTargets::Values(values) => g.huber_to_const(out, values.clone(), delta),
        }
    }

    /// Assemble every configured loss term and the overall objective.
    pub fn losses(
        &self,
        g: &Graph,
        fwd: &ForwardPass,
        batch: &BatchInput,
        samples: &[&MultimodalSample],
        er_targets: Option<&HeadTargets>,
        fer_targets: Option<&HeadTargets>,
    ) -> Result<LossVars> {
        let adv = self.adversarial_loss(g, fwd, batch, Some(samples))?;
        let er = match (fwd.er_out, er_targets) {
            (Some(out), Some(t)) => Some(self.head_loss(g, out, t, self.cfg.huber_delta)?),
            _ => None,
        };
        let fer = match (fwd.fer_out, fer_targets) {
            (Some(out), Some(t)) => Some(self.head_loss(g, out, t, self.cfg.huber_delta)?),
            _ => None,
        };
        let total = total_loss(g, adv, er, fer, self.cfg.alpha_adv, self.cfg.beta_task)?;
        Ok(LossVars {
            adv,
            er,
            fer,
            total,
        })
    }

    /// Raw head outputs for a sample set (single inference batch).
    pub fn predict_batch(&self, batch: &BatchInput) -> Result<(Option<Tensor>, Option<Tensor>)> {
        let g = Graph::new();
        let bound = self.params.bind(&g);
        let fwd = self.forward(&g, &bound, batch)?;
        Ok((
            fwd.er_out.map(|v| g.value(v)),
            fwd.fer_out.map(|v| g.value(v)),
        ))
    }

    pub fn predict(
        &self,
        samples: &[&MultimodalSample],
    ) -> Result<(Option<Tensor>, Option<Tensor>)> {
        let batch = BatchInput::from_samples(samples, &self.cfg)?;
        self.predict_batch(&batch)
    }

    /// Decoupled features over a sample set, for probe training.
    pub fn extract_features(&self, samples: &[&MultimodalSample]) -> Result<FeatureSet> {
        if !self.cfg.uses_decoupling() {
            return Err(Error::Config(
                "feature extraction requires the decoupling pathway".into(),
            ));
        }
        let batch = BatchInput::from_samples(samples, &self.cfg)?;
        let g = Graph::new();
        let bound = self.params.bind(&g);
        let fwd = self.forward(&g, &bound, &batch)?;
        let b = batch.batch;
        let mut modality = Vec::with_capacity(3 * b);
        for m in 0..3 {
            modality.extend(std::iter::repeat(m).take(b));
        }
        Ok(FeatureSet {
            f_c: g.value(fwd.f_c.unwrap()),
            f_p: g.value(fwd.f_p.unwrap()),
            modality,
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let ckpt = Checkpoint {
            config: self.cfg.clone(),
            adv_targets: self.adv_targets,
            seed: self.seed,
            params: self
                .params
                .iter()
                .map(|(name, t)| ParamRecord {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        };
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &ckpt)?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        let mut model = Self::with_adv_targets(ckpt.config, ckpt.seed, ckpt.adv_targets)?;
        if ckpt.params.len() != model.params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, model expects {}",
                ckpt.params.len(),
                model.params.len()
            )));
        }
        for rec in ckpt.params {
            let id = model.params.lookup(&rec.name).ok_or_else(|| {
                Error::Config(format!("checkpoint parameter `{}` unknown", rec.name))
            })?;
            let t = Tensor::new(rec.shape, rec.data)?;
            if t.shape() != model.params.value(id).shape() {
                return Err(Error::Config(format!(
                    "checkpoint parameter `{}` has shape {:?}, expected {:?}",
                    rec.name,
                    t.shape(),
                    model.params.value(id).shape()
                )));
            }
            *model.params.value_mut(id) = t;
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ModelConfig,
    #[serde(default)]
    adv_targets: AdvTargetMode,
    seed: u64,
    params: Vec<ParamRecord>,
}

/// Scaled dot-product attention over already-projected q/k/v for one
/// sample, heads on column blocks.
pub fn multi_head_attention(g: &Graph, q: Var, k: Var, v: Var, heads: usize) -> Result<Var> {
    let s = g.shape_of(q)[1];
    if s % heads != 0 {
        return Err(Error::Config(format!(
            "feature width {s} not divisible by {heads} heads"
        )));
    }
    let dh = s / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dh, dh)?;
        let kh = g.slice_cols(k, h * dh, dh)?;
        let vh = g.slice_cols(v, h * dh, dh)?;
        let scores = g.matmul_nt(qh, kh)?;
        let scores = g.scale(scores, scale);
        let attn = g.softmax(scores, 1)?;
        outs.push(g.matmul(attn, vh)?);
    }
    g.concat_cols(&outs)
}

/// `alpha * L_adv + beta * (L_e + L_f)`, with absent terms dropped.
pub fn total_loss(
    g: &Graph,
    adv: Option<Var>,
    er: Option<Var>,
    fer: Option<Var>,
    alpha: f64,
    beta: f64,
) -> Result<Var> {
    let task = match (er, fer) {
        (Some(e), Some(f)) => Some(g.add(e, f)?),
        (Some(e), None) => Some(e),
        (None, Some(f)) => Some(f),
        (None, None) => None,
    };
    let terms: Vec<Var> = [
        adv.map(|a| g.scale(a, alpha)),
        task.map(|t| g.scale(t, beta)),
    ]
    .into_iter()
    .flatten()
    .collect();
    match terms.len() {
        0 => Err(Error::Contract("no loss terms configured".into())),
        1 => Ok(terms[0]),
        _ => g.add(terms[0], terms[1]),
    }
}
