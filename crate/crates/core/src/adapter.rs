//! Contrastive training of a linear adapter over frozen embeddings.
//!
//! Each training pair `(a, b, y)` is mapped through the adapter, compared by
//! cosine, and scored with the margin contrastive loss
//!
//! ```text
//! L = ½ [ y·d² + (1 − y)·max(0, m − d)² ],   d = 1 − cos(W a + c, W b + c)
//! ```
//!
//! Gradients are derived analytically through the cosine and the affine map.
//! Optimization is Adam with decoupled weight decay under a linear
//! warmup/decay schedule, summed in a fixed order so that runs with the same
//! configuration are bit-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_distance, ByteReader, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::spcd::PairRecord;
use crate::{par, rng};

pub const ADAPTER_MAGIC: &[u8; 8] = b"CALEADP1";

/// Which quantity enters the contrastive loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossForm {
    /// Cosine distance `1 − cos`: positives pulled to distance 0, negatives
    /// pushed beyond the margin.
    #[default]
    Distance,
    /// The cosine similarity itself substituted for the distance.
    Similarity,
}

impl FromStr for LossForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(LossForm::Distance),
            "similarity" => Ok(LossForm::Similarity),
            _ => Err(Error::Config(format!("loss_form must be `distance` or `similarity`, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub d_out: usize,
    pub loss_form: LossForm,
    pub bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 0.7,
            learning_rate: 6.02e-6,
            warmup_ratio: 0.24,
            weight_decay: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 1,
            batch_size: 1,
            seed: 42,
            d_out: 1024,
            loss_form: LossForm::Distance,
            bias: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.margin > 0.0 && self.margin <= 2.0) {
            return fail(format!("margin must be in (0, 2], got {}", self.margin));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return fail(format!("warmup_ratio must be in [0, 1), got {}", self.warmup_ratio));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return fail(format!("adam_epsilon must be positive, got {}", self.adam_epsilon));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.d_out == 0 {
            return fail("epochs, batch_size and d_out must be positive".into());
        }
        Ok(())
    }

    /// Parses flat `key = value` text. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors. Unset keys keep their
    /// defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::Config(format!("line {}: {m}", i + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected key=value".into()))?;
            if seen.insert(key.to_string(), ()).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
            fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
                v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
            }
            let set = |cfg: &mut TrainConfig| -> std::result::Result<(), String> {
                match key {
                    "margin" => cfg.margin = num(key, value)?,
                    "learning_rate" => cfg.learning_rate = num(key, value)?,
                    "warmup_ratio" => cfg.warmup_ratio = num(key, value)?,
                    "weight_decay" => cfg.weight_decay = num(key, value)?,
                    "adam_beta1" => cfg.adam_beta1 = num(key, value)?,
                    "adam_beta2" => cfg.adam_beta2 = num(key, value)?,
                    "adam_epsilon" => cfg.adam_epsilon = num(key, value)?,
                    "epochs" => cfg.epochs = num(key, value)?,
                    "batch_size" => cfg.batch_size = num(key, value)?,
                    "seed" => cfg.seed = num(key, value)?,
                    "d_out" => cfg.d_out = num(key, value)?,
                    "bias" => cfg.bias = num(key, value)?,
                    "loss_form" => cfg.loss_form = value.parse().map_err(|e: Error| e.to_string())?,
                    _ => return Err(format!("unknown key `{key}`")),
                }
                Ok(())
            };
            set(&mut cfg).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Same key set as [`TrainConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let form = match self.loss_form {
            LossForm::Distance => "distance",
            LossForm::Similarity => "similarity",
        };
        format!(
            "margin = {}\nlearning_rate = {}\nwarmup_ratio = {}\nweight_decay = {}\nadam_beta1 = {}\n\
             adam_beta2 = {}\nadam_epsilon = {}\nepochs = {}\nbatch_size = {}\nseed = {}\nd_out = {}\n\
             loss_form = {form}\nbias = {}\n",
            self.margin,
            self.learning_rate,
            self.warmup_ratio,
            self.weight_decay,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_epsilon,
            self.epochs,
            self.batch_size,
            self.seed,
            self.d_out,
            self.bias
        )
    }
}

/// Affine map `e ↦ W e (+ c)` with `W` stored row-major, `d_out × d_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterParams {
    d_out: usize,
    d_in: usize,
    weight: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl AdapterParams {
    pub fn new(d_out: usize, d_in: usize, weight: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if d_out == 0 || d_in == 0 {
            return Err(Error::Domain("adapter dimensions must be positive".into()));
        }
        if weight.len() != d_out * d_in {
            return Err(Error::DimensionMismatch {
                expected: d_out * d_in,
                actual: weight.len(),
            });
        }
        if let Some(b) = &bias {
            if b.len() != d_out {
                return Err(Error::DimensionMismatch {
                    expected: d_out,
                    actual: b.len(),
                });
            }
        }
        if weight.iter().chain(bias.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("adapter parameters must be finite".into()));
        }
        Ok(AdapterParams {
            d_out,
            d_in,
            weight,
            bias,
        })
    }

    /// Identity on the leading `min(d_out, d_in)` diagonal, zeros elsewhere.
    pub fn identity_padded(d_out: usize, d_in: usize, with_bias: bool) -> Self {
        let mut weight = vec![0.0; d_out * d_in];
        for k in 0..d_out.min(d_in) {
            weight[k * d_in + k] = 1.0;
        }
        AdapterParams {
            d_out,
            d_in,
            weight,
            bias: with_bias.then(|| vec![0.0; d_out]),
        }
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    fn apply_into<T: Copy + Into<f64>>(&self, e: &[T], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weight[r * self.d_in..(r + 1) * self.d_in];
            let mut acc = 0.0;
            for (&w, &x) in row.iter().zip(e) {
                acc += w * x.into();
            }
            *o = acc + self.bias.as_ref().map_or(0.0, |b| b[r]);
        }
    }

    pub fn apply<T: Copy + Into<f64>>(&self, e: &[T]) -> Result<Vec<f64>> {
        if e.len() != self.d_in {
            return Err(Error::DimensionMismatch {
                expected: self.d_in,
                actual: e.len(),
            });
        }
        let mut out = vec![0.0; self.d_out];
        self.apply_into(e, &mut out);
        Ok(out)
    }

    /// Maps every row of `m`, rounding outputs to f32.
    pub fn adapt_matrix(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        m.map_rows(self.d_out, |row| {
            Ok(self.apply(row)?.into_iter().map(|x| x as f32).collect())
        })
    }

    /// Serializes to CALEADP1. Parameters are rounded to f32.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let d_out = u32::try_from(self.d_out).map_err(|_| Error::Format("d_out too large".into()))?;
        let d_in = u32::try_from(self.d_in).map_err(|_| Error::Format("d_in too large".into()))?;
        let mut out = Vec::with_capacity(17 + 4 * (self.weight.len() + self.d_out));
        out.extend_from_slice(ADAPTER_MAGIC);
        out.extend_from_slice(&d_out.to_le_bytes());
        out.extend_from_slice(&d_in.to_le_bytes());
        out.push(u8::from(self.bias.is_some()));
        for &w in self.weight.iter().chain(self.bias.iter().flatten()) {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(8, "magic")? != ADAPTER_MAGIC {
            return Err(Error::Format("not a CALEADP1 file (bad magic)".into()));
        }
        let d_out = r.u32("d_out")? as usize;
        let d_in = r.u32("d_in")? as usize;
        let has_bias = match r.u8("bias flag")? {
            0 => false,
            1 => true,
            f => return Err(Error::Format(format!("bias flag must be 0 or 1, got {f}"))),
        };
        let n = d_out
            .checked_mul(d_in)
            .ok_or_else(|| Error::Format("adapter size overflow".into()))?;
        let weight = r.f32s(n, "weights")?.into_iter().map(f64::from).collect();
        let bias = if has_bias {
            Some(r.f32s(d_out, "bias")?.into_iter().map(f64::from).collect())
        } else {
            None
        };
        r.finish()?;
        Self::new(d_out, d_in, weight, bias)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn adapt<T: Copy + Into<f64>>(e: &[T], p: &AdapterParams) -> Result<Vec<f64>> {
    p.apply(e)
}

fn loss_terms(form: LossForm, cos: f64, y: u8, margin: f64) -> (f64, f64) {
    // returns (loss, dloss/dcos)
    let x = match form {
        LossForm::Distance => 1.0 - cos,
        LossForm::Similarity => cos,
    };
    let hinge = (margin - x).max(0.0);
    let (loss, dx) = if y == 1 {
        (0.5 * x * x, x)
    } else {
        (0.5 * hinge * hinge, -hinge)
    };
    let dcos = match form {
        LossForm::Distance => -dx,
        LossForm::Similarity => dx,
    };
    (loss, dcos)
}

/// Contrastive loss of one pair on raw vectors, distance form.
pub fn pair_loss<T: Copy + Into<f64>>(e_i: &[T], e_j: &[T], y: u8, margin: f64) -> Result<f64> {
    pair_loss_with(LossForm::Distance, e_i, e_j, y, margin)
}

pub fn pair_loss_with<T: Copy + Into<f64>>(form: LossForm, e_i: &[T], e_j: &[T], y: u8, margin: f64) -> Result<f64> {
    let d = cosine_distance(e_i, e_j)?;
    Ok(loss_terms(form, 1.0 - d, y, margin).0)
}

/// One training example: two input vectors and a same-concept label.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub a: &'a [f32],
    pub b: &'a [f32],
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchEval {
    pub loss: f64,
    pub gradient: Gradient,
}

/// Loss and the gradient contributions `dL/dz_a`, `dL/dz_b` of one pair.
struct PairForward {
    loss: f64,
    za: Vec<f64>,
    zb: Vec<f64>,
    dcos: f64,
    cos: f64,
    na2: f64,
    nb2: f64,
}

fn forward(p: &AdapterParams, ex: &Example<'_>, margin: f64, form: LossForm) -> std::result::Result<PairForward, String> {
    if ex.a.len() != p.d_in || ex.b.len() != p.d_in {
        return Err(format!("input dimension {} / {} != {}", ex.a.len(), ex.b.len(), p.d_in));
    }
    let mut za = vec![0.0; p.d_out];
    let mut zb = vec![0.0; p.d_out];
    p.apply_into(ex.a, &mut za);
    p.apply_into(ex.b, &mut zb);
    let (mut ab, mut na2, mut nb2) = (0.0, 0.0, 0.0);
    for (&x, &y) in za.iter().zip(&zb) {
        ab += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    if na2 == 0.0 || nb2 == 0.0 {
        return Err("adapted vector is zero".into());
    }
    let cos = ab / (na2 * nb2).sqrt();
    let (loss, dcos) = loss_terms(form, cos.clamp(-1.0, 1.0), ex.label, margin);
    if !(loss.is_finite() && dcos.is_finite()) {
        return Err("loss is not finite".into());
    }
    Ok(PairForward {
        loss,
        za,
        zb,
        dcos,
        cos,
        na2,
        nb2,
    })
}

fn batch_eval(
    batch_idx: usize,
    batch: &[Example<'_>],
    p: &AdapterParams,
    margin: f64,
    form: LossForm,
    grad: &mut Gradient,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    grad.weight.iter_mut().for_each(|g| *g = 0.0);
    if let Some(b) = grad.bias.as_mut() {
        b.iter_mut().for_each(|g| *g = 0.0);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut ga = vec![0.0; p.d_out];
    let mut gb = vec![0.0; p.d_out];
    for (k, ex) in batch.iter().enumerate() {
        let f = forward(p, ex, margin, form).map_err(|what| Error::NonFinite {
            batch: batch_idx,
            what: format!("pair {k}: {what}"),
        })?;
        total += f.loss;
        if f.dcos == 0.0 {
            continue;
        }
        // d cos / d za = zb/(|za||zb|) − cos·za/|za|², symmetric for zb.
        let inv = 1.0 / (f.na2 * f.nb2).sqrt();
        let c = f.dcos * scale;
        for r in 0..p.d_out {
            ga[r] = c * (f.zb[r] * inv - f.cos * f.za[r] / f.na2);
            gb[r] = c * (f.za[r] * inv - f.cos * f.zb[r] / f.nb2);
        }
        for r in 0..p.d_out {
            let (gar, gbr) = (ga[r], gb[r]);
            if gar == 0.0 && gbr == 0.0 {
                continue;
            }
            let row = &mut grad.weight[r * p.d_in..(r + 1) * p.d_in];
            for ((g, &xa), &xb) in row.iter_mut().zip(ex.a).zip(ex.b) {
                *g += gar * f64::from(xa) + gbr * f64::from(xb);
            }
        }
        if let Some(gbias) = grad.bias.as_mut() {
            for r in 0..p.d_out {
                gbias[r] += ga[r] + gb[r];
            }
        }
    }
    let loss = total * scale;
    if grad.weight.iter().chain(grad.bias.iter().flatten()).any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            batch: batch_idx,
            what: "gradient".into(),
        });
    }
    Ok(loss)
}

fn zero_gradient(p: &AdapterParams) -> Gradient {
    Gradient {
        weight: vec![0.0; p.weight.len()],
        bias: p.bias.as_ref().map(|b| vec![0.0; b.len()]),
    }
}

/// Mean loss of `batch` and its gradient with respect to the adapter.
/// Weight decay is not included; the optimizer applies it separately.
pub fn batch_gradient(batch: &[Example<'_>], p: &AdapterParams, margin: f64, form: LossForm) -> Result<BatchEval> {
    let mut gradient = zero_gradient(p);
    let loss = batch_eval(0, batch, p, margin, form, &mut gradient)?;
    Ok(BatchEval { loss, gradient })
}

/// Mean loss of `batch` under `p`, without gradients.
pub fn batch_loss(batch: &[Example<'_>], p: &AdapterParams, margin: f64, form: LossForm) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let losses = par::try_map(batch, |ex| {
        forward(p, ex, margin, form)
            .map(|f| f.loss)
            .map_err(|what| Error::NonFinite { batch: 0, what })
    })?;
    Ok(losses.iter().sum::<f64>() / batch.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub entries: usize,
}

/// Below this magnitude both gradients count as zero and the entry's error is 0.
pub const GRADCHECK_ZERO_GUARD: f64 = 1e-7;

/// Compares the analytic gradient with central differences of step `step`,
/// entry by entry, and reports the largest relative error.
pub fn gradient_check(p: &AdapterParams, batch: &[Example<'_>], margin: f64, step: f64, form: LossForm) -> Result<GradCheck> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    let analytic = batch_gradient(batch, p, margin, form)?.gradient;
    let n_w = p.weight.len();
    let n_b = p.bias.as_ref().map_or(0, Vec::len);

    let perturbed = |k: usize, delta: f64| -> Result<f64> {
        let mut q = p.clone();
        if k < n_w {
            q.weight[k] += delta;
        } else {
            q.bias.as_mut().expect("bias entry")[k - n_w] += delta;
        }
        batch_loss(batch, &q, margin, form)
    };

    let mut max_rel = 0.0f64;
    for k in 0..n_w + n_b {
        let numeric = (perturbed(k, step)? - perturbed(k, -step)?) / (2.0 * step);
        let a = if k < n_w { analytic.weight[k] } else { analytic.bias.as_ref().expect("bias")[k - n_w] };
        let scale = a.abs().max(numeric.abs());
        let rel = if scale < GRADCHECK_ZERO_GUARD { 0.0 } else { (a - numeric).abs() / scale };
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheck {
        max_rel_error: max_rel,
        entries: n_w + n_b,
    })
}

/// Learning-rate multiplier at optimizer step `step` (0-based): linear ramp
/// from 0 over the warmup steps, then linear decay to 0 at `total`.
pub fn schedule_factor(step: usize, total: usize, warmup: usize) -> f64 {
    if step < warmup {
        step as f64 / warmup.max(1) as f64
    } else {
        (total.saturating_sub(step)) as f64 / (total - warmup).max(1) as f64
    }
}

pub fn warmup_steps(total: usize, ratio: f64) -> usize {
    (total as f64 * ratio).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub learning_rate: f64,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: AdapterParams,
    pub trace: Vec<StepRecord>,
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Updates `params` in place. `decay` is the decoupled weight decay for
    /// this parameter group.
    fn step(&mut self, params: &mut [f64], grads: &[f64], offset: usize, lr: f64, decay: f64, cfg: &TrainConfig) {
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let bc1 = 1.0 - b1.powi(self.t);
        let bc2 = 1.0 - b2.powi(self.t);
        let shrink = 1.0 - lr * decay;
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *p *= shrink;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= lr * mhat / (vhat.sqrt() + cfg.adam_epsilon);
        }
    }
}

/// Resolves pair ids to embedding rows.
pub fn examples<'a>(pairs: &[PairRecord], embeddings: &'a EmbeddingMatrix) -> Result<Vec<Example<'a>>> {
    pairs
        .iter()
        .map(|p| {
            Ok(Example {
                a: embeddings.get(&p.occ_a)?,
                b: embeddings.get(&p.occ_b)?,
                label: p.label,
            })
        })
        .collect()
}

/// Trains an adapter on the given pairs. The result depends only on the
/// inputs and `config`.
pub fn train(pairs: &[PairRecord], embeddings: &EmbeddingMatrix, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Domain("no training pairs".into()));
    }
    let data = examples(pairs, embeddings)?;
    train_examples(&data, embeddings.dim(), config)
}

pub fn train_examples(data: &[Example<'_>], d_in: usize, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("no training pairs".into()));
    }
    let mut params = AdapterParams::identity_padded(config.d_out, d_in, config.bias);
    let steps_per_epoch = data.len().div_ceil(config.batch_size);
    let total = steps_per_epoch * config.epochs;
    let warmup = warmup_steps(total, config.warmup_ratio);
    let n_w = params.weight.len();
    let mut opt = AdamW::new(n_w + params.bias.as_ref().map_or(0, Vec::len));
    let mut grad = zero_gradient(&params);
    let mut trace = Vec::with_capacity(total);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);

    let mut step = 0usize;
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, &format!("train/shuffle/{epoch}")));
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i]));
            let loss = batch_eval(step, &batch, &params, config.margin, config.loss_form, &mut grad)?;
            let lr = config.learning_rate * schedule_factor(step, total, warmup);
            opt.t += 1;
            opt.step(&mut params.weight, &grad.weight, 0, lr, config.weight_decay, config);
            if let (Some(b), Some(gb)) = (params.bias.as_mut(), grad.bias.as_ref()) {
                // biases are not decayed
                opt.step(b, gb, n_w, lr, 0.0, config);
            }
            trace.push(StepRecord {
                step,
                learning_rate: lr,
                loss,
            });
            step += 1;
        }
    }
    if params.weight.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite {
            batch: step,
            what: "parameters diverged".into(),
        });
    }
    Ok(TrainOutcome { params, trace })
}
