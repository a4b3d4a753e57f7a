//! Freeze-masked AdamW training with an MSE objective.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::WindowPair;
use crate::encoders::DatasetDescription;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::UniCastModel;
use crate::rng::Rng;
use crate::tensor::{ParamId, ParamStore};

/// Batch losses above this abort training.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Scales `learning_rate`; desk-scale runs use it to compensate for
    /// tiny models and few steps. The effective step size is the product.
    pub lr_multiplier: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Fraction of training windows kept, drawn once before training.
    pub data_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            lr_multiplier: 1.0,
            epochs: 10,
            batch_size: 32,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            data_fraction: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn effective_lr(&self) -> f64 {
        self.learning_rate * self.lr_multiplier
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.effective_lr() > 0.0 && self.effective_lr().is_finite()) {
            return bad(format!(
                "learning_rate x lr_multiplier must be positive, got {} x {}",
                self.learning_rate, self.lr_multiplier
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be >= 0", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas ({}, {}) must lie in [0, 1)", self.beta1, self.beta2));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps {} must be positive", self.eps));
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return bad(format!("data_fraction {} must lie in (0, 1]", self.data_fraction));
        }
        Ok(())
    }
}

/// Tensors the optimizer may update.
pub fn build_freeze_mask(model: &UniCastModel) -> BTreeSet<ParamId> {
    model.trainable_ids()
}

/// Mean of squared differences.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dim(
            "mse_loss",
            format!("prediction has {} values, target {}", pred.len(), target.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::Input("mse of empty sequences".into()));
    }
    let s: f64 = pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / pred.len() as f64)
}

/// Differentiable MSE of a tape value against a fixed target.
pub fn mse_on_tape(tape: &mut Tape, pred: Var, target: &[f64]) -> Result<Var> {
    let shape = tape.shape(pred).to_vec();
    let y = tape.constant(&shape, target.to_vec()).map_err(|_| {
        Error::dim(
            "mse_loss",
            format!("prediction shape {shape:?}, target has {} values", target.len()),
        )
    })?;
    let diff = tape.sub(pred, y)?;
    Ok(tape.mean_square(diff))
}

/// First and second moment estimates per trainable tensor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    moments: BTreeMap<ParamId, (Vec<f64>, Vec<f64>)>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One AdamW update of every tensor in `mask`:
/// `p ← p − lr·m̂/(√v̂ + ε) − lr·wd·p`. Tensors without an entry in
/// `grads` are treated as having zero gradient. Returns the L2 norm of
/// the change.
pub fn optimizer_step(
    store: &mut ParamStore,
    grads: &BTreeMap<ParamId, Vec<f64>>,
    mask: &BTreeSet<ParamId>,
    state: &mut OptimizerState,
    cfg: &TrainConfig,
) -> Result<f64> {
    if let Some(id) = grads.keys().find(|id| !mask.contains(id)) {
        return Err(Error::Contract(format!(
            "gradient supplied for frozen tensor `{}`",
            store.name(*id)
        )));
    }
    for (&id, g) in grads {
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                location: format!("gradient of `{}` (tensor {})", store.name(id), id.index()),
                detail: format!("element {i} is {}", g[i]),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let lr = cfg.effective_lr();
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let mut sq = 0.0;
    for &id in mask {
        let p = store.get_mut(id);
        let n = p.len();
        let (m, v) = state
            .moments
            .entry(id)
            .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
        let g = grads.get(&id);
        for (i, x) in p.data_mut().iter_mut().enumerate() {
            let gi = g.map_or(0.0, |g| g[i]);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            let delta = -lr * mhat / (vhat.sqrt() + cfg.eps) - lr * cfg.weight_decay * *x;
            *x += delta;
            sq += delta * delta;
        }
    }
    Ok(sq.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mse: f64,
    pub seconds: f64,
    /// L2 norm of the trainable parameters' change over the epoch.
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation MSE before any update (freshly initialized prompts).
    pub zero_shot_val_mse: f64,
    pub train_windows: usize,
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn val_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_mse).collect()
    }

    pub fn final_val_mse(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_mse)
    }

    /// Metrics only, one row per epoch plus an epoch-0 zero-shot row.
    /// Wall-clock time is left out so reruns are byte-identical; it is in
    /// the JSON form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_mse,update_norm\n");
        let _ = writeln!(out, "0,,{},0", self.zero_shot_val_mse);
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.val_mse, e.update_norm);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// A training run that stopped early, with whatever history it recorded.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct TrainAbort {
    #[source]
    pub error: Error,
    pub history: TrainHistory,
}

impl From<TrainAbort> for Error {
    fn from(a: TrainAbort) -> Self {
        a.error
    }
}

/// Seeded subset of `n` indices of size `round(fraction · n)`, at least 1,
/// in ascending order.
pub fn fraction_subset(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = ((fraction * n as f64).round() as usize).clamp(1, n.max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n {
        Rng::stream(seed, "train.fraction").shuffle(&mut idx);
        idx.truncate(k);
        idx.sort_unstable();
    }
    idx
}

/// Mean loss over one minibatch and its gradients on the trainable set.
fn batch_gradients(
    model: &UniCastModel,
    batch: &[&WindowPair],
    description: &DatasetDescription,
    mask: &BTreeSet<ParamId>,
) -> Result<(f64, BTreeMap<ParamId, Vec<f64>>)> {
    let mut tape = Tape::new(&model.store);
    // The description is the same for every window, so encode it once.
    let text = model.encode_text(&mut tape, description)?;
    let mut losses = Vec::with_capacity(batch.len());
    for w in batch {
        let y = model.forecast(&mut tape, &w.context, text)?;
        losses.push(mse_on_tape(&mut tape, y, &w.target)?);
    }
    let mut total = losses[0];
    for &l in &losses[1..] {
        total = tape.add(total, l)?;
    }
    let loss = tape.scale(total, 1.0 / batch.len() as f64);
    let grads = tape.backward(loss)?;
    let mut out = BTreeMap::new();
    for &id in mask {
        if let Some(g) = grads.param(id) {
            out.insert(id, g.to_vec());
        }
    }
    Ok((tape.scalar_value(loss), out))
}

fn snapshot(store: &ParamStore, mask: &BTreeSet<ParamId>) -> Vec<f64> {
    mask.iter().flat_map(|&id| store.get(id).data().iter().copied()).collect()
}

/// Train the model's prompts, interaction layers and head.
pub fn train(
    model: &mut UniCastModel,
    train_set: &[WindowPair],
    val_set: &[WindowPair],
    description: &DatasetDescription,
    cfg: &TrainConfig,
) -> Result<TrainHistory, TrainAbort> {
    train_observed(model, train_set, val_set, description, cfg, |_, _| Ok(()))
}

/// [`train`], calling `on_epoch` with the model after every epoch.
pub fn train_observed<F>(
    model: &mut UniCastModel,
    train_set: &[WindowPair],
    val_set: &[WindowPair],
    description: &DatasetDescription,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainHistory, TrainAbort>
where
    F: FnMut(&UniCastModel, &EpochRecord) -> Result<()>,
{
    let mut history = TrainHistory {
        zero_shot_val_mse: f64::NAN,
        train_windows: 0,
        epochs: Vec::new(),
    };
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => {
                    return Err(TrainAbort {
                        error: error.into(),
                        history,
                    })
                }
            }
        };
    }
    bail!(cfg.validate());
    if train_set.is_empty() || val_set.is_empty() {
        bail!(Err(Error::Input(format!(
            "training needs windows in both sets, got {} train and {} val",
            train_set.len(),
            val_set.len()
        ))));
    }
    let subset = fraction_subset(train_set.len(), cfg.data_fraction, cfg.seed);
    history.train_windows = subset.len();
    let mask = build_freeze_mask(model);
    history.zero_shot_val_mse = bail!(evaluate(model, val_set, description));

    let mut order = subset;
    let mut shuffle_rng = Rng::stream(cfg.seed, "train.shuffle");
    let mut state = OptimizerState::new();
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let before = snapshot(&model.store, &mask);
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&WindowPair> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = bail!(batch_gradients(model, &batch, description, &mask));
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                bail!(Err(Error::Diverged { epoch, loss }));
            }
            loss_sum += loss * batch.len() as f64;
            bail!(optimizer_step(&mut model.store, &grads, &mask, &mut state, cfg));
        }
        let val_mse = bail!(evaluate(model, val_set, description));
        let after = snapshot(&model.store, &mask);
        let update_norm = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_mse,
            seconds: started.elapsed().as_secs_f64(),
            update_norm,
        };
        log::info!(
            "epoch {epoch}: train {:.5} val {:.5} ({:.1}s)",
            record.train_loss,
            record.val_mse,
            record.seconds
        );
        bail!(on_epoch(model, &record));
        history.epochs.push(record);
    }
    Ok(history)
}
