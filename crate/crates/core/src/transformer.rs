//! Pre-norm transformer layers with deep soft-prompt injection.
//!
//! A prompted layer drops the prompt rows left over from the previous
//! prompted layer and prepends its own fresh `l × d` prompt, so the sequence
//! length after any prompted layer is always `l + content`. Layers outside
//! the schedule pass the sequence through untouched, carrying the most
//! recent prompt rows along.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{seeded_init, Init, ParamId, ParamStore, Tensor};

/// Which layers receive prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptLocation {
    First,
    Odd,
    TopHalf,
    #[default]
    All,
}

impl PromptLocation {
    pub const ALL_VARIANTS: [PromptLocation; 4] = [
        PromptLocation::First,
        PromptLocation::Odd,
        PromptLocation::TopHalf,
        PromptLocation::All,
    ];
}

impl fmt::Display for PromptLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptLocation::First => "first",
            PromptLocation::Odd => "odd",
            PromptLocation::TopHalf => "top_half",
            PromptLocation::All => "all",
        })
    }
}

impl FromStr for PromptLocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(PromptLocation::First),
            "odd" => Ok(PromptLocation::Odd),
            "top_half" | "tophalf" => Ok(PromptLocation::TopHalf),
            "all" => Ok(PromptLocation::All),
            _ => Err(Error::Config(format!("unknown prompt location `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSchedule {
    pub variant: PromptLocation,
    pub num_layers: usize,
}

impl PromptSchedule {
    pub fn new(variant: PromptLocation, num_layers: usize) -> Self {
        Self {
            variant,
            num_layers,
        }
    }

    pub fn layers(&self) -> BTreeSet<usize> {
        resolve_schedule(*self)
    }
}

/// 1-based layer indices that receive prompts. `TopHalf` is the last
/// `ceil(L/2)` layers, the ones nearest the output.
pub fn resolve_schedule(schedule: PromptSchedule) -> BTreeSet<usize> {
    let l = schedule.num_layers;
    match schedule.variant {
        PromptLocation::First => (1..=l.min(1)).collect(),
        PromptLocation::Odd => (1..=l).step_by(2).collect(),
        PromptLocation::TopHalf => (l - l.div_ceil(2) + 1..=l).collect(),
        PromptLocation::All => (1..=l).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackConfig {
    pub num_layers: usize,
    pub d_model: usize,
    pub num_heads: usize,
    pub causal: bool,
    pub prompt_length: usize,
    pub schedule: PromptLocation,
}

impl StackConfig {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.d_model == 0 || self.num_heads == 0 || self.d_model % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "{name}: d_model {} must be a positive multiple of num_heads {}",
                self.d_model, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn prompt_schedule(&self) -> PromptSchedule {
        PromptSchedule::new(self.schedule, self.num_layers)
    }
}

/// Frozen weights of one transformer layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
}

impl LayerWeights {
    /// Fixed-random stand-in for pretrained weights: `N(0, 1/fan_in)`
    /// matrices, small biases, unit layer-norm gains. Never trainable.
    pub fn init(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut Rng) -> Self {
        let mut lin = |store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize| {
            let sigma = 1.0 / (fan_in as f64).sqrt();
            let w = seeded_init(&[fan_in, fan_out], Init::Gaussian { sigma }, rng);
            let b = seeded_init(&[fan_out], Init::Gaussian { sigma: 0.02 }, rng);
            (
                store.add(format!("{prefix}.{name}.weight"), w),
                store.add(format!("{prefix}.{name}.bias"), b),
            )
        };
        let (wq, bq) = lin(store, "attn.q", d, d);
        let (wk, bk) = lin(store, "attn.k", d, d);
        let (wv, bv) = lin(store, "attn.v", d, d);
        let (wo, bo) = lin(store, "attn.o", d, d);
        let (w1, b1) = lin(store, "mlp.fc1", d, 4 * d);
        let (w2, b2) = lin(store, "mlp.fc2", 4 * d, d);
        let ln = |store: &mut ParamStore, name: &str| {
            (
                store.add(format!("{prefix}.{name}.gain"), Tensor::vector(vec![1.0; d])),
                store.add(format!("{prefix}.{name}.bias"), Tensor::zeros(&[d])),
            )
        };
        let (ln1_gain, ln1_bias) = ln(store, "ln1");
        let (ln2_gain, ln2_bias) = ln(store, "ln2");
        Self {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            w1,
            b1,
            w2,
            b2,
            ln1_gain,
            ln1_bias,
            ln2_gain,
            ln2_bias,
        }
    }

    pub fn ids(&self) -> [ParamId; 16] {
        [
            self.wq,
            self.bq,
            self.wk,
            self.bk,
            self.wv,
            self.bv,
            self.wo,
            self.bo,
            self.w1,
            self.b1,
            self.w2,
            self.b2,
            self.ln1_gain,
            self.ln1_bias,
            self.ln2_gain,
            self.ln2_bias,
        ]
    }
}

/// Trainable per-layer prompts `P^k`, keyed by 1-based layer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub length: usize,
    pub schedule: PromptSchedule,
    pub prompts: BTreeMap<usize, ParamId>,
}

impl PromptSet {
    /// One `length × d` tensor per scheduled layer. A zero length yields no
    /// tensors at all.
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        length: usize,
        d: usize,
        schedule: PromptSchedule,
        init: Init,
        rng: &mut Rng,
    ) -> Self {
        let mut prompts = BTreeMap::new();
        if length > 0 {
            for layer in schedule.layers() {
                let t = seeded_init(&[length, d], init, rng).with_requires_grad(true);
                prompts.insert(layer, store.add(format!("{prefix}.prompt.{layer}"), t));
            }
        }
        Self {
            length,
            schedule,
            prompts,
        }
    }

    pub fn empty(schedule: PromptSchedule) -> Self {
        Self {
            length: 0,
            schedule,
            prompts: BTreeMap::new(),
        }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.prompts.values().copied().collect()
    }
}

/// Strip `carried` stale prompt rows from the front of `seq` and prepend
/// `prompt`.
pub fn inject_prompts(tape: &mut Tape, seq: Var, prompt: Var, carried: usize) -> Result<Var> {
    let (s, _) = tape.dims(seq);
    if carried > s {
        return Err(Error::Contract(format!(
            "carried prompt length {carried} exceeds sequence length {s}"
        )));
    }
    let content = tape.slice_rows(seq, carried, s - carried)?;
    tape.concat_rows(&[prompt, content])
}

/// One pre-norm block: `x + MHA(LN1(x))`, then `+ MLP(LN2(·))`.
pub fn layer_forward(
    tape: &mut Tape,
    x: Var,
    w: &LayerWeights,
    num_heads: usize,
    causal: bool,
) -> Result<Var> {
    let d = tape.store().get(w.wq).rows();
    let (s, width) = tape.dims(x);
    if width != d {
        return Err(Error::dim(
            "layer_forward",
            format!("input width {width}, layer width {d}"),
        ));
    }
    let p = |tape: &mut Tape, id| tape.param(id);

    let (g1, b1) = (p(tape, w.ln1_gain), p(tape, w.ln1_bias));
    let h = tape.layer_norm(x, g1, b1)?;
    let q = affine(tape, h, w.wq, w.bq)?;
    let k = affine(tape, h, w.wk, w.bk)?;
    let v = affine(tape, h, w.wv, w.bv)?;
    let dh = d / num_heads;
    let inv_sqrt = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(num_heads);
    for hd in 0..num_heads {
        let qh = tape.slice_cols(q, hd * dh, dh)?;
        let kh = tape.slice_cols(k, hd * dh, dh)?;
        let vh = tape.slice_cols(v, hd * dh, dh)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let scores = tape.scale(scores, inv_sqrt);
        let attn = if causal && s > 1 {
            tape.causal_softmax_rows(scores)
        } else {
            tape.softmax_rows(scores)
        };
        heads.push(tape.matmul(attn, vh)?);
    }
    let merged = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)?
    };
    let attn_out = affine(tape, merged, w.wo, w.bo)?;
    let x1 = tape.add(x, attn_out)?;

    let (g2, b2) = (p(tape, w.ln2_gain), p(tape, w.ln2_bias));
    let h2 = tape.layer_norm(x1, g2, b2)?;
    let m = affine(tape, h2, w.w1, w.b1)?;
    let m = tape.gelu(m);
    let m = affine(tape, m, w.w2, w.b2)?;
    tape.add(x1, m)
}

/// `x · W + b` for stored `W`, `b`.
pub(crate) fn affine(tape: &mut Tape, x: Var, weight: ParamId, bias: ParamId) -> Result<Var> {
    let (wv, bv) = (tape.param(weight), tape.param(bias));
    let y = tape.matmul(x, wv)?;
    tape.add(y, bv)
}

/// A stack of frozen layers sharing one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stack {
    pub name: String,
    pub config: StackConfig,
    pub layers: Vec<LayerWeights>,
}

/// Output of [`Stack::forward`]: the final hidden states and how many of
/// their leading rows are prompt positions.
#[derive(Debug, Clone, Copy)]
pub struct StackOutput {
    pub hidden: Var,
    pub prompt_rows: usize,
}

impl Stack {
    pub fn init(store: &mut ParamStore, name: &str, config: StackConfig, rng: &mut Rng) -> Result<Self> {
        config.validate(name)?;
        let layers = (1..=config.num_layers)
            .map(|k| LayerWeights::init(store, &format!("{name}.layer{k}"), config.d_model, rng))
            .collect();
        Ok(Self {
            name: name.to_string(),
            config,
            layers,
        })
    }

    pub fn frozen_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| l.ids()).collect()
    }

    /// Run every layer, injecting prompts at scheduled layers.
    pub fn forward(&self, tape: &mut Tape, tokens: Var, prompts: &PromptSet) -> Result<StackOutput> {
        let schedule = prompts.schedule.layers();
        let mut x = tokens;
        let mut carried = 0;
        for (i, w) in self.layers.iter().enumerate() {
            let layer = i + 1;
            if prompts.length > 0 && schedule.contains(&layer) {
                let id = prompts.prompts.get(&layer).ok_or_else(|| {
                    Error::Config(format!("{}: no prompt tensor for layer {layer}", self.name))
                })?;
                let p = tape.param(*id);
                x = inject_prompts(tape, x, p, carried)?;
                carried = prompts.length;
            }
            x = layer_forward(tape, x, w, self.config.num_heads, self.config.causal)?;
            check_finite(tape, x, || format!("{} layer {layer}", self.name))?;
        }
        Ok(StackOutput {
            hidden: x,
            prompt_rows: carried,
        })
    }
}

pub(crate) fn check_finite(tape: &Tape, v: Var, location: impl FnOnce() -> String) -> Result<()> {
    if let Some(pos) = tape.value(v).iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            location: location(),
            detail: format!("non-finite value at flat index {pos}"),
        });
    }
    Ok(())
}

/// Sinusoidal position table, `rows × d`, row-major.
pub fn sinusoidal_positions(rows: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * d];
    for pos in 0..rows {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10_000f64.powf(2.0 * pair / d as f64);
            out[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(variant: PromptLocation, l: usize) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        for k in 1..=l {
            let keep = match variant {
                PromptLocation::First => k == 1,
                PromptLocation::Odd => k % 2 == 1,
                PromptLocation::TopHalf => 2 * (l - k + 1) <= l + 1,
                PromptLocation::All => true,
            };
            if keep {
                set.insert(k);
            }
        }
        set
    }

    #[test]
    fn schedule_examples() {
        let all = resolve_schedule(PromptSchedule::new(PromptLocation::All, 12));
        assert_eq!(all, (1..=12).collect());
        let first = resolve_schedule(PromptSchedule::new(PromptLocation::First, 12));
        assert_eq!(first, BTreeSet::from([1]));
        let top = resolve_schedule(PromptSchedule::new(PromptLocation::TopHalf, 12));
        assert_eq!(top, (7..=12).collect());
        let odd = resolve_schedule(PromptSchedule::new(PromptLocation::Odd, 5));
        assert_eq!(odd, BTreeSet::from([1, 3, 5]));
    }

    #[test]
    fn schedule_matches_brute_force_and_cardinalities() {
        for l in 1..=16 {
            for v in PromptLocation::ALL_VARIANTS {
                let got = resolve_schedule(PromptSchedule::new(v, l));
                assert_eq!(got, brute_force(v, l), "{v} L={l}");
                let expect_len = match v {
                    PromptLocation::First => 1,
                    PromptLocation::Odd | PromptLocation::TopHalf => l.div_ceil(2),
                    PromptLocation::All => l,
                };
                assert_eq!(got.len(), expect_len);
            }
        }
    }

    fn rows(t: &Tape, v: Var) -> Vec<Vec<u64>> {
        let (_, c) = t.dims(v);
        t.value(v)
            .chunks(c)
            .map(|r| r.iter().map(|x| x.to_bits()).collect())
            .collect()
    }

    #[test]
    fn inject_on_first_prompted_layer_prepends() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let seq = t.constant(&[5, 2], (0..10).map(f64::from).collect()).unwrap();
        let p = t.constant(&[3, 2], vec![-1.0; 6]).unwrap();
        let out = inject_prompts(&mut t, seq, p, 0).unwrap();
        assert_eq!(t.shape(out), &[8, 2]);
        let r = rows(&t, out);
        assert_eq!(&r[..3], &rows(&t, p)[..]);
        assert_eq!(&r[3..], &rows(&t, seq)[..]);
    }

    #[test]
    fn inject_replaces_carried_prompts() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let seq = t.constant(&[8, 2], (0..16).map(|x| x as f64 * 0.37).collect()).unwrap();
        let p = t.constant(&[3, 2], vec![9.0; 6]).unwrap();
        let out = inject_prompts(&mut t, seq, p, 3).unwrap();
        assert_eq!(t.shape(out), &[8, 2]);
        assert_eq!(&rows(&t, out)[3..], &rows(&t, seq)[3..]);
    }

    #[test]
    fn zero_length_prompt_leaves_sequence() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let seq = t.constant(&[4, 3], (0..12).map(f64::from).collect()).unwrap();
        let p = t.constant(&[0, 3], vec![]).unwrap();
        let out = inject_prompts(&mut t, seq, p, 0).unwrap();
        assert_eq!(rows(&t, out), rows(&t, seq));
    }

    #[test]
    fn carried_longer_than_sequence_is_rejected() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let seq = t.constant(&[2, 2], vec![0.0; 4]).unwrap();
        let p = t.constant(&[1, 2], vec![0.0; 2]).unwrap();
        assert!(matches!(
            inject_prompts(&mut t, seq, p, 3),
            Err(Error::Contract(_))
        ));
    }

    fn one_layer(d: usize, seed: u64) -> (ParamStore, LayerWeights) {
        let mut store = ParamStore::new();
        let w = LayerWeights::init(&mut store, "l", d, &mut Rng::new(seed));
        (store, w)
    }

    #[test]
    fn single_token_causal_equals_bidirectional() {
        let (store, w) = one_layer(8, 1);
        let mut t = Tape::new(&store);
        let x = t.constant(&[1, 8], (0..8).map(|i| (i as f64).sin()).collect()).unwrap();
        let a = layer_forward(&mut t, x, &w, 2, true).unwrap();
        let b = layer_forward(&mut t, x, &w, 2, false).unwrap();
        assert_eq!(t.value(a), t.value(b));
    }

    #[test]
    fn bidirectional_layer_is_permutation_equivariant() {
        let (store, w) = one_layer(8, 2);
        let mut rng = Rng::new(5);
        let data: Vec<f64> = (0..32).map(|_| rng.gaussian(1.0)).collect();
        let mut swapped = data.clone();
        for j in 0..8 {
            swapped.swap(8 + j, 24 + j); // rows 1 and 3
        }
        let mut t = Tape::new(&store);
        let x = t.constant(&[4, 8], data).unwrap();
        let xs = t.constant(&[4, 8], swapped).unwrap();
        let y = layer_forward(&mut t, x, &w, 2, false).unwrap();
        let ys = layer_forward(&mut t, xs, &w, 2, false).unwrap();
        let (y, ys) = (t.value(y).to_vec(), t.value(ys).to_vec());
        for (r, rs) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
            for j in 0..8 {
                assert!((y[r * 8 + j] - ys[rs * 8 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_attention_output_leaves_mlp_plus_identity() {
        let (mut store, w) = one_layer(8, 3);
        store.get_mut(w.wo).data_mut().fill(0.0);
        store.get_mut(w.bo).data_mut().fill(0.0);
        let mut t = Tape::new(&store);
        let x = t.constant(&[3, 8], (0..24).map(|i| (i as f64 * 0.3).cos()).collect()).unwrap();
        let y = layer_forward(&mut t, x, &w, 4, false).unwrap();
        let (g, b) = (t.param(w.ln2_gain), t.param(w.ln2_bias));
        let h = t.layer_norm(x, g, b).unwrap();
        let m = affine(&mut t, h, w.w1, w.b1).unwrap();
        let m = t.gelu(m);
        let m = affine(&mut t, m, w.w2, w.b2).unwrap();
        let expect = t.add(x, m).unwrap();
        assert_eq!(t.value(y), t.value(expect));
    }

    #[test]
    fn width_mismatch_is_a_dimension_error() {
        let (store, w) = one_layer(8, 4);
        let mut t = Tape::new(&store);
        let x = t.constant(&[2, 6], vec![0.0; 12]).unwrap();
        assert!(matches!(
            layer_forward(&mut t, x, &w, 2, false),
            Err(Error::Dimension { .. })
        ));
    }

    fn stack(layers: usize, causal: bool, location: PromptLocation, l: usize) -> (ParamStore, Stack, PromptSet) {
        let cfg = StackConfig {
            num_layers: layers,
            d_model: 8,
            num_heads: 2,
            causal,
            prompt_length: l,
            schedule: location,
        };
        let mut store = ParamStore::new();
        let mut rng = Rng::new(17);
        let s = Stack::init(&mut store, "s", cfg, &mut rng).unwrap();
        let p = PromptSet::init(
            &mut store,
            "s",
            l,
            8,
            cfg.prompt_schedule(),
            Init::Gaussian { sigma: 0.5 },
            &mut rng,
        );
        (store, s, p)
    }

    #[test]
    fn zero_length_prompts_equal_plain_stack() {
        let (store, s, p) = stack(3, false, PromptLocation::All, 0);
        let mut t = Tape::new(&store);
        let x = t.constant(&[4, 8], (0..32).map(|i| (i as f64).sin()).collect()).unwrap();
        let out = s.forward(&mut t, x, &p).unwrap();
        let mut plain = x;
        for w in &s.layers {
            plain = layer_forward(&mut t, plain, w, 2, false).unwrap();
        }
        assert_eq!(t.value(out.hidden), t.value(plain));
        assert_eq!(out.prompt_rows, 0);
    }

    #[test]
    fn one_layer_first_schedule_shape() {
        let (store, s, p) = stack(1, false, PromptLocation::First, 3);
        let mut t = Tape::new(&store);
        let x = t.constant(&[5, 8], vec![0.1; 40]).unwrap();
        let out = s.forward(&mut t, x, &p).unwrap();
        assert_eq!(t.shape(out.hidden), &[8, 8]);
    }

    #[test]
    fn odd_schedule_bookkeeping() {
        // Layers 1 and 3 prompted: rows stay at l + s, never accumulate.
        let (store, s, p) = stack(3, false, PromptLocation::Odd, 2);
        assert_eq!(p.prompts.keys().copied().collect::<Vec<_>>(), vec![1, 3]);
        let mut t = Tape::new(&store);
        let x = t.constant(&[4, 8], (0..32).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap();
        let out = s.forward(&mut t, x, &p).unwrap();
        assert_eq!(t.shape(out.hidden), &[6, 8]);
        assert_eq!(out.prompt_rows, 2);

        // Manual trace of the same recurrence.
        let p1 = t.param(p.prompts[&1]);
        let p3 = t.param(p.prompts[&3]);
        let h = inject_prompts(&mut t, x, p1, 0).unwrap();
        let h = layer_forward(&mut t, h, &s.layers[0], 2, false).unwrap();
        let h = layer_forward(&mut t, h, &s.layers[1], 2, false).unwrap();
        let h = inject_prompts(&mut t, h, p3, 2).unwrap();
        let h = layer_forward(&mut t, h, &s.layers[2], 2, false).unwrap();
        assert_eq!(t.value(out.hidden), t.value(h));
    }

    #[test]
    fn missing_prompt_tensor_is_config_error() {
        let (store, s, mut p) = stack(2, false, PromptLocation::All, 2);
        p.prompts.remove(&2);
        let mut t = Tape::new(&store);
        let x = t.constant(&[3, 8], vec![0.2; 24]).unwrap();
        assert!(matches!(s.forward(&mut t, x, &p), Err(Error::Config(_))));
    }

    #[test]
    fn causal_stack_ignores_future_content() {
        let (store, s, p) = stack(2, true, PromptLocation::All, 2);
        let base: Vec<f64> = (0..40).map(|i| (i as f64 * 0.21).sin()).collect();
        let mut changed = base.clone();
        for v in &mut changed[24..32] {
            *v += 1.5; // content row 3
        }
        let mut t = Tape::new(&store);
        let a = t.constant(&[5, 8], base).unwrap();
        let b = t.constant(&[5, 8], changed).unwrap();
        let oa = s.forward(&mut t, a, &p).unwrap();
        let ob = s.forward(&mut t, b, &p).unwrap();
        // prompts (2 rows) + content rows 0..3 are unchanged
        let n = (2 + 3) * 8;
        assert_eq!(&t.value(oa.hidden)[..n], &t.value(ob.hidden)[..n]);
        assert_ne!(&t.value(oa.hidden)[n..], &t.value(ob.hidden)[n..]);
    }

    #[test]
    fn positions_table_first_row() {
        let pe = sinusoidal_positions(3, 4);
        assert_eq!(&pe[..4], &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe[4] - 1f64.sin()).abs() < 1e-15);
    }
}
