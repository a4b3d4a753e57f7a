//! The full forecaster: optional vision and text encoders projected into
//! the time-series width, fused ahead of the patch embeddings, and run
//! through a prompted frozen time-series stack with a linear head.
//!
//! Row layout of the fused sequence entering the time-series stack:
//!
//! ```text
//! [ O_v' (vision rows) ; O_t' (text rows) ; O_ts (one row per patch) ]
//! ```
//!
//! Time-series prompts are prepended on top of that inside the stack. The
//! head reads only the final `C / patch_len` rows, i.e. the time-series
//! positions, and emits `patch_len` values per row, giving `H = C`.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encoders::{tokenize, DatasetDescription, TextEncoder, VisionEncoder};
use crate::error::{Error, Result};
use crate::render::render_series;
use crate::rng::Rng;
use crate::tensor::{seeded_init, Init, ParamId, ParamStore, Tensor};
use crate::transformer::{
    affine, check_finite, layer_forward, sinusoidal_positions, PromptLocation, PromptSet, Stack,
    StackConfig,
};

/// Backbone flavour of the time-series stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TsfmVariant {
    /// Decoder-only, causal attention.
    #[default]
    TimerLike,
    /// Bidirectional encoder stack.
    ChronosLike,
}

impl TsfmVariant {
    pub fn causal(self) -> bool {
        matches!(self, TsfmVariant::TimerLike)
    }
}

impl std::str::FromStr for TsfmVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "timer_like" | "timer" => Ok(TsfmVariant::TimerLike),
            "chronos_like" | "chronos" => Ok(TsfmVariant::ChronosLike),
            _ => Err(Error::Config(format!("unknown tsfm variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderDims {
    pub num_layers: usize,
    pub d_model: usize,
    pub num_heads: usize,
    pub prompt_length: usize,
    #[serde(default)]
    pub schedule: PromptLocation,
}

impl EncoderDims {
    fn stack_config(&self, causal: bool) -> StackConfig {
        StackConfig {
            num_layers: self.num_layers,
            d_model: self.d_model,
            num_heads: self.num_heads,
            causal,
            prompt_length: self.prompt_length,
            schedule: self.schedule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisionConfig {
    #[serde(flatten)]
    pub dims: EncoderDims,
    pub patch_size: usize,
    pub image_size: usize,
    pub line_thickness: usize,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            dims: EncoderDims {
                num_layers: 2,
                d_model: 32,
                num_heads: 4,
                prompt_length: 10,
                schedule: PromptLocation::All,
            },
            patch_size: 8,
            image_size: 64,
            line_thickness: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextConfig {
    #[serde(flatten)]
    pub dims: EncoderDims,
    pub max_text_len: usize,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            dims: EncoderDims {
                num_layers: 2,
                d_model: 48,
                num_heads: 4,
                prompt_length: 4,
                schedule: PromptLocation::All,
            },
            max_text_len: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsfmConfig {
    #[serde(flatten)]
    pub dims: EncoderDims,
    #[serde(default)]
    pub variant: TsfmVariant,
}

impl Default for TsfmConfig {
    fn default() -> Self {
        Self {
            dims: EncoderDims {
                num_layers: 2,
                d_model: 64,
                num_heads: 4,
                prompt_length: 4,
                schedule: PromptLocation::All,
            },
            variant: TsfmVariant::TimerLike,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub context_length: usize,
    /// Time steps per patch; `None` picks [`default_patch_len`].
    #[serde(default)]
    pub patch_len: Option<usize>,
    #[serde(default)]
    pub tsfm: TsfmConfig,
    #[serde(default)]
    pub vision: Option<VisionConfig>,
    #[serde(default)]
    pub text: Option<TextConfig>,
    #[serde(default = "default_prompt_init")]
    pub prompt_init: Init,
    #[serde(default = "default_prompt_init")]
    pub interaction_init: Init,
    #[serde(default = "default_prompt_init")]
    pub head_init: Init,
}

fn default_prompt_init() -> Init {
    Init::Gaussian { sigma: 0.02 }
}

impl ModelConfig {
    /// Desk-scale multimodal bundle for context length `c`.
    pub fn desk(c: usize) -> Self {
        Self {
            context_length: c,
            patch_len: None,
            tsfm: TsfmConfig::default(),
            vision: Some(VisionConfig::default()),
            text: Some(TextConfig::default()),
            prompt_init: default_prompt_init(),
            interaction_init: default_prompt_init(),
            head_init: default_prompt_init(),
        }
    }

    pub fn unimodal(c: usize) -> Self {
        Self {
            vision: None,
            text: None,
            ..Self::desk(c)
        }
    }

    pub fn resolved_patch_len(&self) -> usize {
        self.patch_len
            .unwrap_or_else(|| default_patch_len(self.context_length))
    }

    pub fn num_patches(&self) -> usize {
        self.context_length / self.resolved_patch_len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.context_length;
        let p = self.resolved_patch_len();
        if c < 2 {
            return Err(Error::Config(format!("context_length {c} must be at least 2")));
        }
        if p == 0 || c % p != 0 {
            return Err(Error::Config(format!(
                "context_length {c} is not divisible by patch_len {p}"
            )));
        }
        if let Some(v) = &self.vision {
            if v.patch_size == 0 || v.image_size % v.patch_size != 0 {
                return Err(Error::Config(format!(
                    "vision image_size {} not divisible by patch_size {}",
                    v.image_size, v.patch_size
                )));
            }
            if v.image_size < crate::render::MIN_SIDE {
                return Err(Error::Config(format!(
                    "vision image_size {} below minimum {}",
                    v.image_size,
                    crate::render::MIN_SIDE
                )));
            }
        }
        if let Some(t) = &self.text {
            if t.max_text_len == 0 {
                return Err(Error::Config("text max_text_len must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Largest divisor of `c` not exceeding `c / 4` (at least 1), so the
/// context splits into four or more equal patches with no padding.
pub fn default_patch_len(c: usize) -> usize {
    let cap = (c / 4).max(1);
    (1..=cap).rev().find(|p| c % p == 0).unwrap_or(1)
}

/// Frozen `f_patch`: linear map from `patch_len` steps to `d_ts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEmbedder {
    pub patch_len: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl PatchEmbedder {
    pub fn init(store: &mut ParamStore, patch_len: usize, d: usize, rng: &mut Rng) -> Self {
        let w = seeded_init(
            &[patch_len, d],
            Init::Gaussian {
                sigma: 1.0 / (patch_len as f64).sqrt(),
            },
            rng,
        );
        let b = seeded_init(&[d], Init::Gaussian { sigma: 0.02 }, rng);
        Self {
            patch_len,
            weight: store.add("tsfm.patch_embed.weight", w),
            bias: store.add("tsfm.patch_embed.bias", b),
        }
    }

    /// `O_ts^0`: one row per non-overlapping patch, positions added.
    pub fn forward(&self, tape: &mut Tape, x_ts: &[f64]) -> Result<Var> {
        let p = self.patch_len;
        if x_ts.is_empty() || x_ts.len() % p != 0 {
            return Err(Error::dim(
                "patch_embed",
                format!("series length {} not divisible by patch_len {p}", x_ts.len()),
            ));
        }
        let n = x_ts.len() / p;
        let x = tape.constant(&[n, p], x_ts.to_vec())?;
        let h = affine(tape, x, self.weight, self.bias)?;
        let d = tape.dims(h).1;
        let pe = tape.constant(&[n, d], sinusoidal_positions(n, d))?;
        tape.add(h, pe)
    }
}

/// Trainable affine projection from an encoder width into `d_ts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_src: usize,
    pub d_ts: usize,
}

impl InteractionLayer {
    pub fn init(store: &mut ParamStore, name: &str, d_src: usize, d_ts: usize, init: Init, rng: &mut Rng) -> Self {
        let w = seeded_init(&[d_src, d_ts], init, rng).with_requires_grad(true);
        let b = Tensor::zeros(&[d_ts]).with_requires_grad(true);
        Self {
            weight: store.add(format!("{name}.weight"), w),
            bias: store.add(format!("{name}.bias"), b),
            d_src,
            d_ts,
        }
    }

    pub fn num_params(&self) -> usize {
        self.d_src * self.d_ts + self.d_ts
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

/// Row-wise affine map of an encoder output into the time-series width.
pub fn project_modality(tape: &mut Tape, o: Var, layer: &InteractionLayer) -> Result<Var> {
    let width = tape.dims(o).1;
    if width != layer.d_src {
        return Err(Error::dim(
            "project_modality",
            format!("input width {width}, interaction layer expects {}", layer.d_src),
        ));
    }
    affine(tape, o, layer.weight, layer.bias)
}

/// Row ranges of each modality inside the fused sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    pub vision: Range<usize>,
    pub text: Range<usize>,
    pub series: Range<usize>,
}

/// Concatenate `[vision; text; series]`; absent modalities add no rows.
pub fn fuse(tape: &mut Tape, vision: Option<Var>, text: Option<Var>, series: Var) -> Result<(Var, Segments)> {
    let rows = |tape: &Tape, v: Option<Var>| v.map_or(0, |v| tape.dims(v).0);
    let nv = rows(tape, vision);
    let nt = rows(tape, text);
    let ns = tape.dims(series).0;
    let parts: Vec<Var> = vision.into_iter().chain(text).chain([series]).collect();
    let fused = if parts.len() == 1 {
        series
    } else {
        tape.concat_rows(&parts)?
    };
    Ok((
        fused,
        Segments {
            vision: 0..nv,
            text: nv..nv + nt,
            series: nv + nt..nv + nt + ns,
        },
    ))
}

/// Trainable `f_head`: `d_ts → patch_len` per time-series row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastHead {
    pub weight: ParamId,
    pub bias: ParamId,
    pub patch_len: usize,
}

impl ForecastHead {
    pub fn init(store: &mut ParamStore, d: usize, patch_len: usize, init: Init, rng: &mut Rng) -> Self {
        let w = seeded_init(&[d, patch_len], init, rng).with_requires_grad(true);
        let b = Tensor::zeros(&[patch_len]).with_requires_grad(true);
        Self {
            weight: store.add("head.weight", w),
            bias: store.add("head.bias", b),
            patch_len,
        }
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }

    /// Map `n × d` series rows to a flat forecast of `n · patch_len` values.
    pub fn forward(&self, tape: &mut Tape, rows: Var) -> Result<Var> {
        let n = tape.dims(rows).0;
        let y = affine(tape, rows, self.weight, self.bias)?;
        tape.reshape(y, &[n * self.patch_len])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniCastModel {
    pub config: ModelConfig,
    pub seed: u64,
    pub store: ParamStore,
    pub vision: Option<VisionEncoder>,
    pub text: Option<TextEncoder>,
    pub vision_proj: Option<InteractionLayer>,
    pub text_proj: Option<InteractionLayer>,
    pub patch: PatchEmbedder,
    pub tsfm: Stack,
    pub ts_prompts: PromptSet,
    pub head: ForecastHead,
}

const MODEL_FORMAT: &str = "unicast-model/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    model: UniCastModel,
}

impl UniCastModel {
    /// Build a model from `config`. Every component draws from its own
    /// sub-stream of `seed`, so the frozen time-series backbone is the same
    /// whichever modalities are switched on.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let d_ts = config.tsfm.dims.d_model;
        let patch_len = config.resolved_patch_len();

        let mut frozen_ts = Rng::stream(seed, "frozen.tsfm");
        let patch = PatchEmbedder::init(&mut store, patch_len, d_ts, &mut frozen_ts);
        let tsfm_cfg = config.tsfm.dims.stack_config(config.tsfm.variant.causal());
        let tsfm = Stack::init(&mut store, "tsfm", tsfm_cfg, &mut frozen_ts)?;

        let (vision, vision_proj) = match &config.vision {
            Some(v) => {
                let enc = VisionEncoder::init(
                    &mut store,
                    v.patch_size,
                    v.dims.stack_config(false),
                    &mut Rng::stream(seed, "frozen.vision"),
                    &mut Rng::stream(seed, "prompts.vision"),
                    config.prompt_init,
                )?;
                let proj = InteractionLayer::init(
                    &mut store,
                    "interaction.vision",
                    v.dims.d_model,
                    d_ts,
                    config.interaction_init,
                    &mut Rng::stream(seed, "interaction.vision"),
                );
                (Some(enc), Some(proj))
            }
            None => (None, None),
        };
        let (text, text_proj) = match &config.text {
            Some(t) => {
                let enc = TextEncoder::init(
                    &mut store,
                    t.max_text_len,
                    t.dims.stack_config(false),
                    &mut Rng::stream(seed, "frozen.text"),
                    &mut Rng::stream(seed, "prompts.text"),
                    config.prompt_init,
                )?;
                let proj = InteractionLayer::init(
                    &mut store,
                    "interaction.text",
                    t.dims.d_model,
                    d_ts,
                    config.interaction_init,
                    &mut Rng::stream(seed, "interaction.text"),
                );
                (Some(enc), Some(proj))
            }
            None => (None, None),
        };

        let ts_prompts = PromptSet::init(
            &mut store,
            "tsfm",
            config.tsfm.dims.prompt_length,
            d_ts,
            tsfm_cfg.prompt_schedule(),
            config.prompt_init,
            &mut Rng::stream(seed, "prompts.tsfm"),
        );
        let head = ForecastHead::init(
            &mut store,
            d_ts,
            patch_len,
            config.head_init,
            &mut Rng::stream(seed, "head"),
        );

        Ok(Self {
            config,
            seed,
            store,
            vision,
            text,
            vision_proj,
            text_proj,
            patch,
            tsfm,
            ts_prompts,
            head,
        })
    }

    pub fn context_length(&self) -> usize {
        self.config.context_length
    }

    pub fn horizon(&self) -> usize {
        self.config.context_length
    }

    /// Tensors the optimizer may touch: every prompt set, both interaction
    /// layers and the head.
    pub fn trainable_ids(&self) -> BTreeSet<ParamId> {
        let mut ids = BTreeSet::new();
        if let Some(v) = &self.vision {
            ids.extend(v.prompts.ids());
        }
        if let Some(t) = &self.text {
            ids.extend(t.prompts.ids());
        }
        ids.extend(self.ts_prompts.ids());
        for layer in self.vision_proj.iter().chain(&self.text_proj) {
            ids.extend(layer.ids());
        }
        ids.extend(self.head.ids());
        ids
    }

    pub fn prompt_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        if let Some(v) = &self.vision {
            ids.extend(v.prompts.ids());
        }
        if let Some(t) = &self.text {
            ids.extend(t.prompts.ids());
        }
        ids.extend(self.ts_prompts.ids());
        ids
    }

    /// Encode the dataset description and project it into the series
    /// width. The result depends only on the text, so a batch shares it.
    pub fn encode_text(&self, tape: &mut Tape, description: &DatasetDescription) -> Result<Option<Var>> {
        match (&self.text, &self.text_proj) {
            (Some(enc), Some(proj)) => {
                let ids = tokenize(description.as_str(), enc.max_text_len)?;
                let o = enc.forward(tape, &ids)?;
                Ok(Some(project_modality(tape, o, proj)?))
            }
            _ => Ok(None),
        }
    }

    /// Forecast for one context window given the already-projected text rows.
    pub fn forecast(&self, tape: &mut Tape, x_ts: &[f64], text_rows: Option<Var>) -> Result<Var> {
        let c = self.context_length();
        if x_ts.len() != c {
            return Err(Error::dim(
                "unicast_forward",
                format!("context has {} values, model expects {c}", x_ts.len()),
            ));
        }
        if x_ts.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                location: "input context".into(),
                detail: "non-finite value".into(),
            });
        }
        let vision_rows = match (&self.vision, &self.vision_proj, &self.config.vision) {
            (Some(enc), Some(proj), Some(vc)) => {
                let img = render_series(x_ts, vc.image_size, vc.image_size, vc.line_thickness)?;
                let o = enc.forward(tape, &img)?;
                Some(project_modality(tape, o, proj)?)
            }
            _ => None,
        };
        let series = self.patch.forward(tape, x_ts)?;
        let (fused, segments) = fuse(tape, vision_rows, text_rows, series)?;
        let out = self.tsfm.forward(tape, fused, &self.ts_prompts)?;
        let total = tape.dims(out.hidden).0;
        let n = segments.series.len();
        let rows = tape.slice_rows(out.hidden, total - n, n)?;
        let y = self.head.forward(tape, rows)?;
        check_finite(tape, y, || "forecast head".into())?;
        Ok(y)
    }

    /// The full pipeline for one window.
    pub fn unicast_forward(&self, tape: &mut Tape, x_ts: &[f64], description: &DatasetDescription) -> Result<Var> {
        let text = self.encode_text(tape, description)?;
        self.forecast(tape, x_ts, text)
    }

    /// Convenience inference on a fresh tape.
    pub fn predict(&self, x_ts: &[f64], description: &DatasetDescription) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.store);
        let y = self.unicast_forward(&mut tape, x_ts, description)?;
        Ok(tape.value(y).to_vec())
    }

    /// Time-series backbone alone: patch embedding, plain frozen layers, head.
    /// No prompts and no other modalities are involved.
    pub fn tsfm_forward_bare(&self, tape: &mut Tape, x_ts: &[f64]) -> Result<Var> {
        let mut h = self.patch.forward(tape, x_ts)?;
        let cfg = self.tsfm.config;
        for w in &self.tsfm.layers {
            h = layer_forward(tape, h, w, cfg.num_heads, cfg.causal)?;
        }
        self.head.forward(tape, h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        let json = serde_json::to_string(&file)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("unsupported model format `{}`", file.format),
            });
        }
        let model = file.model;
        model.check_consistency().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        Ok(model)
    }

    /// Structural checks after deserialization: every referenced tensor
    /// exists and the freeze flags match the trainable set.
    pub fn check_consistency(&self) -> Result<()> {
        self.config.validate()?;
        if self.vision.is_some() != self.vision_proj.is_some()
            || self.text.is_some() != self.text_proj.is_some()
        {
            return Err(Error::Config(
                "encoder and interaction layer presence disagree".into(),
            ));
        }
        let trainable = self.trainable_ids();
        if let Some(id) = trainable.iter().find(|id| id.index() >= self.store.len()) {
            return Err(Error::Config(format!("tensor id {} out of range", id.index())));
        }
        for id in self.store.ids() {
            let t = self.store.get(id);
            if t.requires_grad() != trainable.contains(&id) {
                return Err(Error::Config(format!(
                    "tensor `{}` has the wrong freeze flag",
                    self.store.name(id)
                )));
            }
            if !t.is_finite() {
                return Err(Error::Config(format!(
                    "tensor `{}` holds non-finite values",
                    self.store.name(id)
                )));
            }
        }
        Ok(())
    }
}
