//! Versioned TOML run configuration.
//!
//! One file describes a whole run: where the data comes from, the model,
//! the training recipe and a root seed. Unknown keys are rejected. Every
//! other seed in a run is derived from the root seed by purpose name, so
//! the single number reproduces every artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    generate, load_collection, prepare, preset, synthetic_meta, DatasetMeta, InputFormat, PreparedData,
    SeriesCollection, Standardization, SplitAxis, SynthKind, SynthSpec,
};
use crate::encoders::{builtin_descriptions, load_descriptions, DatasetDescription};
use crate::error::{Error, Result};
use crate::eval::Experiment;
use crate::model::{ModelConfig, TextConfig, TsfmConfig, VisionConfig};
use crate::rng::derive_seed;
use crate::tensor::Init;
use crate::train::TrainConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub kind: SynthKind,
    #[serde(default = "default_num_series")]
    pub num_series: usize,
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_num_series() -> usize {
    20
}
fn default_length() -> usize {
    400
}
fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// A benchmark preset name picks up its context length and
    /// preprocessing rules; any other name needs them spelled out, except
    /// for generated data.
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: InputFormat,
    #[serde(default)]
    pub synthetic: Option<SynthSection>,
    #[serde(default)]
    pub context_length: Option<usize>,
    #[serde(default)]
    pub standardization: Option<Standardization>,
    #[serde(default)]
    pub split_axis: Option<SplitAxis>,
    /// Text-modality input. Falls back to `descriptions_file`, then to the
    /// bundled descriptions, looked up by `name`.
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub descriptions_file: Option<PathBuf>,
    #[serde(default = "default_train_stride")]
    pub train_stride: usize,
}

fn default_name() -> String {
    "synthetic".into()
}
fn default_format() -> InputFormat {
    InputFormat::WideCsv
}
fn default_train_stride() -> usize {
    1
}

/// Context length used for generated data when none is given.
pub const SYNTHETIC_CONTEXT: usize = 32;

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            name: default_name(),
            path: None,
            format: default_format(),
            synthetic: Some(SynthSection {
                kind: SynthKind::SineMix,
                num_series: default_num_series(),
                length: default_length(),
                noise: default_noise(),
            }),
            context_length: None,
            standardization: None,
            split_axis: None,
            description: None,
            descriptions_file: None,
            train_stride: default_train_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub patch_len: Option<usize>,
    pub use_vision: bool,
    pub use_text: bool,
    pub tsfm: TsfmConfig,
    pub vision: VisionConfig,
    pub text: TextConfig,
    pub prompt_init: Init,
    pub interaction_init: Init,
    pub head_init: Init,
}

impl Default for ModelSection {
    fn default() -> Self {
        let desk = ModelConfig::desk(SYNTHETIC_CONTEXT);
        Self {
            patch_len: None,
            use_vision: true,
            use_text: true,
            tsfm: desk.tsfm,
            vision: desk.vision.unwrap_or_default(),
            text: desk.text.unwrap_or_default(),
            prompt_init: desk.prompt_init,
            interaction_init: desk.interaction_init,
            head_init: desk.head_init,
        }
    }
}

impl ModelSection {
    pub fn to_model_config(&self, context_length: usize) -> ModelConfig {
        ModelConfig {
            context_length,
            patch_len: self.patch_len,
            tsfm: self.tsfm,
            vision: self.use_vision.then_some(self.vision),
            text: self.use_text.then_some(self.text),
            prompt_init: self.prompt_init,
            interaction_init: self.interaction_init,
            head_init: self.head_init,
        }
    }
}

/// Training recipe without its seed, which comes from the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub lr_multiplier: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub data_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            lr_multiplier: t.lr_multiplier,
            epochs: t.epochs,
            batch_size: t.batch_size,
            weight_decay: t.weight_decay,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            data_fraction: t.data_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
}

fn default_experiment() -> String {
    "unicast".into()
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            experiment: default_experiment(),
            output_dir: None,
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

/// Sub-seeds of a run, one per purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub data: u64,
    pub model: u64,
    pub train: u64,
}

impl Seeds {
    pub fn from_root(seed: u64) -> Self {
        Self {
            data: derive_seed(seed, "run.data"),
            model: derive_seed(seed, "run.model"),
            train: derive_seed(seed, "run.train"),
        }
    }
}

impl RunConfig {
    /// Parse and validate. Relative paths inside the file are resolved
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset.path, &mut cfg.dataset.descriptions_file]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse without touching the file system.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(&e)))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// The config with every default filled in, as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_root(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match (&d.path, &d.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset: set either `path` or `synthetic`, not both".into(),
                ))
            }
            (None, None) => return Err(Error::Config("dataset.path: no data source given".into())),
            (Some(p), None) if !p.is_file() => {
                return Err(Error::Config(format!("dataset.path: file `{}` does not exist", p.display())))
            }
            _ => {}
        }
        if let Some(p) = &d.descriptions_file {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "dataset.descriptions_file: file `{}` does not exist",
                    p.display()
                )));
            }
        }
        if d.train_stride == 0 {
            return Err(Error::Config("dataset.train_stride must be positive".into()));
        }
        let meta = self.dataset_meta()?;
        self.model.to_model_config(meta.context_length).validate()?;
        self.train_config().validate()?;
        Ok(())
    }

    /// Context length and preprocessing: explicit fields win over the
    /// preset for `name`.
    pub fn dataset_meta(&self) -> Result<DatasetMeta> {
        let d = &self.dataset;
        let base = match preset(&d.name) {
            Some(p) => Some(p.meta()),
            None if d.synthetic.is_some() => Some(synthetic_meta(SYNTHETIC_CONTEXT)),
            None => None,
        };
        let missing = |field: &str| {
            Error::Config(format!(
                "dataset.{field}: required because `{}` is not a known dataset",
                d.name
            ))
        };
        Ok(DatasetMeta {
            frequency: base.as_ref().map_or("unknown".into(), |b| b.frequency.clone()),
            context_length: match (d.context_length, &base) {
                (Some(c), _) => c,
                (None, Some(b)) => b.context_length,
                (None, None) => return Err(missing("context_length")),
            },
            standardization: match (d.standardization, &base) {
                (Some(s), _) => s,
                (None, Some(b)) => b.standardization,
                (None, None) => return Err(missing("standardization")),
            },
            split_axis: match (d.split_axis, &base) {
                (Some(s), _) => s,
                (None, Some(b)) => b.split_axis,
                (None, None) => return Err(missing("split_axis")),
            },
            subsample: base.and_then(|b| b.subsample),
        })
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        Ok(self.model.to_model_config(self.dataset_meta()?.context_length))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            lr_multiplier: t.lr_multiplier,
            epochs: t.epochs,
            batch_size: t.batch_size,
            weight_decay: t.weight_decay,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            data_fraction: t.data_fraction,
            seed: self.seeds().train,
        }
    }

    /// Generated data uses the root seed itself, so `unicast synth` with
    /// the same seed writes the same series.
    pub fn synth_spec(&self) -> Option<SynthSpec> {
        self.dataset.synthetic.as_ref().map(|s| SynthSpec {
            num_series: s.num_series,
            length: s.length,
            kind: s.kind,
            noise: s.noise,
            seed: self.seed,
        })
    }

    pub fn load_collection(&self) -> Result<SeriesCollection> {
        let meta = self.dataset_meta()?;
        let d = &self.dataset;
        match (&d.path, self.synth_spec()) {
            (Some(p), _) => load_collection(p, d.format, &d.name, meta),
            (None, Some(spec)) => SeriesCollection::new(d.name.clone(), meta, generate(&spec)?),
            (None, None) => Err(Error::Config("dataset.path: no data source given".into())),
        }
    }

    pub fn description(&self) -> Result<DatasetDescription> {
        let d = &self.dataset;
        if let Some(text) = &d.description {
            return DatasetDescription::new(text.clone());
        }
        let table = match &d.descriptions_file {
            Some(p) => load_descriptions(p)?,
            None => builtin_descriptions(),
        };
        table.get(&d.name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "dataset.description: no description for `{}`; set one explicitly",
                d.name
            ))
        })
    }

    pub fn prepare_data(&self) -> Result<PreparedData> {
        let collection = self.load_collection()?;
        prepare(&collection, self.seeds().data, self.dataset.train_stride)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        Ok(Experiment {
            name: self.experiment.clone(),
            model: self.model_config()?,
            train: self.train_config(),
            data: self.prepare_data()?,
            description: self.description()?,
        })
    }
}

fn span_hint(e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => format!(" (at byte {})", span.start),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml("schema_version = 1\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.train_config().learning_rate, 2e-5);
        assert_eq!(cfg.model_config().unwrap().context_length, SYNTHETIC_CONTEXT);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.seed = 99;
        cfg.model.use_text = false;
        cfg.train.lr_multiplier = 250.0;
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected_with_their_name() {
        for text in [
            "schema_version = 1\nbogus = 2\n",
            "schema_version = 1\n[train]\nlearning_rat = 0.1\n",
            "schema_version = 1\n[model.tsfm]\nnum_layers = 2\nd_model = 8\nnum_heads = 2\nprompt_length = 1\nwidth = 3\n",
        ] {
            match RunConfig::from_toml(text) {
                Err(Error::Config(msg)) => assert!(msg.contains("unknown field"), "{msg}"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn wrong_schema_version() {
        assert!(matches!(RunConfig::from_toml("schema_version = 2\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("seed = 1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn missing_dataset_file_names_the_field() {
        let mut cfg = RunConfig::default();
        cfg.dataset.synthetic = None;
        cfg.dataset.path = Some("/nonexistent/series.csv".into());
        match cfg.validate() {
            Err(Error::Config(msg)) => assert!(msg.starts_with("dataset.path"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn presets_supply_context_length() {
        let mut cfg = RunConfig::default();
        cfg.dataset.name = "nn5_daily".into();
        let meta = cfg.dataset_meta().unwrap();
        assert_eq!(meta.context_length, 56);
        assert_eq!(meta.standardization, Standardization::PerWindow);
        assert!(cfg.description().unwrap().as_str().contains("withdrawn"));
        cfg.dataset.name = "mystery".into();
        cfg.dataset.synthetic = None;
        cfg.dataset.path = Some("x.csv".into());
        assert!(matches!(cfg.dataset_meta(), Err(Error::Config(m)) if m.contains("context_length")));
    }

    #[test]
    fn seeds_split_by_purpose() {
        let s = Seeds::from_root(5);
        assert_ne!(s.data, s.model);
        assert_ne!(s.model, s.train);
        assert_eq!(s, Seeds::from_root(5));
        assert_ne!(s, Seeds::from_root(6));
    }
}
