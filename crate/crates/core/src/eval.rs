//! Evaluation, parameter accounting and ablation runners.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::{PreparedData, WindowPair};
use crate::encoders::DatasetDescription;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, UniCastModel};
use crate::train::{mse_loss, train_observed, TrainConfig};
use crate::transformer::{resolve_schedule, PromptLocation, PromptSchedule};

/// Mean per-window MSE in standardized space.
pub fn evaluate(model: &UniCastModel, pairs: &[WindowPair], description: &DatasetDescription) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Input("evaluation set is empty".into()));
    }
    // Text rows depend only on the description; compute them once and
    // replay them as a constant on each window's tape.
    let text = {
        let mut tape = Tape::new(&model.store);
        model.encode_text(&mut tape, description)?.map(|v| tape.to_tensor(v))
    };
    let mut total = 0.0;
    for w in pairs {
        let mut tape = Tape::new(&model.store);
        let rows = match &text {
            Some(t) => Some(tape.constant(t.shape(), t.data().to_vec())?),
            None => None,
        };
        let y = model.forecast(&mut tape, &w.context, rows)?;
        total += mse_loss(tape.value(y), &w.target)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Depth, width and prompt setup of one stack, for counting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentSpec {
    pub name: &'static str,
    pub num_layers: usize,
    pub width: usize,
    pub prompt_length: usize,
    pub schedule: PromptLocation,
}

impl ComponentSpec {
    pub const fn new(name: &'static str, num_layers: usize, width: usize, prompt_length: usize) -> Self {
        Self {
            name,
            num_layers,
            width,
            prompt_length,
            schedule: PromptLocation::All,
        }
    }

    pub fn prompt_params(&self) -> usize {
        let layers = resolve_schedule(PromptSchedule::new(self.schedule, self.num_layers)).len();
        layers * self.prompt_length * self.width
    }
}

// Depth and width of the real backbones, chosen so `count_trainable`
// reproduces every published trainable count in the efficiency table. For example
// Timer + CLIP: 12·10·768 + (768·1024 + 1024) + 8·4·1024 = 912,384.
pub const CLIP: ComponentSpec = ComponentSpec::new("CLIP", 12, 768, 10);
pub const BLIP: ComponentSpec = ComponentSpec::new("BLIP", 12, 768, 10);
pub const QWEN: ComponentSpec = ComponentSpec::new("Qwen", 28, 1536, 4);
pub const LLAMA: ComponentSpec = ComponentSpec::new("Llama", 32, 4096, 4);
pub const TIMER: ComponentSpec = ComponentSpec::new("Timer", 8, 1024, 4);
pub const CHRONOS: ComponentSpec = ComponentSpec::new("Chronos", 12, 768, 4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArchSpec {
    pub tsfm: ComponentSpec,
    pub vision: Option<ComponentSpec>,
    pub text: Option<ComponentSpec>,
}

impl ArchSpec {
    /// Desk-scale dimensions of a model config.
    pub fn from_model_config(cfg: &ModelConfig) -> Self {
        let comp = |name, d: &crate::model::EncoderDims| ComponentSpec {
            name,
            num_layers: d.num_layers,
            width: d.d_model,
            prompt_length: d.prompt_length,
            schedule: d.schedule,
        };
        Self {
            tsfm: comp("tsfm", &cfg.tsfm.dims),
            vision: cfg.vision.as_ref().map(|v| comp("vision", &v.dims)),
            text: cfg.text.as_ref().map(|t| comp("text", &t.dims)),
        }
    }

    pub fn label(&self) -> String {
        let v = self.vision.map_or("×", |c| c.name);
        let t = self.text.map_or("×", |c| c.name);
        format!("{} + {v} + {t}", self.tsfm.name)
    }
}

/// Trainable parameters outside the forecast head: prompts in every
/// scheduled layer, plus one biased `d_src → d_ts` interaction layer per
/// extra modality.
pub fn count_trainable(spec: &ArchSpec) -> usize {
    let d_ts = spec.tsfm.width;
    let encoder = |c: &ComponentSpec| c.prompt_params() + c.width * d_ts + d_ts;
    spec.tsfm.prompt_params()
        + spec.vision.as_ref().map_or(0, encoder)
        + spec.text.as_ref().map_or(0, encoder)
}

/// Round to two decimals, as the published percentages are.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub label: String,
    pub trainable: usize,
    pub total: usize,
    /// `trainable / total`, percent, two decimals.
    pub trainable_ratio: f64,
    /// `trainable / backbone_total`, percent, two decimals.
    pub relative: f64,
}

pub fn efficiency_row(label: impl Into<String>, trainable: usize, total: usize, backbone_total: usize) -> Result<EfficiencyRow> {
    if total == 0 || backbone_total == 0 {
        return Err(Error::Input("parameter totals must be positive".into()));
    }
    Ok(EfficiencyRow {
        label: label.into(),
        trainable,
        total,
        trainable_ratio: round2(100.0 * trainable as f64 / total as f64),
        relative: round2(100.0 * trainable as f64 / backbone_total as f64),
    })
}

/// One published configuration: architecture plus the published total
/// parameter count of the assembled model, which is taken as given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedConfig {
    pub arch: ArchSpec,
    pub total: usize,
}

const fn cfg(tsfm: ComponentSpec, vision: Option<ComponentSpec>, text: Option<ComponentSpec>, total: usize) -> PublishedConfig {
    PublishedConfig {
        arch: ArchSpec { tsfm, vision, text },
        total,
    }
}

pub const TIMER_TOTAL: usize = 84_142_080;
pub const CHRONOS_TOTAL: usize = 205_292_928;

/// Published totals per configuration, in table order.
pub const PUBLISHED: [PublishedConfig; 13] = [
    cfg(TIMER, Some(CLIP), None, 172_510_464),
    cfg(TIMER, Some(BLIP), None, 171_144_960),
    cfg(TIMER, None, Some(QWEN), 1_629_635_072),
    cfg(TIMER, None, Some(LLAMA), 6_696_238_080),
    cfg(TIMER, Some(CLIP), Some(QWEN), 1_717_970_688),
    cfg(TIMER, Some(CLIP), Some(LLAMA), 6_784_573_696),
    cfg(TIMER, Some(BLIP), Some(QWEN), 1_716_605_184),
    cfg(TIMER, Some(BLIP), Some(LLAMA), 6_783_208_192),
    cfg(CHRONOS, Some(CLIP), None, 293_468_544),
    cfg(CHRONOS, Some(BLIP), None, 292_103_040),
    cfg(CHRONOS, None, Some(QWEN), 1_750_396_544),
    cfg(CHRONOS, Some(CLIP), Some(QWEN), 1_838_535_296),
    cfg(CHRONOS, Some(BLIP), Some(LLAMA), 6_903_117_440),
];

fn backbone_total(tsfm: &ComponentSpec) -> Option<usize> {
    match tsfm.name {
        "Timer" => Some(TIMER_TOTAL),
        "Chronos" => Some(CHRONOS_TOTAL),
        _ => None,
    }
}

/// The full efficiency table: a full fine-tune row per backbone followed
/// by its prompt-tuned configurations.
pub fn efficiency_report() -> Result<Vec<EfficiencyRow>> {
    let mut rows = Vec::new();
    for tsfm in [TIMER, CHRONOS] {
        let base = backbone_total(&tsfm).expect("preset backbone");
        rows.push(efficiency_row(format!("{} (full fine-tune)", tsfm.name), base, base, base)?);
        for p in PUBLISHED.iter().filter(|p| p.arch.tsfm == tsfm) {
            rows.push(efficiency_row(p.arch.label(), count_trainable(&p.arch), p.total, base)?);
        }
    }
    Ok(rows)
}

/// Thousands separators, `912384 → "912,384"`.
pub fn group_digits(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn efficiency_table_text(rows: &[EfficiencyRow]) -> String {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                group_digits(r.trainable),
                group_digits(r.total),
                format!("{:.2}%", r.trainable_ratio),
                format!("{:.2}%", r.relative),
            ]
        })
        .collect();
    aligned(&["configuration", "trainable", "total", "trainable ratio", "relative"], &table)
}

pub fn efficiency_table_csv(rows: &[EfficiencyRow]) -> String {
    let mut out = String::from("configuration,trainable,total,trainable_ratio_pct,relative_pct\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.2},{:.2}",
            r.label, r.trainable, r.total, r.trainable_ratio, r.relative
        );
    }
    out
}

/// Left-aligned first column, right-aligned numbers.
fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - cell.chars().count();
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Modality,
    Location,
    Length,
    Epochs,
    Volume,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modality" => Ok(AblationAxis::Modality),
            "location" => Ok(AblationAxis::Location),
            "length" => Ok(AblationAxis::Length),
            "epochs" => Ok(AblationAxis::Epochs),
            "volume" => Ok(AblationAxis::Volume),
            _ => Err(Error::Config(format!(
                "unknown ablation axis `{s}` (modality, location, length, epochs, volume)"
            ))),
        }
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationAxis::Modality => "modality",
            AblationAxis::Location => "location",
            AblationAxis::Length => "length",
            AblationAxis::Epochs => "epochs",
            AblationAxis::Volume => "volume",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Vision,
    Text,
    Tsfm,
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vision" => Ok(Component::Vision),
            "text" => Ok(Component::Text),
            "tsfm" => Ok(Component::Tsfm),
            _ => Err(Error::Config(format!("unknown component `{s}` (vision, text, tsfm)"))),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Vision => "vision",
            Component::Text => "text",
            Component::Tsfm => "tsfm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Level {
    Modality { vision: bool, text: bool },
    Location { location: PromptLocation },
    Length { component: Component, length: usize },
    Epochs { epochs: usize },
    Volume { fraction: f64 },
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Level::Modality { vision, text } => f.write_str(match (vision, text) {
                (false, false) => "none",
                (true, false) => "V",
                (false, true) => "T",
                (true, true) => "V+T",
            }),
            Level::Location { location } => write!(f, "{location}"),
            Level::Length { component, length } => write!(f, "{component}={length}"),
            Level::Epochs { epochs } => write!(f, "{epochs}"),
            Level::Volume { fraction } => write!(f, "{fraction}"),
        }
    }
}

pub const LENGTH_LEVELS: [usize; 3] = [4, 10, 16];
pub const VOLUME_LEVELS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub axis: AblationAxis,
    pub levels: Vec<Level>,
    pub seed: u64,
}

impl AblationGrid {
    /// Default levels for `axis`. `component` restricts the length sweep
    /// to one stack; otherwise all three are swept in turn. `epochs` is
    /// the length of the epoch curve.
    pub fn default_for(axis: AblationAxis, component: Option<Component>, epochs: usize, seed: u64) -> Self {
        let levels = match axis {
            AblationAxis::Modality => [(false, false), (true, false), (false, true), (true, true)]
                .into_iter()
                .map(|(vision, text)| Level::Modality { vision, text })
                .collect(),
            AblationAxis::Location => PromptLocation::ALL_VARIANTS
                .into_iter()
                .map(|location| Level::Location { location })
                .collect(),
            AblationAxis::Length => {
                let comps = match component {
                    Some(c) => vec![c],
                    None => vec![Component::Tsfm, Component::Vision, Component::Text],
                };
                comps
                    .into_iter()
                    .flat_map(|component| LENGTH_LEVELS.map(|length| Level::Length { component, length }))
                    .collect()
            }
            AblationAxis::Epochs => (1..=epochs).map(|epochs| Level::Epochs { epochs }).collect(),
            AblationAxis::Volume => VOLUME_LEVELS.map(|fraction| Level::Volume { fraction }).to_vec(),
        };
        Self { axis, levels, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("ablation grid has no levels".into()));
        }
        let fits = |l: &Level| {
            matches!(
                (self.axis, l),
                (AblationAxis::Modality, Level::Modality { .. })
                    | (AblationAxis::Location, Level::Location { .. })
                    | (AblationAxis::Length, Level::Length { .. })
                    | (AblationAxis::Epochs, Level::Epochs { .. })
                    | (AblationAxis::Volume, Level::Volume { .. })
            )
        };
        if let Some(l) = self.levels.iter().find(|l| !fits(l)) {
            return Err(Error::Config(format!("level {l} does not belong on the {} axis", self.axis)));
        }
        Ok(())
    }
}

/// Everything a training run needs besides the level being varied.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: PreparedData,
    pub description: DatasetDescription,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub level: String,
    /// Validation and test MSE before training.
    pub zs_val_mse: Option<f64>,
    pub zs_test_mse: Option<f64>,
    pub val_mse: Option<f64>,
    pub test_mse: Option<f64>,
    /// Prompts, interaction layers and head.
    pub trainable_params: usize,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub axis: AblationAxis,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn opt4(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.4}"))
}

impl RunReport {
    pub fn row(&self, level: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.level == level)
    }

    /// Deterministic metrics: no wall-clock column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,level,zs_val_mse,zs_test_mse,val_mse,test_mse,trainable_params,error\n");
        for r in &self.rows {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.axis,
                r.level,
                opt(r.zs_val_mse),
                opt(r.zs_test_mse),
                opt(r.val_mse),
                opt(r.test_mse),
                r.trainable_params,
                err
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.level.clone(),
                    opt4(r.zs_val_mse),
                    opt4(r.zs_test_mse),
                    opt4(r.val_mse),
                    opt4(r.test_mse),
                    group_digits(r.trainable_params),
                    format!("{:.1}", r.seconds),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        let mut out = format!("{} / {} ablation, seed {}\n\n", self.experiment, self.axis, self.seed);
        out.push_str(&aligned(
            &["level", "zs val", "zs test", "val", "test", "trainable", "seconds", "error"],
            &rows,
        ));
        out
    }

    /// Val MSE against the numeric level, for axes that have one.
    pub fn curve(&self) -> Option<Vec<(f64, f64)>> {
        if !matches!(self.axis, AblationAxis::Epochs | AblationAxis::Volume) {
            return None;
        }
        Some(
            self.rows
                .iter()
                .filter_map(|r| Some((r.level.parse::<f64>().ok()?, r.val_mse?)))
                .collect(),
        )
    }

    /// Write `{experiment}_{timestamp}_{seed}` with `.txt`, `.csv`,
    /// `.json` and, for curve axes, `.svg` extensions. Returns the paths.
    pub fn write_all(&self, dir: &Path, timestamp: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = format!("{}_{}_{}", self.experiment, timestamp, self.seed);
        let mut files = vec![
            ("txt", self.to_text()),
            ("csv", self.to_csv()),
            ("json", serde_json::to_string_pretty(self)?),
        ];
        if let Some(points) = self.curve() {
            let x_label = match self.axis {
                AblationAxis::Epochs => "epoch",
                _ => "training data fraction",
            };
            let svg = line_chart_svg(
                &format!("{} ablation", self.axis),
                x_label,
                "validation MSE",
                &[(format!("seed {}", self.seed), points)],
            );
            files.push(("svg", svg));
        }
        let mut paths = Vec::new();
        for (ext, body) in files {
            let p = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// Model config for one level of the grid.
pub fn level_config(base: &ModelConfig, level: Level) -> ModelConfig {
    let mut cfg = base.clone();
    match level {
        Level::Modality { vision, text } => {
            let full = ModelConfig::desk(base.context_length);
            cfg.vision = vision.then(|| base.vision.or(full.vision)).flatten();
            cfg.text = text.then(|| base.text.or(full.text)).flatten();
        }
        Level::Location { location } => {
            cfg.tsfm.dims.schedule = location;
            if let Some(v) = cfg.vision.as_mut() {
                v.dims.schedule = location;
            }
            if let Some(t) = cfg.text.as_mut() {
                t.dims.schedule = location;
            }
        }
        Level::Length { component, length } => match component {
            Component::Tsfm => cfg.tsfm.dims.prompt_length = length,
            Component::Vision => {
                if let Some(v) = cfg.vision.as_mut() {
                    v.dims.prompt_length = length;
                }
            }
            Component::Text => {
                if let Some(t) = cfg.text.as_mut() {
                    t.dims.prompt_length = length;
                }
            }
        },
        Level::Epochs { .. } | Level::Volume { .. } => {}
    }
    cfg
}

fn trainable_params(model: &UniCastModel) -> usize {
    let ids: Vec<_> = model.trainable_ids().into_iter().collect();
    model.store.num_elements(&ids)
}

fn failed(level: String, error: String, started: Instant) -> ResultRow {
    log::warn!("level {level} failed: {error}");
    ResultRow {
        level,
        zs_val_mse: None,
        zs_test_mse: None,
        val_mse: None,
        test_mse: None,
        trainable_params: 0,
        seconds: started.elapsed().as_secs_f64(),
        error: Some(error),
    }
}

/// Train and evaluate one level: zero-shot scores, training, final scores.
fn run_level(exp: &Experiment, level: Level, seed: u64) -> Result<ResultRow> {
    let started = Instant::now();
    let cfg = level_config(&exp.model, level);
    let mut model = UniCastModel::build(cfg, seed)?;
    let (val, test) = (&exp.data.val.pairs, &exp.data.test.pairs);
    let zs_val = evaluate(&model, val, &exp.description)?;
    let zs_test = evaluate(&model, test, &exp.description)?;
    let mut tc = exp.train.clone();
    tc.seed = seed;
    if let Level::Volume { fraction } = level {
        tc.data_fraction = fraction;
    }
    let history = crate::train::train(&mut model, &exp.data.train.pairs, val, &exp.description, &tc)?;
    Ok(ResultRow {
        level: level.to_string(),
        zs_val_mse: Some(zs_val),
        zs_test_mse: Some(zs_test),
        val_mse: history.final_val_mse(),
        test_mse: Some(evaluate(&model, test, &exp.description)?),
        trainable_params: trainable_params(&model),
        seconds: started.elapsed().as_secs_f64(),
        error: None,
    })
}

/// One training run as long as the longest epoch level, scored after
/// every epoch.
fn run_epoch_curve(exp: &Experiment, grid: &AblationGrid) -> Vec<ResultRow> {
    let started = Instant::now();
    let max = grid
        .levels
        .iter()
        .filter_map(|l| match l {
            Level::Epochs { epochs } => Some(*epochs),
            _ => None,
        })
        .max()
        .unwrap_or(1);
    let wanted: Vec<usize> = grid
        .levels
        .iter()
        .filter_map(|l| match l {
            Level::Epochs { epochs } => Some(*epochs),
            _ => None,
        })
        .collect();
    let mut rows = Vec::new();
    let outcome = (|| -> Result<()> {
        let mut model = UniCastModel::build(exp.model.clone(), grid.seed)?;
        let (val, test) = (&exp.data.val.pairs, &exp.data.test.pairs);
        let zs_val = evaluate(&model, val, &exp.description)?;
        let zs_test = evaluate(&model, test, &exp.description)?;
        let params = trainable_params(&model);
        let mut tc = exp.train.clone();
        tc.seed = grid.seed;
        tc.epochs = max;
        let history = train_observed(&mut model, &exp.data.train.pairs, val, &exp.description, &tc, |m, rec| {
            if wanted.contains(&rec.epoch) {
                rows.push(ResultRow {
                    level: rec.epoch.to_string(),
                    zs_val_mse: Some(zs_val),
                    zs_test_mse: Some(zs_test),
                    val_mse: Some(rec.val_mse),
                    test_mse: Some(evaluate(m, test, &exp.description)?),
                    trainable_params: params,
                    seconds: started.elapsed().as_secs_f64(),
                    error: None,
                });
            }
            Ok(())
        });
        history.map(|_| ()).map_err(Error::from)
    })();
    if let Err(e) = outcome {
        let done = rows.len();
        for &epochs in wanted.iter().filter(|&&e| e > done) {
            rows.push(failed(epochs.to_string(), e.to_string(), started));
        }
    }
    rows
}

/// Run every level of `grid` on `exp` with the grid's seed. A failing
/// level is recorded in its row and the rest still run.
pub fn run_ablation(grid: &AblationGrid, exp: &Experiment) -> Result<RunReport> {
    grid.validate()?;
    let rows = if grid.axis == AblationAxis::Epochs {
        run_epoch_curve(exp, grid)
    } else {
        grid.levels
            .iter()
            .map(|&level| {
                let started = Instant::now();
                log::info!("{} ablation: level {level}", grid.axis);
                run_level(exp, level, grid.seed)
                    .unwrap_or_else(|e| failed(level.to_string(), e.to_string(), started))
            })
            .collect()
    };
    Ok(RunReport {
        experiment: exp.name.clone(),
        axis: grid.axis,
        seed: grid.seed,
        rows,
    })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Self-contained SVG line chart, one polyline per named series.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (480.0, 320.0);
    let (left, right, top, bottom) = (64.0, 16.0, 32.0, 48.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, xml_escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom,
        h - bottom
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(fx), h - bottom + 16.0, trim_num(fx));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, sy(fy) + 4.0, trim_num(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (left + w - right) / 2.0, h - 10.0, xml_escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        xml_escape(y_label)
    );
    for (k, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - right - 100.0,
            top + 14.0 * (k + 1) as f64,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim_num(x: f64) -> String {
    let s = format!("{x:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
