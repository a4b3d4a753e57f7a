//! Loading, splitting, windowing and standardizing series collections.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Below this a standard deviation counts as zero.
pub const MIN_STD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    /// Context window statistics, applied to context and target alike.
    PerWindow,
    /// Statistics of the full raw series.
    WholeSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitAxis {
    /// Cut every series in time.
    TimeAxis,
    /// Shuffle whole series, then partition them.
    SeriesAxis,
}

/// Dataset-specific reduction applied right after loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleRule {
    /// Keep the first 15,000 steps of each series.
    AuElecTruncate,
    /// Seeded shuffle, then keep 100 series.
    DominickSample,
}

impl SubsampleRule {
    pub const AU_ELEC_STEPS: usize = 15_000;
    pub const DOMINICK_SERIES: usize = 100;

    /// Collection name the rule belongs to.
    pub fn dataset(self) -> &'static str {
        match self {
            SubsampleRule::AuElecTruncate => "au_elec",
            SubsampleRule::DominickSample => "dominick",
        }
    }
}

/// Everything about a collection except the numbers themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub frequency: String,
    pub context_length: usize,
    pub standardization: Standardization,
    pub split_axis: SplitAxis,
    #[serde(default)]
    pub subsample: Option<SubsampleRule>,
}

impl DatasetMeta {
    pub fn horizon(&self) -> usize {
        self.context_length
    }
}

/// One named benchmark with its context length and preprocessing rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetPreset {
    pub name: &'static str,
    pub title: &'static str,
    pub frequency: &'static str,
    pub context_length: usize,
    pub standardization: Standardization,
    pub split_axis: SplitAxis,
    pub subsample: Option<SubsampleRule>,
}

impl DatasetPreset {
    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            frequency: self.frequency.to_string(),
            context_length: self.context_length,
            standardization: self.standardization,
            split_axis: self.split_axis,
            subsample: self.subsample,
        }
    }
}

use SplitAxis::{SeriesAxis, TimeAxis};
use Standardization::{PerWindow, WholeSeries};

/// The eight benchmarks. Short or constant-heavy collections are
/// shuffled by series and standardized over whole series; the long ones
/// are cut in time and standardized per window.
pub const PRESETS: [DatasetPreset; 8] = [
    DatasetPreset { name: "covid_deaths", title: "COVID-19 Deaths", frequency: "1D", context_length: 30, standardization: WholeSeries, split_axis: SeriesAxis, subsample: None },
    DatasetPreset { name: "nn5_daily", title: "NN5 Daily", frequency: "1D", context_length: 56, standardization: PerWindow, split_axis: TimeAxis, subsample: None },
    DatasetPreset { name: "car_parts", title: "Car Parts", frequency: "1M", context_length: 12, standardization: WholeSeries, split_axis: SeriesAxis, subsample: None },
    DatasetPreset { name: "au_elec", title: "Australian Electricity", frequency: "30min", context_length: 48, standardization: PerWindow, split_axis: TimeAxis, subsample: Some(SubsampleRule::AuElecTruncate) },
    DatasetPreset { name: "cif_2016", title: "CIF 2016", frequency: "1M", context_length: 12, standardization: WholeSeries, split_axis: SeriesAxis, subsample: None },
    DatasetPreset { name: "dominick", title: "Dominick", frequency: "1W", context_length: 8, standardization: PerWindow, split_axis: TimeAxis, subsample: Some(SubsampleRule::DominickSample) },
    DatasetPreset { name: "hospital", title: "Hospital", frequency: "1M", context_length: 12, standardization: WholeSeries, split_axis: SeriesAxis, subsample: None },
    DatasetPreset { name: "tourism_monthly", title: "Tourism Monthly", frequency: "1M", context_length: 24, standardization: WholeSeries, split_axis: SeriesAxis, subsample: None },
];

pub fn preset(name: &str) -> Option<&'static DatasetPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCollection {
    pub name: String,
    pub meta: DatasetMeta,
    pub series: Vec<Series>,
}

impl SeriesCollection {
    pub fn new(name: impl Into<String>, meta: DatasetMeta, series: Vec<Series>) -> Result<Self> {
        let name = name.into();
        if meta.context_length < 2 {
            return Err(Error::Config(format!(
                "{name}: context_length {} must be at least 2",
                meta.context_length
            )));
        }
        if let Some(s) = series.iter().find(|s| s.values.len() < 2) {
            return Err(Error::Input(format!(
                "{name}: series `{}` has {} values, need at least 2",
                s.id,
                s.values.len()
            )));
        }
        if let Some(s) = series.iter().find(|s| s.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Input(format!("{name}: series `{}` has non-finite values", s.id)));
        }
        Ok(Self { name, meta, series })
    }

    pub fn context_length(&self) -> usize {
        self.meta.context_length
    }

    pub fn horizon(&self) -> usize {
        self.meta.horizon()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// On-disk layout of a series file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// One series per row, no header; rows may differ in length.
    WideCsv,
    /// Header with `id` and `value` columns; rows grouped by id in order
    /// of first appearance. Other columns are ignored.
    LongCsv,
    /// One `{"id": .., "values": [..]}` object per line.
    Jsonl,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide_csv" | "csv" => Ok(InputFormat::WideCsv),
            "long_csv" => Ok(InputFormat::LongCsv),
            "jsonl" => Ok(InputFormat::Jsonl),
            _ => Err(Error::Config(format!("unknown input format `{s}`"))),
        }
    }
}

/// Read series from `path` and attach `meta`.
pub fn load_collection(path: &Path, format: InputFormat, name: &str, meta: DatasetMeta) -> Result<SeriesCollection> {
    let series = match format {
        InputFormat::WideCsv => read_wide_csv(path)?,
        InputFormat::LongCsv => read_long_csv(path)?,
        InputFormat::Jsonl => read_jsonl(path)?,
    };
    if series.is_empty() {
        return Err(Error::EmptyInput { path: path.to_path_buf() });
    }
    SeriesCollection::new(name, meta, series)
}

/// `row` and `column` are 1-based, counted in file lines and fields.
fn parse_cell(path: &Path, field: &str, row: usize, column: usize) -> Result<f64> {
    let field = field.trim();
    let missing = || Error::MissingValue {
        path: path.to_path_buf(),
        row,
        column,
    };
    if field.is_empty() || field.eq_ignore_ascii_case("na") {
        return Err(missing());
    }
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        detail: format!("row {row}, column {column}: `{field}` is not a number"),
    })?;
    if v.is_nan() {
        return Err(missing());
    }
    if v.is_infinite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            detail: format!("row {row}, column {column}: infinite value"),
        });
    }
    Ok(v)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

fn read_wide_csv(path: &Path) -> Result<Vec<Series>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = i + 1;
        let values = record
            .iter()
            .enumerate()
            .map(|(j, f)| parse_cell(path, f, row, j + 1))
            .collect::<Result<Vec<_>>>()?;
        out.push(Series {
            id: i.to_string(),
            values,
        });
    }
    Ok(out)
}

fn read_long_csv(path: &Path) -> Result<Vec<Series>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyInput { path: path.to_path_buf() });
    }
    let column = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            detail: format!("long format needs a `{name}` column"),
        })
    };
    let (id_col, value_col) = (column("id")?, column("value")?);
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<f64>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = i + 2; // the header is line 1
        let id = record.get(id_col).unwrap_or("").trim().to_string();
        let v = parse_cell(path, record.get(value_col).unwrap_or(""), row, value_col + 1)?;
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(v);
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let values = groups.remove(&id).unwrap_or_default();
            Series { id, values }
        })
        .collect())
}

#[derive(Deserialize)]
struct JsonRecord {
    id: serde_json::Value,
    values: Vec<Option<f64>>,
}

fn read_jsonl(path: &Path) -> Result<Vec<Series>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: format!("line {row}: {e}"),
        })?;
        let values = rec
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.ok_or(Error::MissingValue {
                    path: path.to_path_buf(),
                    row,
                    column: j + 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let id = match rec.id {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        out.push(Series { id, values });
    }
    Ok(out)
}

/// Write series one per row, the layout [`InputFormat::WideCsv`] reads.
pub fn write_wide_csv(path: &Path, series: &[Series]) -> Result<()> {
    let mut out = String::new();
    for s in series {
        let row: Vec<String> = s.values.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Apply the collection's own subsample rule, if it has one. `seed` only
/// matters for the Dominick draw.
pub fn apply_subsample(c: &SeriesCollection, seed: u64) -> Result<SeriesCollection> {
    let Some(rule) = c.meta.subsample else {
        return Ok(c.clone());
    };
    if rule.dataset() != c.name {
        return Err(Error::Config(format!(
            "subsample rule for `{}` applied to collection `{}`",
            rule.dataset(),
            c.name
        )));
    }
    let mut out = c.clone();
    match rule {
        SubsampleRule::AuElecTruncate => {
            for s in &mut out.series {
                s.values.truncate(SubsampleRule::AU_ELEC_STEPS);
            }
        }
        SubsampleRule::DominickSample => {
            let k = SubsampleRule::DOMINICK_SERIES;
            if out.series.len() < k {
                return Err(Error::Input(format!(
                    "dominick sample needs {k} series, collection has {}",
                    out.series.len()
                )));
            }
            Rng::stream(seed, "data.dominick").shuffle(&mut out.series);
            out.series.truncate(k);
        }
    }
    Ok(out)
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// A contiguous piece of one series after splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Index into the collection's series list.
    pub series: usize,
    /// Position of `values[0]` within the raw series.
    pub start: usize,
    pub values: Vec<f64>,
    /// Statistics of the whole raw series, used by whole-series standardization.
    pub series_mean: f64,
    pub series_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<Segment>,
    pub val: Vec<Segment>,
    pub test: Vec<Segment>,
}

/// Train and validation cut points, `⌊0.6n⌋` and `⌊0.8n⌋`.
pub fn split_points(n: usize) -> (usize, usize) {
    (n * 6 / 10, n * 8 / 10)
}

/// 60:20:20 split. `TimeAxis` cuts every series in time; `SeriesAxis`
/// shuffles whole series with `seed` and partitions them.
pub fn split(c: &SeriesCollection, axis: SplitAxis, seed: u64) -> Result<Splits> {
    let whole = |idx: usize| {
        let values = c.series[idx].values.clone();
        let (series_mean, series_std) = mean_std(&values);
        Segment {
            series: idx,
            start: 0,
            values,
            series_mean,
            series_std,
        }
    };
    match axis {
        SplitAxis::TimeAxis => {
            let mut out = Splits {
                train: Vec::new(),
                val: Vec::new(),
                test: Vec::new(),
            };
            for (idx, s) in c.series.iter().enumerate() {
                let n = s.values.len();
                if n < 5 {
                    return Err(Error::Input(format!(
                        "series `{}` has {n} steps, time split needs at least 5",
                        s.id
                    )));
                }
                let (a, b) = split_points(n);
                let full = whole(idx);
                let piece = |start: usize, end: usize| Segment {
                    start,
                    values: full.values[start..end].to_vec(),
                    ..full.clone()
                };
                out.train.push(piece(0, a));
                out.val.push(piece(a, b));
                out.test.push(piece(b, n));
            }
            Ok(out)
        }
        SplitAxis::SeriesAxis => {
            let n = c.series.len();
            if n < 5 {
                return Err(Error::Input(format!(
                    "{n} series, series split needs at least 5"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            Rng::stream(seed, "data.split").shuffle(&mut order);
            let (a, b) = split_points(n);
            Ok(Splits {
                train: order[..a].iter().map(|&i| whole(i)).collect(),
                val: order[a..b].iter().map(|&i| whole(i)).collect(),
                test: order[b..].iter().map(|&i| whole(i)).collect(),
            })
        }
    }
}

/// Raw slice pair at `offset` within a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    pub offset: usize,
    pub context: Vec<f64>,
    pub target: Vec<f64>,
}

/// Sliding `(context, target)` windows; `⌊(n − c − h) / stride⌋ + 1` of
/// them, none if the segment is shorter than `c + h`.
pub fn make_windows(segment: &[f64], c: usize, h: usize, stride: usize) -> Result<Vec<RawWindow>> {
    if stride == 0 {
        return Err(Error::Config("window stride must be positive".into()));
    }
    let n = segment.len();
    if n < c + h {
        log::debug!("segment of {n} steps too short for {c}+{h} windows");
        return Ok(Vec::new());
    }
    Ok((0..=n - c - h)
        .step_by(stride)
        .map(|o| RawWindow {
            offset: o,
            context: segment[o..o + c].to_vec(),
            target: segment[o + c..o + c + h].to_vec(),
        })
        .collect())
}

/// A standardized training or evaluation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPair {
    pub context: Vec<f64>,
    pub target: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub series: usize,
    /// Offset of the context start within the raw series.
    pub offset: usize,
}

impl WindowPair {
    pub fn destandardize(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.std + self.mean).collect()
    }
}

/// Standardize one raw window. `None` means the statistics were degenerate
/// (std at or below [`MIN_STD`]) and the window should be skipped.
pub fn standardize(
    raw: &RawWindow,
    mode: Standardization,
    series_stats: (f64, f64),
    series: usize,
    start: usize,
) -> Option<WindowPair> {
    let (mean, std) = match mode {
        Standardization::PerWindow => mean_std(&raw.context),
        Standardization::WholeSeries => series_stats,
    };
    if std <= MIN_STD || !std.is_finite() {
        return None;
    }
    let z = |v: &[f64]| v.iter().map(|x| (x - mean) / std).collect();
    Some(WindowPair {
        context: z(&raw.context),
        target: z(&raw.target),
        mean,
        std,
        series,
        offset: start + raw.offset,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSet {
    pub pairs: Vec<WindowPair>,
    /// Windows dropped for degenerate statistics.
    pub skipped: usize,
}

/// Window and standardize every segment, in segment then offset order.
pub fn build_windows(segments: &[Segment], c: usize, h: usize, stride: usize, mode: Standardization) -> Result<WindowSet> {
    let mut out = WindowSet::default();
    for seg in segments {
        for raw in make_windows(&seg.values, c, h, stride)? {
            match standardize(&raw, mode, (seg.series_mean, seg.series_std), seg.series, seg.start) {
                Some(p) => out.pairs.push(p),
                None => out.skipped += 1,
            }
        }
    }
    if out.skipped > 0 {
        log::info!("skipped {} windows with near-zero std", out.skipped);
    }
    Ok(out)
}

/// Train, validation and test windows for one collection.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
}

/// Strides: 1 for training, `H` for validation and test.
pub fn prepare(c: &SeriesCollection, seed: u64, train_stride: usize) -> Result<PreparedData> {
    let c = apply_subsample(c, seed)?;
    let splits = split(&c, c.meta.split_axis, seed)?;
    let (ctx, h, mode) = (c.context_length(), c.horizon(), c.meta.standardization);
    let prepared = PreparedData {
        train: build_windows(&splits.train, ctx, h, train_stride, mode)?,
        val: build_windows(&splits.val, ctx, h, h, mode)?,
        test: build_windows(&splits.test, ctx, h, h, mode)?,
    };
    if prepared.train.pairs.is_empty() {
        return Err(Error::Input(format!(
            "{}: no training windows of length {ctx}+{h}",
            c.name
        )));
    }
    Ok(prepared)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    SineMix,
    TrendSeason,
    RandomWalk,
}

impl SynthKind {
    pub fn name(&self) -> &'static str {
        match self {
            SynthKind::SineMix => "sine_mix",
            SynthKind::TrendSeason => "trend_season",
            SynthKind::RandomWalk => "random_walk",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine_mix" => Ok(SynthKind::SineMix),
            "trend_season" => Ok(SynthKind::TrendSeason),
            "random_walk" => Ok(SynthKind::RandomWalk),
            _ => Err(Error::Config(format!(
                "unknown synthetic kind `{s}` (sine_mix, trend_season, random_walk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_series: usize,
    pub length: usize,
    pub kind: SynthKind,
    pub noise: f64,
    pub seed: u64,
}

/// Every sine-mix component period divides this, so noiseless sine-mix
/// series repeat exactly with this period.
pub const SINE_MIX_PERIOD: usize = 48;
const SINE_PERIODS: [usize; 5] = [8, 12, 16, 24, 48];
const SEASON: usize = 12;

fn phase_sin(t: usize, period: usize, phase: f64) -> f64 {
    let k = (t % period) as f64;
    (std::f64::consts::TAU * k / period as f64 + phase).sin()
}

/// Deterministic synthetic series.
///
/// * `sine_mix`: two sinusoids with periods drawn from divisors of
///   [`SINE_MIX_PERIOD`], random amplitudes and phases.
/// * `trend_season`: a linear trend plus a period-12 seasonal cycle.
/// * `random_walk`: cumulative standard-normal increments.
///
/// Gaussian observation noise of std `noise` is added to all three.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Series>> {
    if spec.num_series == 0 || spec.length < 2 {
        return Err(Error::Config(format!(
            "synthetic spec needs at least 1 series of length 2, got {} x {}",
            spec.num_series, spec.length
        )));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Config(format!("noise std {} must be finite and >= 0", spec.noise)));
    }
    let mut rng = Rng::stream(spec.seed, "synth");
    let mut out = Vec::with_capacity(spec.num_series);
    for i in 0..spec.num_series {
        let clean: Vec<f64> = match spec.kind {
            SynthKind::SineMix => {
                let comps: Vec<(usize, f64, f64)> = (0..2)
                    .map(|_| {
                        let p = SINE_PERIODS[rng.below(SINE_PERIODS.len())];
                        (p, rng.uniform(0.5, 1.5), rng.uniform(0.0, std::f64::consts::TAU))
                    })
                    .collect();
                (0..spec.length)
                    .map(|t| comps.iter().map(|&(p, a, ph)| a * phase_sin(t, p, ph)).sum())
                    .collect()
            }
            SynthKind::TrendSeason => {
                let level = rng.uniform(-1.0, 1.0);
                let slope = rng.uniform(-0.02, 0.02);
                let amp = rng.uniform(0.5, 1.5);
                let ph = rng.uniform(0.0, std::f64::consts::TAU);
                (0..spec.length)
                    .map(|t| level + slope * t as f64 + amp * phase_sin(t, SEASON, ph))
                    .collect()
            }
            SynthKind::RandomWalk => {
                let mut x = 0.0;
                (0..spec.length)
                    .map(|t| {
                        if t > 0 {
                            x += rng.gaussian(1.0);
                        }
                        x
                    })
                    .collect()
            }
        };
        let values = clean
            .into_iter()
            .map(|v| if spec.noise > 0.0 { v + rng.gaussian(spec.noise) } else { v })
            .collect();
        out.push(Series {
            id: format!("{}_{i}", spec.kind.name()),
            values,
        });
    }
    Ok(out)
}

/// Metadata for a generated collection: per-window standardization, time
/// split, context length `c`.
pub fn synthetic_meta(c: usize) -> DatasetMeta {
    DatasetMeta {
        frequency: "synthetic".into(),
        context_length: c,
        standardization: Standardization::PerWindow,
        split_axis: SplitAxis::TimeAxis,
        subsample: None,
    }
}
