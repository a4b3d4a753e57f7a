//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits nonzero if any failed. Tolerances are fixed here.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use unicast_core::autodiff::Tape;
use unicast_core::config::RunConfig;
use unicast_core::data::{
    apply_subsample, preset, split, split_points, standardize, RawWindow, Series, SeriesCollection, SplitAxis,
    Standardization, SubsampleRule,
};
use unicast_core::encoders::DatasetDescription;
use unicast_core::eval::{
    count_trainable, efficiency_report, line_chart_svg, run_ablation, AblationAxis, AblationGrid, PUBLISHED,
};
use unicast_core::gradcheck::finite_diff_check;
use unicast_core::model::{EncoderDims, ModelConfig, TextConfig, TsfmConfig, TsfmVariant, UniCastModel, VisionConfig};
use unicast_core::render::render_series;
use unicast_core::rng::Rng;
use unicast_core::tensor::Init;
use unicast_core::train::{mse_on_tape, train};
use unicast_core::transformer::{resolve_schedule, PromptLocation, PromptSchedule};

const TINY: &str = include_str!("../../../configs/tiny.toml");
const CONVERGENCE: &str = include_str!("../../../configs/convergence.toml");
const VOLUME: &str = include_str!("../../../configs/volume.toml");

/// Criterion 2 bound on the worst relative gradient error.
const GRAD_TOL: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-5;
/// Criterion 5: final val MSE must be below this fraction of zero-shot.
const CONVERGENCE_RATIO: f64 = 0.25;
/// Criterion 7 round-trip bound.
const ROUND_TRIP_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within(started: Instant, limit: Duration) -> (bool, String) {
    let t = started.elapsed();
    (t < limit, format!("{:.2}s of {}s allowed", t.as_secs_f64(), limit.as_secs()))
}

fn criterion_1() -> Result<Outcome, String> {
    let started = Instant::now();
    let expected: [usize; 13] = [
        912_384, 912_384, 1_778_688, 4_752_384, 2_658_304, 5_632_000, 2_658_304, 5_632_000, 719_616, 719_616,
        1_389_312, 2_072_064, 4_390_400,
    ];
    let counts: Vec<usize> = PUBLISHED.iter().map(|p| count_trainable(&p.arch)).collect();
    let counts_ok = counts == expected;

    // (trainable ratio, relative) per table row, full fine-tune rows included.
    let published: [(f64, f64); 15] = [
        (100.00, 100.00),
        (0.53, 1.08),
        (0.53, 1.08),
        (0.11, 2.11),
        (0.07, 5.65),
        (0.15, 3.16),
        (0.08, 6.69),
        (0.15, 3.16),
        (0.08, 6.69),
        (100.00, 100.00),
        (0.25, 0.35),
        (0.25, 0.35),
        (0.08, 0.68),
        (0.11, 1.01),
        (0.06, 2.14),
    ];
    let rows = efficiency_report().map_err(err)?;
    let pct_ok = rows.len() == published.len()
        && rows
            .iter()
            .zip(published)
            .all(|(r, (ratio, rel))| r.trainable_ratio == ratio && r.relative == rel);
    let (fast, t) = within(started, Duration::from_secs(1));
    outcome(
        counts_ok && pct_ok && fast,
        format!("13/13 counts exact: {counts_ok}, 15 rows of percentages: {pct_ok}, {t}"),
    )
}

fn toy_bundle() -> ModelConfig {
    let dims = |num_layers, d_model, prompt_length| EncoderDims {
        num_layers,
        d_model,
        num_heads: 4,
        prompt_length,
        schedule: PromptLocation::All,
    };
    ModelConfig {
        context_length: 16,
        patch_len: None,
        tsfm: TsfmConfig {
            dims: dims(2, 64, 4),
            variant: TsfmVariant::TimerLike,
        },
        vision: Some(VisionConfig {
            dims: dims(2, 32, 10),
            patch_size: 8,
            image_size: 16,
            line_thickness: 1,
        }),
        text: Some(TextConfig {
            dims: dims(2, 48, 4),
            max_text_len: 8,
        }),
        prompt_init: Init::Gaussian { sigma: 0.02 },
        interaction_init: Init::Gaussian { sigma: 0.02 },
        head_init: Init::Gaussian { sigma: 0.02 },
    }
}

fn criterion_2() -> Result<Outcome, String> {
    let started = Instant::now();
    let mut model = UniCastModel::build(toy_bundle(), 11).map_err(err)?;
    let mut rng = Rng::stream(11, "acceptance.grad");
    let x: Vec<f64> = (0..16).map(|_| rng.gaussian(1.0)).collect();
    let y: Vec<f64> = (0..16).map(|_| rng.gaussian(1.0)).collect();
    let desc = DatasetDescription::new("Hourly load of a small synthetic grid.").map_err(err)?;
    let params: Vec<_> = model.trainable_ids().into_iter().collect();
    let elements: usize = params.iter().map(|&id| model.store.get(id).len()).sum();
    let probe = model.clone();
    let worst = finite_diff_check(&mut model.store, &params, GRAD_EPS, |tape| {
        let pred = probe.unicast_forward(tape, &x, &desc)?;
        mse_on_tape(tape, pred, &y)
    })
    .map_err(err)?;
    let (fast, t) = within(started, Duration::from_secs(60));
    outcome(
        worst < GRAD_TOL && fast,
        format!("max relative error {worst:.2e} over {elements} parameters (bound {GRAD_TOL:e}), {t}"),
    )
}

fn criterion_3() -> Result<Outcome, String> {
    let mut cfg = RunConfig::from_toml(TINY).map_err(err)?;
    cfg.train.epochs = 3;
    let exp = cfg.experiment().map_err(err)?;
    let mut model = UniCastModel::build(exp.model.clone(), cfg.seeds().model).map_err(err)?;
    let before = model.store.clone();
    train(&mut model, &exp.data.train.pairs, &exp.data.val.pairs, &exp.description, &exp.train).map_err(err)?;

    let store = &model.store;
    let expected: BTreeSet<String> = store
        .ids()
        .map(|id| store.name(id).to_string())
        .filter(|n| n.contains(".prompt.") || n.starts_with("interaction.") || n.starts_with("head."))
        .collect();
    let actual: BTreeSet<String> = store.trainable_ids().into_iter().map(|id| store.name(id).to_string()).collect();
    let bits = |t: &unicast_core::tensor::Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mut frozen = 0;
    let mut changed_frozen = Vec::new();
    let mut moved_trainable = 0;
    for id in store.ids() {
        if store.get(id).requires_grad() {
            moved_trainable += usize::from(bits(store.get(id)) != bits(before.get(id)));
        } else {
            frozen += 1;
            if bits(store.get(id)) != bits(before.get(id)) {
                changed_frozen.push(store.name(id).to_string());
            }
        }
    }
    let set_ok = actual == expected && !expected.is_empty();
    outcome(
        set_ok && changed_frozen.is_empty() && moved_trainable > 0,
        format!(
            "{frozen} frozen tensors bitwise unchanged: {}, trainable set matches {} prompt/interaction/head tensors: {set_ok}, {moved_trainable} trainable tensors moved",
            changed_frozen.is_empty(),
            expected.len()
        ),
    )
}

fn criterion_4() -> Result<Outcome, String> {
    let mut cfg = ModelConfig::unimodal(32);
    cfg.tsfm.dims.prompt_length = 0;
    let model = UniCastModel::build(cfg, 5).map_err(err)?;
    let desc = DatasetDescription::new("unused").map_err(err)?;
    let mut rng = Rng::stream(5, "acceptance.unimodal");
    let mut equal = 0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..32).map(|_| rng.gaussian(2.0)).collect();
        let full = model.predict(&x, &desc).map_err(err)?;
        let mut tape = Tape::new(&model.store);
        let bare = model.tsfm_forward_bare(&mut tape, &x).map_err(err)?;
        let bare = tape.value(bare).to_vec();
        let same = full.len() == bare.len() && full.iter().zip(&bare).all(|(a, b)| a.to_bits() == b.to_bits());
        equal += usize::from(same);
    }
    outcome(equal == 100, format!("{equal}/100 inputs bitwise equal to the bare backbone"))
}

fn criterion_6() -> Result<Outcome, String> {
    let mut mismatches = Vec::new();
    for l in 1..=16usize {
        for variant in PromptLocation::ALL_VARIANTS {
            let oracle: BTreeSet<usize> = (1..=l)
                .filter(|&k| match variant {
                    PromptLocation::First => k == 1,
                    PromptLocation::Odd => k % 2 == 1,
                    PromptLocation::TopHalf => 2 * k > l,
                    PromptLocation::All => true,
                })
                .collect();
            if resolve_schedule(PromptSchedule::new(variant, l)) != oracle {
                mismatches.push(format!("{variant}/{l}"));
            }
        }
    }
    let exp = RunConfig::from_toml(TINY).and_then(|c| c.experiment()).map_err(err)?;
    let grid = AblationGrid::default_for(AblationAxis::Location, None, exp.train.epochs, 0);
    let report = run_ablation(&grid, &exp).map_err(err)?;
    let levels: Vec<&str> = report.rows.iter().map(|r| r.level.as_str()).collect();
    let runs_ok = levels == ["first", "odd", "top_half", "all"] && report.rows.iter().all(|r| r.error.is_none());
    outcome(
        mismatches.is_empty() && runs_ok,
        format!(
            "64 schedules checked, mismatches {mismatches:?}, location ablation levels {levels:?}"
        ),
    )
}

fn collection(meta_name: &str, series: Vec<Vec<f64>>) -> Result<SeriesCollection, String> {
    let meta = preset(meta_name).ok_or("missing preset")?.meta();
    let series = series
        .into_iter()
        .enumerate()
        .map(|(i, values)| Series { id: format!("s{i}"), values })
        .collect();
    SeriesCollection::new(meta_name, meta, series).map_err(err)
}

fn criterion_7() -> Result<Outcome, String> {
    let mut checks = Vec::new();

    // Floor rule, by counting.
    let mut split_ok = true;
    for n in 5..=400usize {
        let train = (0..=n).take_while(|&t| 10 * t <= 6 * n).last().unwrap();
        let val_end = (0..=n).take_while(|&t| 10 * t <= 8 * n).last().unwrap();
        split_ok &= split_points(n) == (train, val_end);
    }
    for n in [5usize, 7, 13, 50, 101] {
        let c = collection("nn5_daily", vec![(0..n).map(|v| v as f64).collect()])?;
        let s = split(&c, SplitAxis::TimeAxis, 0).map_err(err)?;
        let (a, b) = (n * 6 / 10, n * 8 / 10);
        split_ok &= s.train[0].values.len() == a && s.val[0].values.len() == b - a && s.test[0].values.len() == n - b;
        let c = collection("hospital", (0..n).map(|i| vec![i as f64, 1.0, 2.0]).collect())?;
        let s = split(&c, SplitAxis::SeriesAxis, 0).map_err(err)?;
        let mut seen: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).map(|g| g.series).collect();
        seen.sort_unstable();
        split_ok &= s.train.len() == a && s.val.len() == b - a && seen == (0..n).collect::<Vec<_>>();
    }
    checks.push(("split", split_ok));

    // Round trip and context-statistics rule on random windows.
    let mut rng = Rng::stream(7, "acceptance.preprocess");
    let mut worst = 0.0_f64;
    let mut per_window_ok = true;
    for i in 0..200 {
        let scale = rng.uniform(0.01, 1000.0);
        let shift = rng.uniform(-1e4, 1e4);
        let context: Vec<f64> = (0..24).map(|_| shift + scale * rng.gaussian(1.0)).collect();
        let target: Vec<f64> = (0..12).map(|_| shift + scale * rng.gaussian(1.0)).collect();
        let raw = RawWindow { offset: 0, context: context.clone(), target: target.clone() };
        let mode = if i % 2 == 0 { Standardization::PerWindow } else { Standardization::WholeSeries };
        let stats = (shift, scale);
        let w = standardize(&raw, mode, stats, 0, 0).ok_or("degenerate window")?;
        for (orig, z) in [(&context, &w.context), (&target, &w.target)] {
            for (a, b) in orig.iter().zip(w.destandardize(z)) {
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
        if mode == Standardization::PerWindow {
            let n = context.len() as f64;
            let m = context.iter().sum::<f64>() / n;
            let sd = (context.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            per_window_ok &= target.iter().zip(&w.target).all(|(t, z)| ((t - m) / sd - z).abs() < 1e-9);
        }
    }
    checks.push(("round trip", worst < ROUND_TRIP_TOL));
    checks.push(("per-window target", per_window_ok));

    let long: Vec<f64> = (0..20_000).map(|v| v as f64).collect();
    let short: Vec<f64> = (0..900).map(|v| (v as f64).sin()).collect();
    let c = collection("au_elec", vec![long.clone(), short.clone()])?;
    let t = apply_subsample(&c, 0).map_err(err)?;
    checks.push((
        "au_elec",
        SubsampleRule::AU_ELEC_STEPS == 15_000 && t.series[0].values == long[..15_000] && t.series[1].values == short,
    ));

    let many: Vec<Vec<f64>> = (0..250).map(|i| vec![i as f64, i as f64 + 1.0, 0.5]).collect();
    let c = collection("dominick", many.clone())?;
    let d = apply_subsample(&c, 9).map_err(err)?;
    let ids: BTreeSet<&str> = d.series.iter().map(|s| s.id.as_str()).collect();
    let faithful = d.series.iter().all(|s| {
        let i: usize = s.id[1..].parse().unwrap();
        s.values == many[i]
    });
    let again = apply_subsample(&c, 9).map_err(err)?;
    checks.push((
        "dominick",
        SubsampleRule::DOMINICK_SERIES == 100 && d.series.len() == 100 && ids.len() == 100 && faithful && again == d,
    ));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    outcome(
        failed.is_empty(),
        format!("{} fixture checks, round-trip error {worst:.1e}, failed {failed:?}", checks.len()),
    )
}

fn run_cli(out: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_unicast"))
        .args(args)
        .env("UNICAST_OUT", out)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(err)?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

fn csv_files(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    paths.iter().map(|p| std::fs::read(p).map_err(err)).collect()
}

fn criterion_8() -> Result<Outcome, String> {
    let tmp = tempfile::tempdir().map_err(err)?;
    let cfg = tmp.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).map_err(err)?;
    let cfg = cfg.to_str().ok_or("path")?;
    let commands: [&[&str]; 5] = [
        &["train", "--config", cfg],
        &["eval", "--config", cfg],
        &["ablate", "--config", cfg, "--axis", "modality"],
        &["report", "--table6"],
        &["synth", "--kind", "random_walk", "--num-series", "3", "--length", "50"],
    ];
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        for args in commands {
            run_cli(&out, args)?;
        }
        let mut files = csv_files(&out)?;
        files.extend(csv_files(&out.join("tiny"))?);
        runs.push(files);
    }
    let csv_ok = runs[0].len() == 5 && runs[0] == runs[1];

    let mut rng = Rng::stream(8, "acceptance.render");
    let mut invariant = 0;
    for _ in 0..100 {
        let n = 2 + rng.below(200);
        let x: Vec<f64> = (0..n).map(|_| rng.gaussian(1.0)).collect();
        let a = rng.uniform(1e-3, 1e3);
        let b = rng.uniform(-1e3, 1e3);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let img = render_series(&x, 64, 64, 1).map_err(err)?;
        let again = render_series(&x, 64, 64, 1).map_err(err)?;
        let moved = render_series(&y, 64, 64, 1).map_err(err)?;
        invariant += usize::from(img.to_pgm() == again.to_pgm() && img.to_pgm() == moved.to_pgm());
    }
    outcome(
        csv_ok && invariant == 100,
        format!(
            "{} metric CSVs byte-identical across reruns: {csv_ok}, renders stable and affine-invariant {invariant}/100",
            runs[0].len()
        ),
    )
}

fn criterion_5() -> Result<Outcome, String> {
    let started = Instant::now();
    let cfg = RunConfig::from_toml(CONVERGENCE).map_err(err)?;
    let exp = cfg.experiment().map_err(err)?;
    let mut model = UniCastModel::build(exp.model.clone(), cfg.seeds().model).map_err(err)?;
    let h = train(&mut model, &exp.data.train.pairs, &exp.data.val.pairs, &exp.description, &exp.train)
        .map_err(err)?;
    let curve = h.val_curve();
    let zs = h.zero_shot_val_mse;
    let last = *curve.last().ok_or("no epochs")?;
    let early = curve.len() >= 4 && curve[3] < curve[0];
    let ratio = last / zs;
    let (fast, t) = within(started, Duration::from_secs(300));
    let shown: Vec<String> = curve.iter().map(|v| format!("{v:.3}")).collect();
    outcome(
        ratio < CONVERGENCE_RATIO && early && fast,
        format!(
            "lr x{} over {} windows: zero-shot {zs:.4}, final {last:.4} (ratio {ratio:.3}, bound {CONVERGENCE_RATIO}), epoch 4 below epoch 1: {early}, curve [{}], {t}",
            exp.train.lr_multiplier,
            exp.data.train.pairs.len(),
            shown.join(", ")
        ),
    )
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn criterion_9() -> Result<Outcome, String> {
    let started = Instant::now();
    let base = RunConfig::from_toml(VOLUME).map_err(err)?;
    let seeds = [0u64, 1, 2];
    let mut per_seed = Vec::new();
    let mut curves = Vec::new();
    for &seed in &seeds {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let exp = cfg.experiment().map_err(err)?;
        let grid = AblationGrid::default_for(AblationAxis::Volume, None, exp.train.epochs, seed);
        let report = run_ablation(&grid, &exp).map_err(err)?;
        if let Some(e) = report.rows.iter().find_map(|r| r.error.clone()) {
            return Err(e);
        }
        let curve = report.curve().ok_or("volume report has no curve")?;
        per_seed.push(curve.iter().map(|p| p.1).collect::<Vec<_>>());
        curves.push((format!("seed {seed}"), curve));
    }
    let fractions = curves[0].1.len();
    let mean: Vec<f64> = (0..fractions)
        .map(|i| per_seed.iter().map(|c| c[i]).sum::<f64>() / seeds.len() as f64)
        .collect();
    let sd: Vec<f64> = (0..fractions)
        .map(|i| sample_sd(&per_seed.iter().map(|c| c[i]).collect::<Vec<_>>()))
        .collect();
    // Each step may rise by at most the larger seed-level sd of its two ends.
    let monotone = (1..fractions).all(|i| mean[i] <= mean[i - 1] + sd[i].max(sd[i - 1]));
    let svg = line_chart_svg("data volume", "training data fraction", "validation MSE", &curves);
    let drawn = svg.matches("<polyline").count() == seeds.len()
        && curves.iter().all(|(_, c)| c.len() == 4);
    let shown: Vec<String> = mean.iter().zip(&sd).map(|(m, s)| format!("{m:.3}±{s:.3}")).collect();
    outcome(
        monotone && drawn,
        format!(
            "mean val MSE at 0.25/0.5/0.75/1.0 [{}] non-increasing within one sd: {monotone}, 4-point curve drawn: {drawn}, {:.1}s",
            shown.join(", "),
            started.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Result<Outcome, String>); 9] = [
        (1, "parameter-efficiency table", criterion_1),
        (2, "gradient correctness", criterion_2),
        (3, "freeze invariance", criterion_3),
        (4, "unimodal reduction", criterion_4),
        (5, "convergence", criterion_5),
        (6, "prompt schedules", criterion_6),
        (7, "preprocessing oracles", criterion_7),
        (8, "determinism", criterion_8),
        (9, "data volume", criterion_9),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (n, name, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let (status, detail) = match result {
            Ok(o) => (if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        failures += usize::from(status == "FAIL");
        println!("criterion {n} ({name}): {status}: {detail}");
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
