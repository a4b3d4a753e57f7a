use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unicast_core::config::RunConfig;
use unicast_core::data::{generate, write_wide_csv, SynthKind, SynthSpec};
use unicast_core::eval::{
    efficiency_report, efficiency_table_csv, efficiency_table_text, evaluate, run_ablation, AblationAxis,
    AblationGrid, Component,
};
use unicast_core::model::UniCastModel;
use unicast_core::render::render_series;
use unicast_core::train::train_observed;
use unicast_core::{Error, Result};

/// Multimodal prompt-tuned forecasting experiments.
#[derive(Parser)]
#[command(name = "unicast", version)]
struct Cli {
    /// Output root; falls back to the config's `output_dir`, then `runs`.
    #[arg(long, global = true, env = "UNICAST_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the root seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train prompts and interaction layers; writes the model and history.
    Train(RunArgs),
    /// Score a saved model on the validation and test windows.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to the model written by `train` for this config.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Sweep one axis and write a report.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = parse::<AblationAxis>)]
        axis: AblationAxis,
        /// Restrict a length sweep to one stack.
        #[arg(long, value_parser = parse::<Component>)]
        component: Option<Component>,
    },
    /// Print a report table.
    Report {
        /// Trainable-parameter table for the published backbones.
        #[arg(long)]
        table6: bool,
    },
    /// Rasterize one series (or one window of it) to a PGM image.
    Render {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        series: usize,
        /// Start of a context-length window; the whole series if absent.
        #[arg(long)]
        start: Option<usize>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Generate a synthetic dataset as wide CSV.
    Synth {
        #[arg(long, value_parser = parse::<SynthKind>)]
        kind: SynthKind,
        #[arg(long, default_value_t = 20)]
        num_series: usize,
        #[arg(long, default_value_t = 400)]
        length: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::Train(run) => cmd_train(&load(&run)?, out),
        Command::Eval { run, model } => cmd_eval(&load(&run)?, out, model),
        Command::Ablate { run, axis, component } => cmd_ablate(&load(&run)?, out, axis, component),
        Command::Report { table6 } => cmd_report(out, table6),
        Command::Render { run, series, start, file } => cmd_render(&load(&run)?, out, series, start, file),
        Command::Synth { kind, num_series, length, noise, seed, file } => {
            let spec = SynthSpec { num_series, length, kind, noise, seed };
            cmd_synth(&spec, out, file)
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output_root(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    flag.or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_dir(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = output_root(out, Some(cfg)).join(&cfg.experiment);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// The config as run, defaults and seed included, so the directory alone
/// reproduces its artifacts.
fn snapshot(cfg: &RunConfig, path: &Path) -> Result<()> {
    write(path, cfg.to_toml()?)
}

fn cmd_train(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let dir = run_dir(cfg, out)?;
    snapshot(cfg, &dir.join("config.toml"))?;
    let exp = cfg.experiment()?;
    let mut model = UniCastModel::build(exp.model.clone(), cfg.seeds().model)?;
    log::info!(
        "{} train / {} val / {} test windows",
        exp.data.train.pairs.len(),
        exp.data.val.pairs.len(),
        exp.data.test.pairs.len()
    );
    let result = train_observed(
        &mut model,
        &exp.data.train.pairs,
        &exp.data.val.pairs,
        &exp.description,
        &exp.train,
        |_, rec| {
            log::info!(
                "epoch {:>3}  train {:.5}  val {:.5}  ({:.1}s)",
                rec.epoch,
                rec.train_loss,
                rec.val_mse,
                rec.seconds
            );
            Ok(())
        },
    );
    let history = match result {
        Ok(h) => h,
        Err(abort) => {
            abort.history.write_csv(&dir.join("history.csv"))?;
            abort.history.write_json(&dir.join("history.json"))?;
            return Err(abort.error);
        }
    };
    model.save(&dir.join("model.json"))?;
    history.write_csv(&dir.join("history.csv"))?;
    history.write_json(&dir.join("history.json"))?;
    let test = evaluate(&model, &exp.data.test.pairs, &exp.description)?;
    println!(
        "zero-shot val {:.5}, final val {:.5}, test {:.5}",
        history.zero_shot_val_mse,
        history.final_val_mse().unwrap_or(f64::NAN),
        test
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, out: Option<PathBuf>, model_path: Option<PathBuf>) -> Result<()> {
    let dir = run_dir(cfg, out)?;
    let model_path = model_path.unwrap_or_else(|| dir.join("model.json"));
    let model = UniCastModel::load(&model_path)?;
    let exp = cfg.experiment()?;
    if model.config != exp.model {
        return Err(Error::Config(format!(
            "model: `{}` was built for a different model section than this config",
            model_path.display()
        )));
    }
    let val = evaluate(&model, &exp.data.val.pairs, &exp.description)?;
    let test = evaluate(&model, &exp.data.test.pairs, &exp.description)?;
    write(&dir.join("eval.csv"), format!("split,mse\nval,{val}\ntest,{test}\n"))?;
    println!("val {val:.5}  test {test:.5}");
    Ok(())
}

fn cmd_ablate(cfg: &RunConfig, out: Option<PathBuf>, axis: AblationAxis, component: Option<Component>) -> Result<()> {
    if component.is_some() && axis != AblationAxis::Length {
        return Err(Error::Config("--component only applies to --axis length".into()));
    }
    let dir = run_dir(cfg, out)?;
    let exp = cfg.experiment()?;
    let grid = AblationGrid::default_for(axis, component, exp.train.epochs, cfg.seed);
    let report = run_ablation(&grid, &exp)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    snapshot(cfg, &dir.join(format!("{}_{stamp}_{}.toml", cfg.experiment, cfg.seed)))?;
    let paths = report.write_all(&dir, &stamp)?;
    print!("{}", report.to_text());
    for p in paths {
        println!("wrote {}", p.display());
    }
    if report.rows.iter().any(|r| r.error.is_some()) {
        return Err(Error::Contract("one or more ablation levels failed".into()));
    }
    Ok(())
}

fn cmd_report(out: Option<PathBuf>, table6: bool) -> Result<()> {
    if !table6 {
        return Err(Error::Config("report: choose a table (--table6)".into()));
    }
    let rows = efficiency_report()?;
    print!("{}", efficiency_table_text(&rows));
    let dir = output_root(out, None);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let csv = dir.join("table6.csv");
    write(&csv, efficiency_table_csv(&rows))?;
    println!("wrote {}", csv.display());
    Ok(())
}

fn cmd_render(
    cfg: &RunConfig,
    out: Option<PathBuf>,
    series: usize,
    start: Option<usize>,
    file: Option<PathBuf>,
) -> Result<()> {
    let collection = cfg.load_collection()?;
    let s = collection.series.get(series).ok_or_else(|| {
        Error::Input(format!("series {series} out of range ({} series)", collection.series.len()))
    })?;
    let values = match start {
        None => &s.values[..],
        Some(a) => {
            let c = collection.meta.context_length;
            s.values.get(a..a + c).ok_or_else(|| {
                Error::Input(format!("window {a}..{} exceeds series length {}", a + c, s.values.len()))
            })?
        }
    };
    let v = cfg.model.vision;
    let image = render_series(values, v.image_size, v.image_size, v.line_thickness)?;
    let path = match file {
        Some(p) => p,
        None => run_dir(cfg, out)?.join(format!("series{series}.pgm")),
    };
    image.write_pgm(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_synth(spec: &SynthSpec, out: Option<PathBuf>, file: Option<PathBuf>) -> Result<()> {
    let series = generate(spec)?;
    let path = match file {
        Some(p) => p,
        None => {
            let dir = output_root(out, None);
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            dir.join(format!("{}_{}x{}_seed{}.csv", spec.kind.name(), spec.num_series, spec.length, spec.seed))
        }
    };
    write_wide_csv(&path, &series)?;
    println!("wrote {}", path.display());
    Ok(())
}
