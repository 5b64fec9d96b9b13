//! Command-line front end. Every command computes its outputs in memory,
//! writes each file atomically, and finishes with a `run_manifest.json`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{fit_normalizer, make_dataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_run, cf_sweep, comparison_table_csv, infer_corpus, long_table_csv, score_traces, series_csv,
    split_table_csv, sweep_csv, sweep_svg, AblationOptions, DetectionReport, ScoringRules,
};
use crate::io_util::write_atomic_bytes;
use crate::model::{load_weights, weights_to_bytes, ModelConfig, ModelParameters, Variant};
use crate::sim::{generate_corpus, load_corpus, write_corpus, Corpus, SimConfig, Split};
use crate::train::{train_with_progress, TrainConfig};

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const OUT_ENV: &str = "MADCNN_OUT";

#[derive(Debug, Parser)]
#[command(name = "madcnn", version, about = "Collision detection for variable-stiffness manipulators")]
pub struct Cli {
    /// TOML file with optional [sim], [train] and [scoring] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for simulation and training; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "madcnn-out")]
    pub out: PathBuf,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the training and test corpus.
    Simulate(SimulateArgs),
    /// Train one variant on the level-4 training split.
    Train(TrainArgs),
    /// Score a trained model on every test split.
    Eval(EvalArgs),
    /// Train and score all variants.
    Ablate(AblateArgs),
    /// Score a trained model across continuous-filter durations.
    CfSweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Multiplier in (0, 1] for every trace duration.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "MAD")]
    pub variant: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Continuous-filter durations in ms.
    #[arg(long, value_delimiter = ',', default_value = "0,15")]
    pub cf_ms: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "MAD,M,MD,MA,AD")]
    pub variants: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub cf_ms: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Largest CF duration in ms; rows run from 0.
    #[arg(long, default_value_t = 27)]
    pub max_cf_ms: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Also render the sweep as SVG.
    #[arg(long)]
    pub svg: bool,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub scoring: ScoringRules,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.sim.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Resolved command inputs.
    pub inputs: serde_json::Value,
    /// Files written by the run, relative to `output_dir`.
    pub outputs: Vec<String>,
}

/// Parses `args` (program name first), runs the command, prints any error
/// and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("madcnn: {e}");
            e.exit_code()
        }
    }
}

/// Pending output files, written only once the whole command succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn commit(self, dir: &Path) -> Result<Vec<String>> {
        let mut names = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            write_atomic_bytes(&dir.join(&name), &bytes)?;
            names.push(name);
        }
        Ok(names)
    }
}

struct Context<'a> {
    cli: &'a Cli,
    config: RunConfig,
    seed: u64,
    started: String,
}

impl Context<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.config.train }
    }

    fn finish(&self, command: &str, inputs: serde_json::Value, outputs: Vec<String>) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.into(),
            config_path: self.cli.config.clone(),
            seed: self.seed,
            output_dir: self.cli.out.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_at: self.started.clone(),
            finished_at: now(),
            inputs,
            outputs,
        };
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic_bytes(&self.cli.out.join(MANIFEST_FILE), &json)?;
        Ok(manifest)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<RunManifest> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(config.train.seed);
    let ctx = Context { cli, config, seed, started: now() };
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Ablate(a) => cmd_ablate(&ctx, a),
        Command::CfSweep(a) => cmd_cf_sweep(&ctx, a),
    }
}

fn cmd_simulate(ctx: &Context, a: &SimulateArgs) -> Result<RunManifest> {
    let corpus = generate_corpus(&ctx.config.sim, ctx.seed, a.scale)?;
    write_corpus(&ctx.cli.out, &corpus)?;
    let mut outputs: Vec<String> = corpus.entries.iter().map(|e| e.info.path.clone()).collect();
    outputs.push(crate::sim::CORPUS_MANIFEST.into());
    for e in &corpus.entries {
        ctx.log(format!("{}: {:.1} s, {} collisions", e.info.name, e.info.duration_s, e.info.collisions));
    }
    ctx.finish("simulate", serde_json::json!({ "scale": a.scale }), outputs)
}

fn loss_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(out, "{},{l:e}", i + 1);
    }
    out
}

fn cmd_train(ctx: &Context, a: &TrainArgs) -> Result<RunManifest> {
    let variant: Variant = a.variant.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let corpus = load_corpus(&a.corpus)?;
    let trace = &corpus.get(Split::TrainCollision, 4)?.trace;
    let stats = fit_normalizer(&[trace])?;
    let tc = ctx.train_config();
    let data = make_dataset(&[trace], &stats, tc.seed)?;
    ctx.log(format!("training {variant} on {} frames", data.len()));
    let trained = train_with_progress(&ModelConfig::for_variant(variant), &data, &tc, |e, l| {
        ctx.log(format!("epoch {e:>3}  loss {l:.6}"))
    })?;
    let mut out = Outputs::default();
    out.add("weights.json", weights_to_bytes(&trained.params, Some(stats))?);
    out.add("loss_history.csv", loss_csv(&trained.loss_history));
    let outputs = out.commit(&ctx.cli.out)?;
    ctx.finish(
        "train",
        serde_json::json!({ "corpus": a.corpus, "variant": variant.name(), "train": tc }),
        outputs,
    )
}

fn load_model(path: &Path, corpus: &Corpus) -> Result<(ModelParameters, NormalizationStats)> {
    let (params, stats) = load_weights(path)?;
    let stats = match stats {
        Some(s) => s,
        None => fit_normalizer(&corpus.training())?,
    };
    Ok((params, stats))
}

fn cmd_eval(ctx: &Context, a: &EvalArgs) -> Result<RunManifest> {
    if a.cf_ms.is_empty() {
        return Err(Error::Config("--cf-ms needs at least one duration".into()));
    }
    let corpus = load_corpus(&a.corpus)?;
    let (params, stats) = load_model(&a.weights, &corpus)?;
    let name = params.config.variant()?.name();
    let traces = infer_corpus(&params, &stats, &corpus, a.threshold)?;
    let reports: Vec<DetectionReport> = a
        .cf_ms
        .iter()
        .map(|&cf| score_traces(&traces, cf, &ctx.config.scoring))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = reports.iter().map(|r| format!("{name}_cf{}", r.cf_ms)).collect();
    let columns: Vec<(&str, &DetectionReport)> = labels.iter().map(String::as_str).zip(&reports).collect();
    for r in &reports {
        ctx.log(format!(
            "cf {:>2} ms: DFn {}  DD {:.3} ms  FPn {}",
            r.cf_ms,
            r.total.dfn_ratio(),
            r.total.dd_mean(),
            r.total.fpn
        ));
    }
    let mut out = Outputs::default();
    out.add("eval_table.csv", comparison_table_csv(&columns));
    out.add("eval_long.csv", long_table_csv(&columns));
    out.add("eval_splits.csv", split_table_csv(&reports));
    let outputs = out.commit(&ctx.cli.out)?;
    ctx.finish(
        "eval",
        serde_json::json!({
            "weights": a.weights, "corpus": a.corpus, "cf_ms": a.cf_ms,
            "threshold": a.threshold, "scoring": ctx.config.scoring,
        }),
        outputs,
    )
}

fn cmd_ablate(ctx: &Context, a: &AblateArgs) -> Result<RunManifest> {
    let variants: Vec<Variant> = a
        .variants
        .iter()
        .map(|v| v.parse().map_err(|e: Error| Error::Config(e.to_string())))
        .collect::<Result<_>>()?;
    let corpus = load_corpus(&a.corpus)?;
    let tc = ctx.train_config();
    let options = AblationOptions { threshold: a.threshold, cf_ms: a.cf_ms, rules: ctx.config.scoring };
    let result = ablation_run(&variants, &corpus, &tc, &options, |v, e, l| {
        ctx.log(format!("{v:>3} epoch {e:>3}  loss {l:.6}"))
    })?;
    let columns: Vec<(&str, &DetectionReport)> =
        result.columns.iter().map(|c| (c.variant.name(), &c.report)).collect();
    let mut out = Outputs::default();
    out.add("ablation_table.csv", comparison_table_csv(&columns));
    out.add("ablation_long.csv", long_table_csv(&columns));
    for c in &result.columns {
        out.add(format!("weights_{}.json", c.variant.name()), weights_to_bytes(&c.params, Some(result.stats))?);
        out.add(format!("loss_history_{}.csv", c.variant.name()), loss_csv(&c.loss_history));
    }
    let outputs = out.commit(&ctx.cli.out)?;
    ctx.finish(
        "ablate",
        serde_json::json!({
            "corpus": a.corpus, "variants": variants.iter().map(|v| v.name()).collect::<Vec<_>>(),
            "cf_ms": a.cf_ms, "threshold": a.threshold, "train": tc, "scoring": ctx.config.scoring,
        }),
        outputs,
    )
}

fn cmd_cf_sweep(ctx: &Context, a: &SweepArgs) -> Result<RunManifest> {
    let corpus = load_corpus(&a.corpus)?;
    let (params, stats) = load_model(&a.weights, &corpus)?;
    let traces = infer_corpus(&params, &stats, &corpus, a.threshold)?;
    let rows = cf_sweep(&traces, 0..=a.max_cf_ms, &ctx.config.scoring)?;
    let mut out = Outputs::default();
    out.add("cf_sweep.csv", sweep_csv(&rows)?);
    for metric in ["fpn", "dfn", "dd_mean_ms"] {
        out.add(format!("series_{metric}.csv"), series_csv(&rows, metric)?);
    }
    if a.svg {
        out.add("cf_sweep.svg", sweep_svg(&rows));
    }
    let outputs = out.commit(&ctx.cli.out)?;
    ctx.finish(
        "cf-sweep",
        serde_json::json!({
            "weights": a.weights, "corpus": a.corpus, "max_cf_ms": a.max_cf_ms,
            "threshold": a.threshold, "scoring": ctx.config.scoring,
        }),
        outputs,
    )
}
