//! Command-line front end.
//!
//! Every subcommand accepts `--config <file.toml>`; flags given on the
//! command line override the file. Exit status is 0 on success, 1 on usage
//! errors and 2 on data or model errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::dataset::{
    clean_outliers, generate_synthetic, load_table, normalize, read_header, split, Schema, SynthConfig,
    TimeSeriesTable, DEFAULT_LOOKBACK, DEFAULT_SIGMA_K,
};
use crate::elm::Activation;
use crate::error::{Error, Result};
use crate::feature_select::{compute_importance, select_features};
use crate::mic_delay::{estimate_delays, reconstruct, DelayMap};
use crate::pipeline::{self, ErrorFeedback, PipelineConfig, PipelineModel};
use crate::vmd::{decompose, prune_last_mode, select_mode_count};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SCR_DYNPREDICT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "scr-dynpredict", version, about = "Delay-aware hybrid NOx predictor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic operating data set with known delays and drivers.
    Synth(SynthArgs),
    /// Replace 3-sigma outliers by the mean of the preceding cleaned values.
    Clean(CleanArgs),
    /// Estimate the delay of every input against the target.
    Delays(DelaysArgs),
    /// Score inputs with three tree learners and select features.
    Select(SelectArgs),
    /// Decompose one column into band-limited modes.
    Decompose(DecomposeArgs),
    /// Fit the full predictor and save it as JSON.
    Train(TrainArgs),
    /// Evaluate a saved predictor one step ahead on new rows.
    Evaluate(EvaluateArgs),
    /// Run the stage on/off grid on a train/test split.
    Ablate(StudyArgs),
    /// Mean-substitution sensitivity of every input variable.
    Sensitivity(StudyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw [default: from config]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target column label [default: Y]
    #[arg(long)]
    pub target: Option<String>,
    /// Directory for outputs whose path is not given explicitly [default: .]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Rows to emit [default: 4000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Target noise std relative to the signal [default: 0.15]
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Comma-separated tone frequencies of Q in cycles/sample [default: 0.02,0.10]
    #[arg(long, value_delimiter = ',')]
    pub tones: Option<Vec<f64>>,
    /// Injected delay as LABEL=SAMPLES; repeatable [default: Q=44,NOx=17,O2in=5,Tout=0,Tin=26,O2out=1,Ne=13,TA=3]
    #[arg(long = "delay", value_name = "LABEL=SAMPLES", value_parser = parse_delay)]
    pub delays: Vec<(String, usize)>,
    /// Output CSV [default: <out-dir>/synth.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground truth JSON [default: not written]
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input CSV
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Outlier threshold in standard deviations [default: 3]
    #[arg(long)]
    pub sigma_k: Option<f64>,
    /// Preceding values averaged into a replacement [default: 5]
    #[arg(long)]
    pub lookback: Option<usize>,
    /// Output CSV [default: <out-dir>/clean.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DelayFlags {
    /// Exponent of the MIC cell budget n^b [default: 0.6]
    #[arg(long)]
    pub b_exponent: Option<f64>,
    /// Search cap in samples for every input [default: 60 for SCR-internal, 30 for unit-level]
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DelaysArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input CSV
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub delay: DelayFlags,
    /// Output JSON [default: <out-dir>/delays.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectFlags {
    /// Combined-importance threshold [default: 0.2]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma-separated labels always kept [default: NOx]
    #[arg(long, value_delimiter = ',')]
    pub forced: Option<Vec<String>>,
    /// Trees in the random forest [default: 100]
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Boosting rounds [default: 100]
    #[arg(long)]
    pub rounds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input CSV
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Delay JSON used to align the inputs first [default: no alignment]
    #[arg(long)]
    pub delays: Option<PathBuf>,
    #[command(flatten)]
    pub select: SelectFlags,
    /// Output JSON [default: <out-dir>/importance.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Two-column label,combined CSV [default: not written]
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VmdFlags {
    /// Bandwidth penalty [default: 2000]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Convergence tolerance [default: 1e-7]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap [default: 500]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Mode-count stopping correlation [default: 0.1]
    #[arg(long)]
    pub corr_threshold: Option<f64>,
    /// Largest mode count tried [default: 12]
    #[arg(long)]
    pub k_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input CSV
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Column to decompose [default: Q]
    #[arg(long)]
    pub column: Option<String>,
    /// Fixed mode count [default: chosen by the correlation rule]
    #[arg(long)]
    pub k: Option<usize>,
    /// Drop the highest-frequency mode [default: false]
    #[arg(long)]
    pub prune: bool,
    #[command(flatten)]
    pub vmd: VmdFlags,
    /// Mode CSV, one IMF per column [default: <out-dir>/modes.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full mode set JSON [default: not written]
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    /// Skip delay estimation [default: stage on]
    #[arg(long)]
    pub no_delay: bool,
    /// Skip feature selection [default: stage on]
    #[arg(long)]
    pub no_select: bool,
    /// Skip mode decomposition [default: stage on]
    #[arg(long)]
    pub no_vmd: bool,
    /// Skip error correction [default: stage on]
    #[arg(long)]
    pub no_ec: bool,
    /// Hidden neurons of the initial network [default: 100]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Hidden neurons of the correction network [default: 100]
    #[arg(long)]
    pub ec_hidden: Option<usize>,
    /// Hidden activation, tanh or sigmoid [default: tanh]
    #[arg(long, value_parser = parse_activation)]
    pub activation: Option<Activation>,
    /// Ridge weight of both networks, 0 for the pseudoinverse [default: 1e-8]
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Lagged errors at test time, measured or recursive [default: measured]
    #[arg(long, value_parser = parse_feedback)]
    pub feedback: Option<ErrorFeedback>,
    #[command(flatten)]
    pub delay: DelayFlags,
    #[command(flatten)]
    pub select: SelectFlags,
    #[command(flatten)]
    pub vmd: VmdFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input CSV [default: synthetic data from the config]
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Train on the first N rows only [default: all rows]
    #[arg(long)]
    pub train_rows: Option<usize>,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Model JSON [default: <out-dir>/model.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model JSON written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluation CSV [default: synthetic data from the config]
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Skip this many leading rows, e.g. the training rows [default: config train_rows, else 0]
    #[arg(long)]
    pub skip_rows: Option<usize>,
    /// Metrics JSON [default: <out-dir>/metrics.json]
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Metrics CSV [default: not written]
    #[arg(long)]
    pub metrics_csv: Option<PathBuf>,
    /// measured,predicted CSV [default: not written]
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Full report JSON with prediction series and timing [default: not written]
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input CSV [default: synthetic data from the config]
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Rows in the training split [default: 75% of the rows]
    #[arg(long)]
    pub train_rows: Option<usize>,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Choose the hidden size from 20..300 by validation MAPE on the last 20% of the training split first
    #[arg(long)]
    pub tune_hidden: bool,
    /// Output JSON [default: <out-dir>/ablation.json or sensitivity.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output CSV [default: not written]
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub target: Option<String>,
    /// CSV input; mutually exclusive with `[synth]`.
    pub data: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
    pub train_rows: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub clean: CleanConfig,
    pub pipeline: Option<PipelineConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    pub sigma_k: f64,
    pub lookback: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            sigma_k: DEFAULT_SIGMA_K,
            lookback: DEFAULT_LOOKBACK,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_delay(s: &str) -> std::result::Result<(String, usize), String> {
    let (label, lag) = s.split_once('=').ok_or("expected LABEL=SAMPLES")?;
    let lag = lag.trim().parse().map_err(|_| format!("bad lag in {s:?}"))?;
    Ok((label.trim().to_string(), lag))
}

fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "sigmoid" => Ok(Activation::Sigmoid),
        _ => Err(format!("unknown activation {s:?}")),
    }
}

fn parse_feedback(s: &str) -> std::result::Result<ErrorFeedback, String> {
    match s {
        "measured" => Ok(ErrorFeedback::Measured),
        "recursive" => Ok(ErrorFeedback::Recursive),
        _ => Err(format!("unknown feedback mode {s:?}")),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            // Fails only if a pool already exists, e.g. in a second in-process run.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring {THREADS_ENV}={v:?}"),
    }
}

struct Ctx {
    run: RunConfig,
    seed: Option<u64>,
    target: String,
    out_dir: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Outcome<Self> {
        let run = match &common.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                // A bad key is the file-side twin of an unknown flag.
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| usage(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        let seed = common.seed.or(run.seed);
        let target = common
            .target
            .clone()
            .or_else(|| run.target.clone())
            .unwrap_or_else(|| "Y".to_string());
        let out_dir = common
            .out_dir
            .clone()
            .or_else(|| run.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self {
            run,
            seed,
            target,
            out_dir,
        })
    }

    fn seed(&self) -> Outcome<u64> {
        self.seed.ok_or_else(|| usage("a seed is required (--seed or `seed` in the config)"))
    }

    fn output(&self, flag: &Option<PathBuf>, default_name: &str) -> Outcome<PathBuf> {
        let path = flag.clone().unwrap_or_else(|| self.out_dir.join(default_name));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        }
        Ok(path)
    }

    /// Loads the single data source: `--in`, the config's `data`, or its
    /// `[synth]` section.
    fn data(&self, input: &Option<PathBuf>) -> Outcome<TimeSeriesTable> {
        if let Some(p) = input {
            return Ok(load_csv(p, &self.target)?);
        }
        match (&self.run.data, &self.run.synth) {
            (Some(_), Some(_)) => Err(usage("config sets both `data` and `[synth]`; choose one data source")),
            (Some(p), None) => Ok(load_csv(p, &self.target)?),
            (None, Some(s)) => {
                if self.target != "Y" {
                    return Err(usage("synthetic data always has target Y"));
                }
                Ok(generate_synthetic(s, self.seed()?)?.0)
            }
            (None, None) => Err(usage("no data source: pass --in or set `data` / `[synth]` in the config")),
        }
    }

    fn pipeline_config(&self, flags: &ModelFlags) -> Outcome<PipelineConfig> {
        let mut cfg = self.run.pipeline.clone().unwrap_or_default();
        cfg.seed = self.seed()?;
        let s = &mut cfg.stages;
        s.delay &= !flags.no_delay;
        s.select &= !flags.no_select;
        s.vmd &= !flags.no_vmd;
        s.ec &= !flags.no_ec;
        if let Some(h) = flags.hidden {
            cfg.elm.hidden = h;
        }
        if let Some(h) = flags.ec_hidden {
            cfg.ec_elm.hidden = h;
        }
        if let Some(a) = flags.activation {
            cfg.elm.activation = a;
            cfg.ec_elm.activation = a;
        }
        if let Some(r) = flags.ridge {
            cfg.elm.ridge = r;
            cfg.ec_elm.ridge = r;
        }
        if let Some(f) = flags.feedback {
            cfg.feedback = f;
        }
        apply_delay_flags(&mut cfg, &flags.delay);
        apply_select_flags(&mut cfg, &flags.select);
        apply_vmd_flags(&mut cfg, &flags.vmd);
        Ok(cfg)
    }
}

fn apply_delay_flags(cfg: &mut PipelineConfig, f: &DelayFlags) {
    if let Some(b) = f.b_exponent {
        cfg.delay.b_exponent = b;
    }
    if f.k_max.is_some() {
        cfg.delay.k_max = f.k_max;
    }
}

fn apply_select_flags(cfg: &mut PipelineConfig, f: &SelectFlags) {
    if let Some(t) = f.threshold {
        cfg.selection.threshold = t;
    }
    if let Some(forced) = &f.forced {
        cfg.selection.forced = forced.clone();
    }
    if let Some(n) = f.n_trees {
        cfg.selection.forest.n_trees = n;
    }
    if let Some(r) = f.rounds {
        cfg.selection.boost.n_rounds = r;
    }
}

fn apply_vmd_flags(cfg: &mut PipelineConfig, f: &VmdFlags) {
    if let Some(a) = f.alpha {
        cfg.vmd.alpha = a;
    }
    if let Some(t) = f.tol {
        cfg.vmd.tol = t;
    }
    if let Some(m) = f.max_iter {
        cfg.vmd.max_iter = m;
    }
    if let Some(c) = f.corr_threshold {
        cfg.mode_count.corr_threshold = c;
    }
    if let Some(k) = f.k_cap {
        cfg.mode_count.k_cap = k;
    }
}

/// Uses the reference schema when the file carries exactly its labels and
/// target, and otherwise infers one from the header. A leading column named
/// like a timestamp is skipped.
pub fn load_csv(path: &Path, target: &str) -> Result<TimeSeriesTable> {
    fs::metadata(path).map_err(|e| Error::file(path, e))?;
    let header = read_header(path)?;
    let reference = Schema::table1();
    let mut labels: Vec<String> = header.clone();
    if labels
        .first()
        .is_some_and(|h| ["timestamp", "time", "date", "datetime"].contains(&h.to_ascii_lowercase().as_str()))
    {
        labels.remove(0);
    }
    let matches_reference = target == reference.target()
        && labels.len() == reference.len()
        && labels.iter().all(|l| reference.index_of(l).is_some());
    let schema = if matches_reference {
        reference
    } else if labels.iter().any(|l| l == target) {
        Schema::infer(&labels, target)?
    } else {
        return Err(Error::MissingColumn(target.to_string()));
    };
    load_table(path, &schema)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::file(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

fn dispatch(cmd: Command) -> Outcome<String> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Clean(a) => clean(a),
        Command::Delays(a) => delays(a),
        Command::Select(a) => select(a),
        Command::Decompose(a) => decompose_cmd(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Ablate(a) => ablate(a),
        Command::Sensitivity(a) => sensitivity(a),
    }
}

fn synth(a: SynthArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let mut cfg = ctx.run.synth.clone().unwrap_or_default();
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(s) = a.noise_sigma {
        cfg.noise_sigma = s;
    }
    if let Some(t) = &a.tones {
        cfg.tones = t.clone();
    }
    for (label, lag) in &a.delays {
        cfg.delays.insert(label.clone(), *lag);
    }
    let seed = ctx.seed()?;
    let (table, truth) = generate_synthetic(&cfg, seed)?;
    let out = ctx.output(&a.out, "synth.csv")?;
    table.save_csv(&out)?;
    if let Some(p) = &a.truth {
        write(p, &serde_json::to_string_pretty(&truth).map_err(Error::from)?)?;
    }
    Ok(format!(
        "synth: wrote {} rows x {} columns to {} (seed {seed}, SNR {:.1} dB)",
        table.n_rows(),
        table.n_cols(),
        out.display(),
        cfg.snr_db()
    ))
}

fn clean(a: CleanArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let table = ctx.data(&a.input)?;
    let sigma_k = a.sigma_k.unwrap_or(ctx.run.clean.sigma_k);
    let lookback = a.lookback.unwrap_or(ctx.run.clean.lookback);
    let cleaned = clean_outliers(&table, sigma_k, lookback);
    let changed: usize = table
        .columns()
        .iter()
        .zip(cleaned.columns())
        .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x.to_bits() != y.to_bits()).count())
        .sum();
    let out = ctx.output(&a.out, "clean.csv")?;
    cleaned.save_csv(&out)?;
    Ok(format!(
        "clean: replaced {changed} values in {} rows; wrote {}",
        table.n_rows(),
        out.display()
    ))
}

fn delays(a: DelaysArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let table = ctx.data(&a.input)?;
    let mut cfg = ctx.run.pipeline.clone().unwrap_or_default();
    apply_delay_flags(&mut cfg, &a.delay);
    let (normed, _) = normalize(&table).map_err(|e| e.in_stage("normalize"))?;
    let map = estimate_delays(&normed, &cfg.delay).map_err(|e| e.in_stage("delay"))?;
    let out = ctx.output(&a.out, "delays.json")?;
    write(&out, &map.to_json()?)?;
    Ok(format!(
        "delays: {} inputs, largest lag {} samples; wrote {}",
        map.len(),
        map.max_lag(),
        out.display()
    ))
}

fn select(a: SelectArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let table = ctx.data(&a.input)?;
    let mut cfg = ctx.run.pipeline.clone().unwrap_or_default();
    cfg.seed = ctx.seed.unwrap_or(cfg.seed);
    apply_select_flags(&mut cfg, &a.select);
    let (normed, _) = normalize(&table).map_err(|e| e.in_stage("normalize"))?;
    let aligned = match &a.delays {
        Some(p) => {
            let text = read(p)?;
            let map = DelayMap::from_json(&text)?;
            reconstruct(&normed, &map, &ctx.target).map_err(|e| e.in_stage("reconstruct"))?
        }
        None => normed,
    };
    let labels = aligned.schema().candidates();
    let x: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| aligned.column(l).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let mut sel = cfg.selection.clone();
    sel.forest.seed = pipeline::forest_seed(cfg.seed);
    let report = compute_importance(&labels, &x, aligned.target(), &sel).map_err(|e| e.in_stage("select"))?;
    let chosen = select_features(&report, sel.threshold, &sel.forced)
        .map_err(|e| e.in_stage("select"))?;
    let out = ctx.output(&a.out, "importance.json")?;
    write(&out, &report.to_json()?)?;
    if let Some(p) = &a.csv {
        report.write_csv(create(p)?)?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(format!("select: kept {} of {} inputs [{}]; wrote {}", chosen.len(), labels.len(), chosen.join(","), out.display()))
}

fn decompose_cmd(a: DecomposeArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let table = ctx.data(&a.input)?;
    let mut cfg = ctx.run.pipeline.clone().unwrap_or_default();
    apply_vmd_flags(&mut cfg, &a.vmd);
    let column = a.column.clone().unwrap_or_else(|| cfg.decompose_label.clone());
    let signal = table.column(&column)?;
    let set = match a.k {
        Some(k) => decompose(signal, k, &cfg.vmd),
        None => select_mode_count(signal, &cfg.vmd, &cfg.mode_count).map(|s| {
            if s.hit_cap {
                eprintln!("warning: mode count reached the cap of {}", cfg.mode_count.k_cap);
            }
            s.modes
        }),
    }
    .map_err(|e| e.in_stage("vmd"))?;
    let set = if a.prune { prune_last_mode(&set)? } else { set };
    let out = ctx.output(&a.out, "modes.csv")?;
    set.write_csv(create(&out)?)?;
    if let Some(p) = &a.json {
        write(p, &set.to_json()?)?;
    }
    let omegas: Vec<String> = set.omegas.iter().map(|w| format!("{w:.4}")).collect();
    Ok(format!(
        "decompose: {column} -> {} modes, center frequencies [{}] cycles/sample; wrote {}",
        set.k(),
        omegas.join(", "),
        out.display()
    ))
}

fn train_split(table: &TimeSeriesTable, rows: Option<usize>) -> Result<TimeSeriesTable> {
    match rows {
        Some(n) if n < table.n_rows() => Ok(split(table, n)?.0),
        _ => Ok(table.clone()),
    }
}

fn train(a: TrainArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let cfg = ctx.pipeline_config(&a.model)?;
    let table = ctx.data(&a.input)?;
    let rows = a.train_rows.or(ctx.run.train_rows);
    let train = train_split(&table, rows)?;
    let model = pipeline::fit(&train, &cfg)?;
    let out = ctx.output(&a.out, "model.json")?;
    write(&out, &model.to_json()?)?;
    Ok(format!(
        "train: {} rows, {} features [{}], {} network inputs{}; wrote {}",
        train.n_rows(),
        model.features.len(),
        model.features.join(","),
        model.initial.input_dim(),
        if model.ec.is_some() { " + error correction" } else { "" },
        out.display()
    ))
}

fn evaluate(a: EvaluateArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let text = fs::read_to_string(&a.model)
        .map_err(|e| usage(format!("cannot read model {}: {e}", a.model.display())))?;
    let model = PipelineModel::from_json(&text)?;
    let seed = ctx.seed()?;
    if seed != model.config.seed {
        return Err(Failure::Data(Error::invalid(format!(
            "model was trained with seed {}, not {seed}",
            model.config.seed
        ))));
    }
    let table = ctx.data(&a.input)?;
    let skip = a.skip_rows.or(ctx.run.train_rows).unwrap_or(0);
    if skip >= table.n_rows() {
        return Err(usage(format!("cannot skip {skip} of {} rows", table.n_rows())));
    }
    let rows = table.slice_rows(skip, table.n_rows());
    let report = pipeline::predict(&model, &rows)?;
    let metrics_path = ctx.output(&a.metrics, "metrics.json")?;
    write(&metrics_path, &serde_json::to_string_pretty(&report.summary()).map_err(Error::from)?)?;
    if let Some(p) = &a.metrics_csv {
        report.write_metrics_csv(create(p)?)?;
    }
    if let Some(p) = &a.predictions {
        report.write_predictions_csv(create(p)?)?;
    }
    if let Some(p) = &a.report {
        write(p, &report.to_json()?)?;
    }
    let m = report.final_metrics();
    let mape = m.mape.map_or("undefined".to_string(), |v| format!("{v:.4}%"));
    Ok(format!(
        "evaluate: n={} MSE={:.6} MAE={:.6} MAPE={mape}",
        rows.n_rows(),
        m.mse,
        m.mae
    ))
}

fn study_split(ctx: &Ctx, a: &StudyArgs) -> Outcome<(TimeSeriesTable, TimeSeriesTable)> {
    let table = ctx.data(&a.input)?;
    let n = a.train_rows.or(ctx.run.train_rows).unwrap_or(table.n_rows() * 3 / 4);
    Ok(split(&table, n)?)
}

fn study_config(ctx: &Ctx, a: &StudyArgs, train: &TimeSeriesTable) -> Outcome<PipelineConfig> {
    let mut cfg = ctx.pipeline_config(&a.model)?;
    if a.tune_hidden {
        let search = pipeline::tune_hidden(train, &cfg, &pipeline::default_hidden_grid(), 0.2)?;
        for (hidden, mape) in &search.scores {
            eprintln!("hidden {hidden:>4}: validation MAPE {mape:.4}%");
        }
        cfg.elm.hidden = search.best;
    }
    Ok(cfg)
}

fn ablate(a: StudyArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let (train, test) = study_split(&ctx, &a)?;
    let cfg = study_config(&ctx, &a, &train)?;
    let report = pipeline::ablate(&train, &test, &cfg)?;
    let out = ctx.output(&a.out, "ablation.json")?;
    write(&out, &report.to_json()?)?;
    if let Some(p) = &a.csv {
        report.write_csv(create(p)?)?;
    }
    eprint!("{}", report.render());
    let full = report.rows.first().map(|r| r.metrics.mape);
    let mape = full.flatten().map_or("undefined".to_string(), |v| format!("{v:.4}%"));
    Ok(format!(
        "ablate: {} configurations, full-model MAPE {mape}; wrote {}",
        report.rows.len(),
        out.display()
    ))
}

fn sensitivity(a: StudyArgs) -> Outcome<String> {
    let ctx = Ctx::new(&a.common)?;
    let (train, test) = study_split(&ctx, &a)?;
    let cfg = study_config(&ctx, &a, &train)?;
    let report = pipeline::sensitivity(&train, &test, &cfg)?;
    let out = ctx.output(&a.out, "sensitivity.json")?;
    write(&out, &report.to_json()?)?;
    if let Some(p) = &a.csv {
        report.write_csv(create(p)?)?;
    }
    eprint!("{}", report.render());
    let top = report
        .ranking()
        .first()
        .map(|r| format!("{} (+{:.1}%)", r.feature.as_deref().unwrap_or(""), r.growth_pct))
        .unwrap_or_default();
    Ok(format!(
        "sensitivity: baseline MAPE {:.4}%, most sensitive {top}; wrote {}",
        report.baseline_mape,
        out.display()
    ))
}
