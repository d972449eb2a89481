use std::path::{Path, PathBuf};

use aigem::traj::{compute_headings, downsample, ingest_ngsim_csv, synth_generate, LengthUnit, ScenarioSpec};
use aigem::train::{
    ablate_concat, ablate_dmin, evaluate, train, AblationData, AblationTable, ConstantVelocity, EvalReport,
    GroundTruth, Predictor, TrainConfig, TrainOutcome, TrainedModel, Trajectory,
};
use aigem::{GraphConfig, Scalar};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{AblationKind, Precision, PredictorKind, RunConfig, Split};
use crate::dataset::{build_dataset, load_dataset, prepare_output, write_json, Dataset, CONFIG_FILE, SCALER_FILE, SPLIT_FILE, WINDOWS_FILE};
use crate::error::{CliError, Result, ResultExt};
use crate::plot;

#[derive(Debug, Parser)]
#[command(name = "aigem", version, about = "Graph-attention trajectory prediction: data, training, evaluation and figures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn an NGSIM-style CSV into a windowed, split and scaled dataset.
    Ingest(IngestArgs),
    /// Generate a synthetic highway scenario into the same dataset format.
    Synth(SynthArgs),
    /// Train one model for one horizon.
    Train(TrainArgs),
    /// Score a model or a reference predictor on a dataset split.
    Eval(EvalArgs),
    /// Run the d_min and concatenation ablations.
    Ablate(AblateArgs),
    /// Render SVG figures from CSV artifacts.
    Plot(PlotArgs),
    /// Write the predicted trajectories of one window as JSON.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Default)]
pub struct DataFlags {
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long)]
    pub future: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Split seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long)]
    pub downsample: Option<i64>,
    #[arg(long, value_parser = parse_unit)]
    pub unit: Option<LengthUnit>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario description file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataFlags,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Initialization, shuffling and dropout seed.
    #[arg(long)]
    pub train_seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub d_min: Option<f64>,
    #[arg(long)]
    pub concat: Option<bool>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub mlp_hidden: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `ingest` or `synth`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorKind>,
    /// Checkpoint written by `train` (required for `--predictor model`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: Option<Split>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub kind: Option<AblationKind>,
    #[arg(long, value_delimiter = ',')]
    pub d_min_values: Option<Vec<f64>>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV artifacts, or directories searched for them.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Directory receiving one SVG per input.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Window position within the split.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

fn parse_unit(s: &str) -> std::result::Result<LengthUnit, String> {
    match s {
        "feet" => Ok(LengthUnit::Feet),
        "meters" => Ok(LengthUnit::Meters),
        _ => Err(format!("expected `feet` or `meters`, got `{s}`")),
    }
}

macro_rules! set {
    ($flag:expr => $target:expr) => {
        if let Some(v) = $flag.clone() {
            $target = v;
        }
    };
}

impl DataFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        set!(self.history => cfg.data.history);
        set!(self.future => cfg.data.future);
        set!(self.seed => cfg.data.seed);
        set!(self.radius => cfg.data.radius);
        if self.stride.is_some() {
            cfg.data.stride = self.stride;
        }
    }
}

impl TrainFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        set!(self.epochs => t.epochs);
        set!(self.learning_rate => t.learning_rate);
        set!(self.lr_decay => t.lr_decay);
        set!(self.batch_size => t.batch_size);
        set!(self.dropout => t.dropout);
        set!(self.train_seed => t.seed);
        set!(self.horizon => t.horizon);
        set!(self.d_min => t.d_min);
        set!(self.concat => t.concat);
        set!(self.hidden => t.hidden);
        set!(self.layers => t.layers);
        set!(self.mlp_hidden => t.mlp_hidden);
        set!(self.precision => cfg.precision);
    }
}

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let path = dir.join(CONFIG_FILE);
    std::fs::write(&path, cfg.to_toml()?).data_ctx(|| format!("writing {}", path.display()))
}

fn write_csv_file(path: &Path, f: impl FnOnce(std::fs::File) -> aigem::train::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).data_ctx(|| format!("creating {}", path.display()))?;
    f(file).map_err(|e| CliError::from(e).context(format!("writing {}", path.display())))
}

const DATA_FILES: [&str; 4] = [WINDOWS_FILE, SPLIT_FILE, SCALER_FILE, CONFIG_FILE];

pub fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    args.data.apply(&mut cfg);
    set!(args.downsample => cfg.data.downsample);
    set!(args.unit => cfg.data.unit);
    if !args.input.is_file() {
        return Err(CliError::data(anyhow::anyhow!("input file {} does not exist", args.input.display())));
    }
    prepare_output(&args.common.out, &DATA_FILES, args.common.force)?;
    let tracks = ingest_ngsim_csv(&args.input, cfg.data.unit)
        .map_err(|e| CliError::from(e).context(format!("ingesting {}", args.input.display())))?;
    let tracks = downsample(&tracks, cfg.data.downsample)?;
    let tracks = tracks
        .iter()
        .filter(|t| t.points.len() >= 2)
        .map(compute_headings)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let summary = build_dataset(&tracks, &cfg.data, &args.common.out)?;
    write_config(&args.common.out, &cfg)?;
    println!("{}", serde_json::to_string(&summary).map_err(CliError::data)?);
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    args.data.apply(&mut cfg);
    let text = std::fs::read_to_string(&args.scenario).data_ctx(|| format!("reading scenario {}", args.scenario.display()))?;
    let spec = ScenarioSpec::parse(&text).map_err(|e| CliError::from(e).context(format!("scenario {}", args.scenario.display())))?;
    prepare_output(&args.common.out, &DATA_FILES, args.common.force)?;
    let tracks = synth_generate(&spec)?;
    let summary = build_dataset(&tracks, &cfg.data, &args.common.out)?;
    write_config(&args.common.out, &cfg)?;
    println!("{}", serde_json::to_string(&summary).map_err(CliError::data)?);
    Ok(())
}

fn check_graph(train: &TrainConfig, data: &Dataset) -> Result<()> {
    if train.radius > data.cache.radius + 1e-9 {
        return Err(CliError::usage(anyhow::anyhow!(
            "train.radius {} exceeds the {} m the dataset was cut with",
            train.radius,
            data.cache.radius
        )));
    }
    if train.horizon > data.cache.future_len {
        return Err(CliError::usage(anyhow::anyhow!(
            "horizon {} exceeds the dataset's {} future steps",
            train.horizon,
            data.cache.future_len
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    precision: Precision,
    param_count: usize,
    best_epoch: usize,
    epochs_run: usize,
    final_train_loss: f64,
    final_val_loss: f64,
    best_val_loss: f64,
}

pub const MODEL_FILE: &str = "model.json";
pub const CURVES_FILE: &str = "curves.csv";

fn save_training<T: Scalar>(out: &TrainOutcome<T>, dir: &Path, precision: Precision) -> Result<()> {
    out.model.save(&dir.join(MODEL_FILE))?;
    let path = dir.join(CURVES_FILE);
    let mut w = csv::Writer::from_path(&path).data_ctx(|| format!("creating {}", path.display()))?;
    for r in &out.curves {
        w.serialize(r).map_err(CliError::data)?;
    }
    w.flush().map_err(CliError::data)?;
    let last = out.curves.last().expect("at least one epoch");
    let summary = TrainSummary {
        precision,
        param_count: out.model.params.param_count(),
        best_epoch: out.best_epoch,
        epochs_run: out.curves.len(),
        final_train_loss: last.train_loss,
        final_val_loss: last.val_loss,
        best_val_loss: out.curves[out.best_epoch - 1].val_loss,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary).map_err(CliError::data)?);
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    args.train.apply(&mut cfg);
    cfg.train.validate()?;
    let data = load_dataset(&args.data)?;
    check_graph(&cfg.train, &data)?;
    let dir = &args.common.out;
    prepare_output(dir, &[MODEL_FILE, CURVES_FILE, "summary.json", CONFIG_FILE], args.common.force)?;
    write_config(dir, &cfg)?;
    let (tr, va) = (data.windows(Split::Train), data.windows(Split::Val));
    match cfg.precision {
        Precision::F64 => save_training(&train::<f64>(&cfg.train, &tr, &va, &data.scaler)?, dir, cfg.precision),
        Precision::F32 => save_training(&train::<f32>(&cfg.train, &tr, &va, &data.scaler)?, dir, cfg.precision),
    }
}

fn load_model(path: &Path, precision: Precision) -> Result<Box<dyn Predictor>> {
    if !path.is_file() {
        return Err(CliError::data(anyhow::anyhow!("checkpoint {} does not exist (run `aigem train` first)", path.display())));
    }
    let ctx = |e: aigem::train::TrainError| CliError::from(e).context(format!("loading {}", path.display()));
    Ok(match precision {
        Precision::F64 => Box::new(TrainedModel::<f64>::load(path).map_err(ctx)?),
        Precision::F32 => Box::new(TrainedModel::<f32>::load(path).map_err(ctx)?),
    })
}

fn model_horizon(path: &Path) -> Result<usize> {
    Ok(TrainedModel::<f64>::load(path).map_err(CliError::from)?.horizon)
}

fn model_graph(path: &Path) -> Result<GraphConfig> {
    Ok(TrainedModel::<f64>::load(path).map_err(CliError::from)?.graph)
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    set!(args.predictor => cfg.eval.predictor);
    set!(args.split => cfg.eval.split);
    set!(args.precision => cfg.precision);
    if args.horizon.is_some() {
        cfg.eval.horizon = args.horizon;
    }
    let data = load_dataset(&args.data)?;
    let (predictor, graph, default_horizon): (Box<dyn Predictor>, GraphConfig, usize) = match cfg.eval.predictor {
        PredictorKind::Model => {
            let path = args
                .model
                .as_deref()
                .ok_or_else(|| CliError::usage(anyhow::anyhow!("--predictor model needs --model <checkpoint>")))?;
            (load_model(path, cfg.precision)?, model_graph(path)?, model_horizon(path)?)
        }
        PredictorKind::Cv => (Box::new(ConstantVelocity), cfg.train.graph(), cfg.train.horizon),
        PredictorKind::Truth => (Box::new(GroundTruth), cfg.train.graph(), cfg.train.horizon),
    };
    let horizon = cfg.eval.horizon.unwrap_or(default_horizon);
    if horizon == 0 || horizon > data.cache.future_len {
        return Err(CliError::usage(anyhow::anyhow!(
            "horizon must be in 1..={}, got {horizon}",
            data.cache.future_len
        )));
    }
    let dir = &args.common.out;
    prepare_output(dir, &[REPORT_JSON, REPORT_CSV, CONFIG_FILE], args.common.force)?;
    write_config(dir, &cfg)?;
    let report: EvalReport = evaluate(predictor.as_ref(), &data.windows(cfg.eval.split), &graph, horizon)?;
    write_json(&dir.join(REPORT_JSON), &report)?;
    write_csv_file(&dir.join(REPORT_CSV), |f| report.write_csv(f))?;
    println!("{}", serde_json::to_string(&report).map_err(CliError::data)?);
    Ok(())
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.common.config.as_deref())?;
    args.train.apply(&mut cfg);
    set!(args.kind => cfg.ablate.kind);
    set!(args.d_min_values => cfg.ablate.d_min_values);
    cfg.train.validate()?;
    let data = load_dataset(&args.data)?;
    check_graph(&cfg.train, &data)?;
    let kinds: &[(&str, AblationKind)] = match cfg.ablate.kind {
        AblationKind::Dmin => &[("d_min", AblationKind::Dmin)],
        AblationKind::Concat => &[("concat", AblationKind::Concat)],
        AblationKind::Both => &[("d_min", AblationKind::Dmin), ("concat", AblationKind::Concat)],
    };
    let files: Vec<String> =
        kinds.iter().flat_map(|(n, _)| [format!("ablation_{n}.csv"), format!("ablation_{n}.json")]).collect();
    let mut names: Vec<&str> = files.iter().map(String::as_str).collect();
    names.push(CONFIG_FILE);
    let dir = &args.common.out;
    prepare_output(dir, &names, args.common.force)?;
    write_config(dir, &cfg)?;
    let (tr, va, te) = (data.windows(Split::Train), data.windows(Split::Val), data.windows(Split::Test));
    let ad = AblationData { train: &tr, val: &va, test: &te, scaler: &data.scaler };
    for (name, kind) in kinds {
        let table: AblationTable = match kind {
            AblationKind::Dmin => ablate_dmin(&cfg.train, &cfg.ablate.d_min_values, &ad)?,
            _ => ablate_concat(&cfg.train, &ad)?,
        };
        write_csv_file(&dir.join(format!("ablation_{name}.csv")), |f| table.write_csv(f))?;
        write_json(&dir.join(format!("ablation_{name}.json")), &table)?;
        println!("{}", serde_json::to_string(&table).map_err(CliError::data)?);
    }
    Ok(())
}

/// CSV files directly inside `dir`, sorted by name.
fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).data_ctx(|| format!("listing {}", dir.display()))? {
        let p = entry.map_err(CliError::data)?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let mut inputs = Vec::new();
    for p in &args.input {
        if p.is_dir() {
            let found: Vec<PathBuf> = csv_files(p)?
                .into_iter()
                .filter(|f| plot::Table::read(f).ok().and_then(|t| plot::detect(&t)).is_some())
                .collect();
            inputs.extend(found);
        } else if p.is_file() {
            inputs.push(p.clone());
        } else {
            return Err(CliError::data(anyhow::anyhow!("{} does not exist", p.display())));
        }
    }
    if inputs.is_empty() {
        return Err(CliError::data(anyhow::anyhow!("no plottable CSV among the inputs")));
    }
    let stem = |p: &Path| p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let outs: Vec<String> = inputs
        .iter()
        .map(|p| {
            let clash = inputs.iter().filter(|q| stem(q) == stem(p)).count() > 1;
            match p.parent().and_then(|d| d.file_name()) {
                // same file name in several directories: prefix the directory
                Some(d) if clash => format!("{}_{}.svg", d.to_string_lossy(), stem(p)),
                _ => format!("{}.svg", stem(p)),
            }
        })
        .collect();
    let names: Vec<&str> = outs.iter().map(String::as_str).collect();
    prepare_output(&args.out, &names, args.force)?;
    for (input, name) in inputs.iter().zip(&outs) {
        let target = args.out.join(name);
        plot::render(input, &target)?;
        println!("{}", target.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct ActorPrediction {
    actor_id: u64,
    positions: Trajectory,
}

#[derive(Serialize)]
struct WindowPrediction {
    ego_id: u64,
    start_frame: u64,
    horizon: usize,
    dt: f64,
    actors: Vec<ActorPrediction>,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let windows = data.windows(args.split);
    let w = windows.get(args.index).ok_or_else(|| {
        CliError::usage(anyhow::anyhow!("split has {} windows, index {} is out of range", windows.len(), args.index))
    })?;
    let model = load_model(&args.model, Precision::F64)?;
    let horizon = match args.horizon {
        Some(h) => h,
        None => model_horizon(&args.model)?,
    };
    let graph = model_graph(&args.model)?;
    if !args.force && args.out.exists() {
        return Err(CliError::usage(anyhow::anyhow!("{} already exists; pass --force to overwrite", args.out.display())));
    }
    let present: Vec<u64> = aigem::graph::build_hetero_graph(w, &graph, None)?
        .nodes
        .iter()
        .filter(|n| n.step == w.history_len && !n.is_ego)
        .map(|n| n.actor_id)
        .collect();
    let trajs = model.predict(w, &present, horizon)?;
    let out = WindowPrediction {
        ego_id: w.ego_id,
        start_frame: w.start_frame,
        horizon,
        dt: w.dt,
        actors: present.into_iter().zip(trajs).map(|(actor_id, positions)| ActorPrediction { actor_id, positions }).collect(),
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).data_ctx(|| format!("creating {}", parent.display()))?;
    }
    write_json(&args.out, &out)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Predict(a) => cmd_predict(a),
    }
}
