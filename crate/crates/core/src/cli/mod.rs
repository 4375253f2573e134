//! Command-line interface: data generation, training, evaluation, decision maps
//! and multi-size sweeps.

mod map;
mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::anneal::AnnealSchedule;
use crate::datagen::{self, AdhocGenerator, Dataset, Label, Scaling, SplitSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelKind;
use crate::optimize::{self, OptimizerConfig, SolverBackend, TrainConfig, TrainReport};
use crate::qkernel::DataMap;
use crate::qubo::{self, QuboBuilder, TrainedModel};

pub use map::{classification_map, MapCell};
pub use sweep::{SweepMethod, SweepRow};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Parser)]
#[command(
    name = "triqsvm",
    version,
    about = "Quantum-kernel SVM trained through QUBO annealing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a gap-separated ad-hoc dataset.
    GenData(GenDataArgs),
    /// Train a classifier and write its model and run report.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Export the decision function over a grid on [0, 2π]².
    Map(MapArgs),
    /// Train every (size, method, seed) combination and tabulate accuracies.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenDataArgs {
    /// Number of samples.
    #[arg(long)]
    pub m: usize,
    /// Separation gap, in [0, 1).
    #[arg(long, default_value_t = datagen::DEFAULT_GAP)]
    pub delta: f64,
    /// Number of features (qubits).
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Seed of the labelling unitary; also the point seed unless --point-seed is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the sample stream.
    #[arg(long)]
    pub point_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where a dataset comes from and how its columns are read.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV file; `f1..fd,label` unless --label-column is given.
    #[arg(long)]
    pub data: PathBuf,
    /// Feature columns of a foreign CSV, comma separated (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Label column of a foreign CSV.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Raw label value mapped to +1.
    #[arg(long, default_value = "1")]
    pub positive_label: String,
    /// Min-max rescale features onto [0, 2π] before use.
    #[arg(long)]
    pub rescale: bool,
}

/// Model, solver and optimiser settings shared by `train` and `sweep`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value = "anneal")]
    pub backend: SolverBackend,
    #[arg(long, default_value = "paper")]
    pub qubo: QuboBuilder,
    #[arg(long, default_value = "quantum-zz")]
    pub kernel: KernelKind,
    #[arg(long, default_value = "zz-offset")]
    pub data_map: DataMap,
    /// Diagonal penalty of the dual QUBO.
    #[arg(long, default_value_t = 0.0)]
    pub penalty: f64,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub target_acc: f64,
    #[arg(long, default_value_t = 50)]
    pub reads: usize,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta_end: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub rho_begin: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub rho_end: f64,
}

impl SolverArgs {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_iterations: self.max_iters,
            target_accuracy: self.target_acc,
            solver_backend: self.backend,
            qubo_builder: self.qubo,
            kernel_kind: self.kernel,
            data_map: self.data_map,
            penalty: self.penalty,
            schedule: AnnealSchedule {
                num_reads: self.reads,
                sweeps: self.sweeps,
                beta_start: self.beta_start,
                beta_end: self.beta_end,
                seed,
            },
            seed,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            rho_begin: self.rho_begin,
            rho_end: self.rho_end,
            ..optimize::default_train_optimizer()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Training rows drawn from --data (default: every row not used for validation or holdout).
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Validation rows (default: n_train / 5).
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Rows held out from training and validation and scored once at the end.
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    /// Separate validation CSV; when given --data is used whole for training.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Seed for the split, initial parameters and annealer.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for model.json and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON result file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Grid points per axis.
    #[arg(long, default_value_t = 50)]
    pub resolution: usize,
    /// CSV with x1,x2,decision_value,label.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG rendering.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Dataset drawn as triangles on the SVG (`f1,f2,label` format, already in model coordinates).
    #[arg(long)]
    pub test_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Training-set sizes; validation is a fifth of each.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,300,500")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "classical,qsvm,hqsvm")]
    pub methods: Vec<SweepMethod>,
    #[arg(long, value_delimiter = ',', default_value = "300,600,1000")]
    pub seeds: Vec<u64>,
    /// CSV source instead of generated ad-hoc data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long, default_value = "1")]
    pub positive_label: String,
    #[arg(long)]
    pub rescale: bool,
    /// Gap of the generated data.
    #[arg(long, default_value_t = datagen::DEFAULT_GAP)]
    pub delta: f64,
    /// Run quantum methods at size 500 too.
    #[arg(long)]
    pub include_500_quantum: bool,
    /// Keep rows already present in --out and skip those jobs.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub solver: SweepSolverArgs,
    /// Per-run table.
    #[arg(long)]
    pub out: PathBuf,
    /// Mean table (default: <out stem>.summary.csv).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Solver settings for sweeps; backend and kernel are fixed by each method.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepSolverArgs {
    #[arg(long, default_value = "paper")]
    pub qubo: QuboBuilder,
    #[arg(long, default_value_t = 0.0)]
    pub penalty: f64,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub target_acc: f64,
    #[arg(long, default_value_t = 50)]
    pub reads: usize,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta_end: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub rho_begin: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub rho_end: f64,
}

/// Saved classifier together with the flags that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: String,
    pub model: TrainedModel,
    /// Feature scaling applied before the kernel, when the data was rescaled.
    pub scaling: Option<Scaling>,
    pub flags: Value,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates model JSON; `context` names the source in errors.
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Json {
            context: context.to_string(),
            source: e,
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "{context}: unsupported schema_version `{}`",
                file.schema_version
            )));
        }
        file.model.validate()?;
        if let Some(s) = &file.scaling {
            let d = file.model.n_features().unwrap_or(s.min.len());
            if s.min.len() != d || s.max.len() != d {
                return Err(Error::InvalidParameter(format!(
                    "{context}: scaling has the wrong number of columns"
                )));
            }
        }
        Ok(file)
    }

    /// Maps raw feature values into the model's coordinates.
    pub fn prepare(&self, x: &[f64]) -> Vec<f64> {
        match &self.scaling {
            Some(s) => s.apply_point(x),
            None => x.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub source: PathBuf,
    pub rows: usize,
    pub n_features: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl DatasetInfo {
    fn of(ds: &Dataset, source: &Path) -> Self {
        Self {
            name: ds.name().to_string(),
            source: source.to_path_buf(),
            rows: ds.len(),
            n_features: ds.n_features(),
            positives: ds.count(Label::Positive),
            negatives: ds.count(Label::Negative),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitAccuracies {
    pub train: f64,
    pub validation: f64,
    pub holdout: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub command: String,
    pub flags: Value,
    pub datasets: Vec<DatasetInfo>,
    pub train_report: TrainReport,
    pub accuracies: SplitAccuracies,
    pub started_at: String,
    pub finished_at: String,
}

/// Parses the process arguments, runs the command and returns the exit code:
/// 0 on success, 1 for invalid input, 2 for runtime or numerical failure.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match crate::init_thread_pool().and_then(|()| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Map(a) => map::cmd_map(&a),
        Command::Sweep(a) => sweep::cmd_sweep(&a),
    }
}

pub(crate) fn flags_value<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("flag structs serialize")
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Path of the metadata file written next to a CSV output.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub(crate) fn write_meta<T: Serialize>(csv: &Path, command: &str, args: &T) -> Result<()> {
    write_json(
        &meta_path(csv),
        &serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "output": csv,
            "flags": flags_value(args),
        }),
    )
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<()> {
    let generator = AdhocGenerator::new(a.n, a.delta, a.seed)?;
    let ds = generator.sample(a.m, a.point_seed.unwrap_or(a.seed))?;
    ds.write_csv(&a.out)?;
    write_meta(&a.out, "gen-data", a)
}

pub(crate) fn load_dataset(
    path: &Path,
    features: &[String],
    label_column: Option<&str>,
    positive_label: &str,
) -> Result<Dataset> {
    match label_column {
        Some(label) => {
            let features: Vec<&str> = features.iter().map(String::as_str).collect();
            datagen::load_csv(path, &features, label, positive_label)
        }
        None => Dataset::read_csv(path),
    }
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_dataset(
            &self.data,
            &self.features,
            self.label_column.as_deref(),
            &self.positive_label,
        )
    }

    fn load_other(&self, path: &Path) -> Result<Dataset> {
        load_dataset(
            path,
            &self.features,
            self.label_column.as_deref(),
            &self.positive_label,
        )
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let raw = a.data.load()?;
    let (ds, scaling) = if a.data.rescale {
        let (ds, s) = datagen::rescale(&raw)?;
        (ds, Some(s))
    } else {
        (raw, None)
    };

    let mut infos = vec![DatasetInfo::of(&ds, &a.data.data)];
    let (train_set, val_set, holdout) = match &a.val {
        Some(val_path) => {
            let val = a.data.load_other(val_path)?;
            let val = match &scaling {
                Some(s) => s.apply(&val)?,
                None => val,
            };
            infos.push(DatasetInfo::of(&val, val_path));
            let n_train = a.n_train.unwrap_or(ds.len());
            let spec = SplitSpec {
                n_train,
                n_test: a.holdout,
                seed: a.seed,
            };
            let (train, hold) = datagen::split(&ds, &spec)?;
            (train, val, (a.holdout > 0).then_some(hold))
        }
        None => {
            let (n_train, n_test) = match (a.n_train, a.n_test) {
                (Some(t), Some(v)) => (t, v),
                (Some(t), None) => (t, t / 5),
                (None, v) => {
                    let avail = ds.len().saturating_sub(a.holdout);
                    let v = v.unwrap_or(avail / 6);
                    (avail.saturating_sub(v), v)
                }
            };
            let spec = SplitSpec {
                n_train,
                n_test,
                seed: a.seed,
            };
            let (train, val, rest) = datagen::split_with_rest(&ds, &spec)?;
            let holdout = if a.holdout > 0 {
                if rest.len() < a.holdout {
                    return Err(Error::InsufficientRows {
                        needed: n_train + n_test + a.holdout,
                        available: ds.len(),
                    });
                }
                let idx: Vec<usize> = (0..a.holdout).collect();
                Some(rest.subset(format!("{}-holdout", ds.name()), &idx))
            } else {
                None
            };
            (train, val, holdout)
        }
    };

    let cfg = a.solver.train_config(a.seed);
    let report = optimize::train(&train_set, &val_set, &cfg, &a.solver.optimizer())?;
    let model = &report.best_model;
    let accuracies = SplitAccuracies {
        train: qubo::accuracy(model, &train_set)?,
        validation: report.best_accuracy,
        holdout: holdout
            .as_ref()
            .map(|h| qubo::accuracy(model, h))
            .transpose()?,
    };

    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let flags = flags_value(a);
    write_json(
        &a.out.join("model.json"),
        &ModelFile {
            schema_version: SCHEMA_VERSION.into(),
            model: model.clone(),
            scaling,
            flags: flags.clone(),
        },
    )?;
    println!(
        "validation accuracy {:.4} after {} iteration(s)",
        accuracies.validation, report.iterations_used
    );
    write_json(
        &a.out.join("report.json"),
        &RunReport {
            schema_version: SCHEMA_VERSION.into(),
            command: "train".into(),
            flags,
            datasets: infos,
            train_report: report,
            accuracies,
            started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
        },
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub schema_version: String,
    pub flags: Value,
    pub dataset: DatasetInfo,
    pub accuracy: f64,
    pub correct: usize,
}

/// Prints the accuracy of the model on the dataset and returns it.
pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<f64> {
    let file = ModelFile::read(&a.model)?;
    let raw = a.data.load()?;
    // Data is mapped with the scaling fitted at training time, not refitted.
    let ds = match &file.scaling {
        Some(s) => s.apply(&raw)?,
        None => raw,
    };
    let acc = qubo::accuracy(&file.model, &ds)?;
    println!("{acc:.4}");
    if let Some(out) = &a.out {
        write_json(
            out,
            &EvaluationFile {
                schema_version: SCHEMA_VERSION.into(),
                flags: flags_value(a),
                dataset: DatasetInfo::of(&ds, &a.data.data),
                accuracy: acc,
                correct: (acc * ds.len() as f64).round() as usize,
            },
        )?;
    }
    Ok(acc)
}
