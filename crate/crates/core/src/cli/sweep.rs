use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::anneal::AnnealSchedule;
use crate::datagen::{self, AdhocGenerator, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelKind;
use crate::optimize::{self, OptimizerConfig, SolverBackend, TrainConfig};
use crate::qkernel::DataMap;

use super::{load_dataset, write_meta, SweepArgs};

/// Sizes above this are skipped for quantum methods unless requested.
const QUANTUM_SIZE_LIMIT: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethod {
    /// rbf kernel, greedy QUBO descent.
    Classical,
    /// Quantum kernel, greedy QUBO descent.
    Qsvm,
    /// Quantum kernel, simulated annealing.
    Hqsvm,
}

impl SweepMethod {
    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Classical => "classical",
            SweepMethod::Qsvm => "qsvm",
            SweepMethod::Hqsvm => "hqsvm",
        }
    }

    pub fn kernel(self) -> KernelKind {
        match self {
            SweepMethod::Classical => KernelKind::Rbf,
            _ => KernelKind::QuantumZz,
        }
    }

    pub fn backend(self) -> SolverBackend {
        match self {
            SweepMethod::Hqsvm => SolverBackend::Anneal,
            _ => SolverBackend::Greedy,
        }
    }

    pub fn is_quantum(self) -> bool {
        self != SweepMethod::Classical
    }
}

impl std::str::FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(SweepMethod::Classical),
            "qsvm" => Ok(SweepMethod::Qsvm),
            "hqsvm" => Ok(SweepMethod::Hqsvm),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub n_test: usize,
    pub method: SweepMethod,
    pub seed: u64,
    pub kernel: KernelKind,
    pub backend: SolverBackend,
    pub accuracy: f64,
    pub iterations: usize,
    pub best_iteration: usize,
    pub wall_time_s: f64,
}

impl SweepRow {
    fn key(&self) -> (usize, SweepMethod, u64) {
        (self.size, self.method, self.seed)
    }
}

#[derive(Debug, Clone, Serialize)]
struct SummaryRow {
    size: usize,
    method: SweepMethod,
    runs: usize,
    mean_accuracy: f64,
    mean_iterations: f64,
}

fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.into(),
        source: e,
    })?;
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e| Error::Csv {
                path: path.into(),
                source: e,
            })
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |e| Error::Csv {
        path: path.into(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn append_row(path: &Path, row: &SweepRow) -> Result<()> {
    let file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    w.serialize(row).map_err(|e| Error::Csv {
        path: path.into(),
        source: e,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn default_summary(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "sweep".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.summary.csv"))
}

/// Jobs in output order, with quantum methods above the size limit removed unless requested.
pub(super) fn jobs(a: &SweepArgs) -> Vec<(usize, SweepMethod, u64)> {
    let sizes: BTreeSet<usize> = a.sizes.iter().copied().collect();
    let methods: BTreeSet<SweepMethod> = a.methods.iter().copied().collect();
    let seeds: BTreeSet<u64> = a.seeds.iter().copied().collect();
    let mut out = Vec::new();
    for &size in &sizes {
        for &method in &methods {
            if method.is_quantum() && size > QUANTUM_SIZE_LIMIT && !a.include_500_quantum {
                continue;
            }
            for &seed in &seeds {
                out.push((size, method, seed));
            }
        }
    }
    out
}

fn job_data(
    a: &SweepArgs,
    source: Option<&Dataset>,
    size: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let spec = SplitSpec::new(size, seed);
    match source {
        Some(ds) => datagen::split(ds, &spec),
        None => {
            let generator = AdhocGenerator::new(2, a.delta, seed)?;
            let ds = generator.sample(spec.n_train + spec.n_test, seed)?;
            datagen::split(&ds, &spec)
        }
    }
}

fn job_config(a: &SweepArgs, method: SweepMethod, seed: u64) -> (TrainConfig, OptimizerConfig) {
    let s = &a.solver;
    let cfg = TrainConfig {
        max_iterations: s.max_iters,
        target_accuracy: s.target_acc,
        solver_backend: method.backend(),
        qubo_builder: s.qubo,
        kernel_kind: method.kernel(),
        data_map: DataMap::default(),
        penalty: s.penalty,
        schedule: AnnealSchedule {
            num_reads: s.reads,
            sweeps: s.sweeps,
            beta_start: s.beta_start,
            beta_end: s.beta_end,
            seed,
        },
        seed,
    };
    let opt = OptimizerConfig {
        rho_begin: s.rho_begin,
        rho_end: s.rho_end,
        ..optimize::default_train_optimizer()
    };
    (cfg, opt)
}

pub(super) fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    if a.sizes.is_empty() || a.methods.is_empty() || a.seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one size, method and seed".into(),
        ));
    }
    let source = match &a.data {
        Some(path) => {
            let ds = load_dataset(
                path,
                &a.features,
                a.label_column.as_deref(),
                &a.positive_label,
            )?;
            Some(if a.rescale {
                datagen::rescale(&ds)?.0
            } else {
                ds
            })
        }
        None => None,
    };

    let mut rows: Vec<SweepRow> = if a.resume && a.out.exists() {
        read_rows(&a.out)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<_> = rows.iter().map(SweepRow::key).collect();
    if rows.is_empty() {
        std::fs::write(
            &a.out,
            "size,n_test,method,seed,kernel,backend,accuracy,iterations,best_iteration,wall_time_s\n",
        )
        .map_err(|e| Error::io(&a.out, e))?;
    }

    for (size, method, seed) in jobs(a) {
        if done.contains(&(size, method, seed)) {
            continue;
        }
        let start = Instant::now();
        let (train, val) = job_data(a, source.as_ref(), size, seed)?;
        let (cfg, opt) = job_config(a, method, seed);
        let report = optimize::train(&train, &val, &cfg, &opt)?;
        let row = SweepRow {
            size,
            n_test: val.len(),
            method,
            seed,
            kernel: cfg.kernel_kind,
            backend: cfg.solver_backend,
            accuracy: report.best_accuracy,
            iterations: report.iterations_used,
            best_iteration: report.best_iteration,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        eprintln!(
            "{} size {} seed {}: accuracy {:.4} in {} iteration(s)",
            method.name(),
            size,
            seed,
            row.accuracy,
            row.iterations
        );
        append_row(&a.out, &row)?;
        rows.push(row);
    }

    rows.sort_by_key(SweepRow::key);
    write_rows(&a.out, &rows)?;
    write_meta(&a.out, "sweep", a)?;

    let mut groups: BTreeMap<(usize, SweepMethod), Vec<&SweepRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.size, r.method)).or_default().push(r);
    }
    let summary: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((size, method), rs)| SummaryRow {
            size,
            method,
            runs: rs.len(),
            mean_accuracy: rs.iter().map(|r| r.accuracy).sum::<f64>() / rs.len() as f64,
            mean_iterations: rs.iter().map(|r| r.iterations as f64).sum::<f64>() / rs.len() as f64,
        })
        .collect();
    let summary_path = a.summary.clone().unwrap_or_else(|| default_summary(&a.out));
    write_rows(&summary_path, &summary)?;
    write_meta(&summary_path, "sweep", a)
}
