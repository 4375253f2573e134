//! Parameter optimisation and the outer training loop.
//!
//! Each objective evaluation builds the Gram matrix at the proposed parameters,
//! solves the resulting QUBO for α, fits β and scores the validation set. COBYLA
//! minimises `1 − accuracy` and the loop keeps the best iteration seen.

mod cobyla;

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cobyla::{cobyla_minimize, CobylaResult, CobylaStatus, OptimizerConfig};

use crate::anneal::{self, AnnealSchedule, SampleResult};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{KernelContext, KernelKind};
use crate::qkernel::{DataMap, THETA_BOUND};
use crate::qubo::{self, QuboBuilder, TrainedModel};

/// Largest training set for which each iteration's α is checked against brute force.
pub const EXACT_CHECK_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverBackend {
    Anneal,
    Exact,
    Greedy,
}

impl SolverBackend {
    pub fn name(self) -> &'static str {
        match self {
            SolverBackend::Anneal => "anneal",
            SolverBackend::Exact => "exact",
            SolverBackend::Greedy => "greedy",
        }
    }

    pub fn solve(self, q: &qubo::QuboMatrix, schedule: &AnnealSchedule) -> Result<SampleResult> {
        match self {
            SolverBackend::Anneal => anneal::simulated_anneal(q, schedule),
            SolverBackend::Exact => anneal::brute_force(q),
            SolverBackend::Greedy => anneal::greedy_descent(q, schedule.seed),
        }
    }
}

impl std::str::FromStr for SolverBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anneal" => Ok(SolverBackend::Anneal),
            "exact" => Ok(SolverBackend::Exact),
            "greedy" => Ok(SolverBackend::Greedy),
            other => Err(Error::InvalidParameter(format!(
                "unknown backend `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub target_accuracy: f64,
    pub solver_backend: SolverBackend,
    pub qubo_builder: QuboBuilder,
    pub kernel_kind: KernelKind,
    pub data_map: DataMap,
    /// Diagonal penalty, used only by the dual builder.
    pub penalty: f64,
    pub schedule: AnnealSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            target_accuracy: 1.0,
            solver_backend: SolverBackend::Anneal,
            qubo_builder: QuboBuilder::Paper,
            kernel_kind: KernelKind::QuantumZz,
            data_map: DataMap::default(),
            penalty: 0.0,
            schedule: AnnealSchedule::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.target_accuracy) {
            return Err(Error::InvalidParameter(format!(
                "target_accuracy {} outside [0, 1]",
                self.target_accuracy
            )));
        }
        if !self.penalty.is_finite() {
            return Err(Error::InvalidParameter("penalty must be finite".into()));
        }
        self.schedule.validate()
    }
}

/// Trust-region settings used for kernel training unless overridden.
pub fn default_train_optimizer() -> OptimizerConfig {
    OptimizerConfig {
        rho_begin: PI / 2.0,
        rho_end: 1e-3,
        max_evals: usize::MAX,
        f_target: None,
    }
}

/// Outcome of one objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub accuracy: f64,
    pub qubo_energy: Option<f64>,
    pub support_size: Option<usize>,
    /// Whether α matched the brute-force optimum; absent above [`EXACT_CHECK_LIMIT`].
    pub alpha_is_optimal: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub best_theta: Vec<f64>,
    pub best_iteration: usize,
    pub best_accuracy: f64,
    pub best_model: TrainedModel,
    pub accuracy_per_iteration: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub iterations_used: usize,
    pub status: CobylaStatus,
    pub wall_time: f64,
    pub config: TrainConfig,
    pub optimizer: OptimizerConfig,
}

/// Uniform draw from `[−2π, 2π]ᵖ`.
pub fn initial_theta(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| rng.random_range(-THETA_BOUND..=THETA_BOUND))
        .collect()
}

struct Evaluated {
    model: TrainedModel,
    accuracy: f64,
    record: IterationRecord,
}

fn evaluate(
    theta: &[f64],
    iteration: usize,
    train: &Dataset,
    val: &Dataset,
    ctx: &KernelContext,
    cfg: &TrainConfig,
) -> Result<Evaluated> {
    let kernel = cfg.kernel_kind.build(theta, ctx)?;
    let gram = kernel.gram(train.points())?;
    let q = cfg.qubo_builder.build(&gram, train.labels(), cfg.penalty)?;
    let schedule = AnnealSchedule {
        seed: cfg.schedule.seed.wrapping_add(iteration as u64),
        ..cfg.schedule
    };
    let sample = cfg.solver_backend.solve(&q, &schedule)?;
    let alpha_is_optimal = if q.size() <= EXACT_CHECK_LIMIT {
        let exact = match cfg.solver_backend {
            SolverBackend::Exact => sample.clone(),
            _ => anneal::brute_force(&q)?,
        };
        Some(sample.best_energy <= exact.best_energy + 1e-9 * (1.0 + exact.best_energy.abs()))
    } else {
        None
    };
    let beta = qubo::compute_beta(&sample.best_assignment, train.labels(), &gram)?;
    let support_size = sample.best_assignment.iter().filter(|&&a| a == 1).count();
    let model = TrainedModel::new(
        sample.best_assignment,
        beta,
        train,
        kernel,
        cfg.qubo_builder,
    )?;
    let accuracy = qubo::accuracy(&model, val)?;
    Ok(Evaluated {
        model,
        accuracy,
        record: IterationRecord {
            iteration,
            theta: theta.to_vec(),
            accuracy,
            qubo_energy: Some(sample.best_energy),
            support_size: Some(support_size),
            alpha_is_optimal,
            error: None,
        },
    })
}

/// Runs the training cycle and returns the best iteration.
///
/// The evaluation budget is the smaller of `cfg.max_iterations` and
/// `opt.max_evals`; `opt.f_target` is derived from `cfg.target_accuracy`.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    opt: &OptimizerConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let d = train_set.n_features();
    crate::error::check_len("validation features", d, val_set.n_features())?;
    let ctx = KernelContext::from_points(train_set.points(), cfg.data_map)?;
    let p = cfg.kernel_kind.param_count(d);

    let start = Instant::now();
    let opt = OptimizerConfig {
        max_evals: cfg.max_iterations.min(opt.max_evals),
        f_target: Some(1.0 - cfg.target_accuracy),
        ..*opt
    };
    opt.validate()?;

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(TrainedModel, f64, usize)> = None;
    let mut objective = |theta: &[f64]| -> f64 {
        let iteration = records.len();
        match evaluate(theta, iteration, train_set, val_set, &ctx, cfg) {
            Ok(ev) => {
                if best.as_ref().is_none_or(|(_, acc, _)| ev.accuracy > *acc) {
                    best = Some((ev.model, ev.accuracy, iteration));
                }
                records.push(ev.record);
                1.0 - ev.accuracy
            }
            Err(e) => {
                records.push(IterationRecord {
                    iteration,
                    theta: theta.to_vec(),
                    accuracy: 0.0,
                    qubo_energy: None,
                    support_size: None,
                    alpha_is_optimal: None,
                    error: Some(e.to_string()),
                });
                1.0
            }
        }
    };

    let status = if p == 0 {
        let loss = objective(&[]);
        if opt.f_target.is_some_and(|t| loss <= t) {
            CobylaStatus::TargetReached
        } else {
            CobylaStatus::Converged
        }
    } else {
        let x0 = initial_theta(p, cfg.seed);
        let bounds = vec![(-THETA_BOUND, THETA_BOUND); p];
        cobyla_minimize(&mut objective, &x0, &bounds, &opt)?.status
    };

    let (best_model, best_accuracy, best_iteration) = best.ok_or_else(|| {
        let last = records
            .last()
            .and_then(|r| r.error.clone())
            .unwrap_or_default();
        Error::Numerical(format!(
            "every training iteration failed; last error: {last}"
        ))
    })?;
    Ok(TrainReport {
        best_theta: records[best_iteration].theta.clone(),
        best_iteration,
        best_accuracy,
        best_model,
        accuracy_per_iteration: records.iter().map(|r| r.accuracy).collect(),
        iterations_used: records.len(),
        iterations: records,
        status,
        wall_time: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
        optimizer: opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{adhoc_generate, split, Label, SplitSpec};

    fn blobs() -> (Dataset, Dataset) {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..30 {
            let (c, l) = if i % 2 == 0 {
                (2.0, Label::Positive)
            } else {
                (-2.0, Label::Negative)
            };
            pts.push(vec![
                c + rng.random_range(-0.5..0.5),
                c + rng.random_range(-0.5..0.5),
            ]);
            labels.push(l);
        }
        let ds = Dataset::new("blobs", pts, labels).unwrap();
        split(
            &ds,
            &SplitSpec {
                n_train: 20,
                n_test: 10,
                seed: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn initial_theta_within_bounds_and_seeded() {
        let t = initial_theta(50, 9);
        assert!(t.iter().all(|v| (-THETA_BOUND..=THETA_BOUND).contains(v)));
        assert_eq!(t, initial_theta(50, 9));
        assert_ne!(t, initial_theta(50, 10));
        assert_eq!(initial_theta(2, 0).len(), 2);
    }

    #[test]
    fn linear_kernel_separates_blobs() {
        let (tr, va) = blobs();
        let cfg = TrainConfig {
            kernel_kind: KernelKind::Linear,
            solver_backend: SolverBackend::Greedy,
            ..Default::default()
        };
        let r = train(&tr, &va, &cfg, &default_train_optimizer()).unwrap();
        assert_eq!(r.best_accuracy, 1.0);
        assert!(r.iterations_used <= 10);
    }

    #[test]
    fn zero_target_stops_after_first_iteration() {
        let ds = adhoc_generate(24, 0.3, 2, 3).unwrap();
        let (tr, va) = split(
            &ds,
            &SplitSpec {
                n_train: 16,
                n_test: 8,
                seed: 3,
            },
        )
        .unwrap();
        let cfg = TrainConfig {
            target_accuracy: 0.0,
            schedule: AnnealSchedule {
                num_reads: 4,
                sweeps: 50,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = train(&tr, &va, &cfg, &default_train_optimizer()).unwrap();
        assert_eq!(r.iterations_used, 1);
        assert_eq!(r.status, CobylaStatus::TargetReached);
        assert_eq!(r.best_iteration, 0);
    }

    #[test]
    fn report_invariants_and_exact_backend() {
        let ds = adhoc_generate(20, 0.3, 2, 11).unwrap();
        let (tr, va) = split(
            &ds,
            &SplitSpec {
                n_train: 12,
                n_test: 8,
                seed: 2,
            },
        )
        .unwrap();
        let cfg = TrainConfig {
            solver_backend: SolverBackend::Exact,
            qubo_builder: QuboBuilder::Dual,
            max_iterations: 6,
            ..Default::default()
        };
        let r = train(&tr, &va, &cfg, &default_train_optimizer()).unwrap();
        assert!(r.iterations_used <= 6);
        let max = r
            .accuracy_per_iteration
            .iter()
            .cloned()
            .fold(f64::MIN, f64::max);
        assert_eq!(r.best_accuracy, max);
        let first = r
            .accuracy_per_iteration
            .iter()
            .position(|a| *a == max)
            .unwrap();
        assert_eq!(r.best_iteration, first);
        assert!(r
            .iterations
            .iter()
            .all(|it| it.alpha_is_optimal == Some(true)));
        assert_eq!(r.best_theta, r.best_model.kernel.theta());
    }

    #[test]
    fn deterministic_apart_from_wall_time() {
        let ds = adhoc_generate(20, 0.3, 2, 4).unwrap();
        let (tr, va) = split(
            &ds,
            &SplitSpec {
                n_train: 14,
                n_test: 6,
                seed: 4,
            },
        )
        .unwrap();
        let cfg = TrainConfig {
            max_iterations: 4,
            schedule: AnnealSchedule {
                num_reads: 6,
                sweeps: 100,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut a = train(&tr, &va, &cfg, &default_train_optimizer()).unwrap();
        let mut b = train(&tr, &va, &cfg, &default_train_optimizer()).unwrap();
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let (tr, va) = blobs();
        let opt = default_train_optimizer();
        let bad = TrainConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(train(&tr, &va, &bad, &opt).is_err());
        let bad = TrainConfig {
            target_accuracy: 1.5,
            ..Default::default()
        };
        assert!(train(&tr, &va, &bad, &opt).is_err());
        let empty = Dataset::new("e", vec![], vec![]);
        if let Ok(empty) = empty {
            assert!(train(&tr, &empty, &TrainConfig::default(), &opt).is_err());
        }
    }
}
