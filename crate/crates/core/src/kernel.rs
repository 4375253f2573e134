//! Kernel functions usable by the classifier: the quantum fidelity kernel and
//! two classical baselines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::qkernel::{self, DataMap, FeatureMapSpec, GramMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    QuantumZz,
    Rbf,
    Linear,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::QuantumZz => "quantum-zz",
            KernelKind::Rbf => "rbf",
            KernelKind::Linear => "linear",
        }
    }

    /// Number of trainable parameters for data of dimension `n_features`.
    pub fn param_count(self, n_features: usize) -> usize {
        match self {
            KernelKind::QuantumZz => n_features,
            KernelKind::Rbf => 1,
            KernelKind::Linear => 0,
        }
    }

    /// Instantiates the kernel at parameters `theta`.
    ///
    /// For `rbf` the single parameter is a base-2 log scale on `base_gamma`.
    pub fn build(self, theta: &[f64], ctx: &KernelContext) -> Result<Kernel> {
        check_len(
            "kernel parameters",
            self.param_count(ctx.n_features),
            theta.len(),
        )?;
        Ok(match self {
            KernelKind::QuantumZz => Kernel::QuantumZz(FeatureMapSpec::new(
                ctx.n_features,
                theta.to_vec(),
                ctx.data_map,
            )?),
            KernelKind::Rbf => Kernel::Rbf {
                gamma: ctx.base_gamma * theta[0].exp2(),
                theta: theta[0],
            },
            KernelKind::Linear => Kernel::Linear,
        })
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum-zz" => Ok(KernelKind::QuantumZz),
            "rbf" => Ok(KernelKind::Rbf),
            "linear" => Ok(KernelKind::Linear),
            other => Err(Error::InvalidParameter(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Data-dependent settings needed to turn parameters into a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelContext {
    pub n_features: usize,
    pub data_map: DataMap,
    pub base_gamma: f64,
}

impl KernelContext {
    /// `base_gamma = 1 / (2 d · var)` with the variance pooled over all feature values.
    pub fn from_points(points: &[Vec<f64>], data_map: DataMap) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("point list"))?;
        let d = first.len();
        let values: Vec<f64> = points.iter().flatten().copied().collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        let base_gamma = if var > 0.0 {
            1.0 / (2.0 * d as f64 * var)
        } else {
            1.0
        };
        Ok(Self {
            n_features: d,
            data_map,
            base_gamma,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    QuantumZz(FeatureMapSpec),
    Rbf { gamma: f64, theta: f64 },
    Linear,
}

impl Kernel {
    pub fn kind(&self) -> KernelKind {
        match self {
            Kernel::QuantumZz(_) => KernelKind::QuantumZz,
            Kernel::Rbf { .. } => KernelKind::Rbf,
            Kernel::Linear => KernelKind::Linear,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        match self {
            Kernel::QuantumZz(spec) => spec.theta().to_vec(),
            Kernel::Rbf { theta, .. } => vec![*theta],
            Kernel::Linear => Vec::new(),
        }
    }

    pub fn entry(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        check_len("kernel arguments", x.len(), z.len())?;
        match self {
            Kernel::QuantumZz(spec) => qkernel::kernel_entry(x, z, spec),
            Kernel::Rbf { gamma, .. } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
                Ok((-gamma * d2).exp())
            }
            Kernel::Linear => Ok(x.iter().zip(z).map(|(a, b)| a * b).sum()),
        }
    }

    pub fn gram(&self, points: &[Vec<f64>]) -> Result<GramMatrix> {
        match self {
            Kernel::QuantumZz(spec) => qkernel::gram(points, spec),
            _ => GramMatrix::from_upper(points.len(), |i, j| self.entry(&points[i], &points[j])),
        }
    }

    /// `out[q][t] = K(queries[q], train[t])`.
    pub fn cross(&self, queries: &[Vec<f64>], train: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self {
            Kernel::QuantumZz(spec) => {
                let train_states = qkernel::feature_states(train, spec)?;
                queries
                    .par_iter()
                    .map(|q| {
                        let s = qkernel::feature_state(q, spec)?;
                        train_states.iter().map(|t| s.fidelity(t)).collect()
                    })
                    .collect()
            }
            _ => queries
                .par_iter()
                .map(|q| train.iter().map(|t| self.entry(q, t)).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_and_linear_values() {
        let ctx = KernelContext {
            n_features: 2,
            data_map: DataMap::ZzOffset,
            base_gamma: 0.5,
        };
        let rbf = KernelKind::Rbf.build(&[1.0], &ctx).unwrap();
        assert_eq!(
            rbf,
            Kernel::Rbf {
                gamma: 1.0,
                theta: 1.0
            }
        );
        assert!((rbf.entry(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        let lin = KernelKind::Linear.build(&[], &ctx).unwrap();
        assert_eq!(lin.entry(&[1.0, 2.0], &[3.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn base_gamma_from_pooled_variance() {
        let ctx = KernelContext::from_points(&[vec![0.0, 2.0], vec![2.0, 0.0]], DataMap::ZzOffset)
            .unwrap();
        // mean 1, var 1, d = 2
        assert!((ctx.base_gamma - 0.25).abs() < 1e-15);
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let ctx = KernelContext {
            n_features: 2,
            data_map: DataMap::ZzOffset,
            base_gamma: 1.0,
        };
        assert!(KernelKind::QuantumZz.build(&[0.0], &ctx).is_err());
        assert!(KernelKind::Linear.build(&[0.0], &ctx).is_err());
    }

    #[test]
    fn cross_matches_entries() {
        let spec = FeatureMapSpec::new(2, vec![0.4, 1.1], DataMap::ZzOffset).unwrap();
        let k = Kernel::QuantumZz(spec);
        let a = vec![vec![0.1, 0.2], vec![3.0, 1.0]];
        let b = vec![vec![5.0, 2.0], vec![0.1, 0.2], vec![1.0, 6.0]];
        let m = k.cross(&a, &b).unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((v - k.entry(&a[i], &b[j]).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernel_json_shape() {
        let k =
            Kernel::QuantumZz(FeatureMapSpec::new(2, vec![0.5, -0.5], DataMap::ZzOffset).unwrap());
        let v = serde_json::to_value(&k).unwrap();
        assert_eq!(v["kind"], "quantum-zz");
        assert_eq!(v["data_map"], "zz-offset");
        let back: Kernel = serde_json::from_value(v).unwrap();
        assert_eq!(back, k);
    }
}
