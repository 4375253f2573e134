//! Statevector simulation of the second-order Pauli-Z feature map and the
//! fidelity kernel `K(x, z) = |⟨Φ(x)|Φ(z)⟩|²` built on top of it.
//!
//! Basis convention: qubit 0 is the most significant bit of the basis index,
//! so for two qubits index 2 is `|10⟩`.
//!
//! The circuit is `|Φ(x)⟩ = U_φ(x) H⊗ⁿ U_φ(x) H⊗ⁿ |0ⁿ⟩`, where `U_φ` is diagonal and
//! gives basis state `|b⟩` the phase
//! `exp(i[Σᵢ φᵢ zᵢ + Σᵢ<ⱼ φᵢⱼ zᵢ zⱼ])` with `zᵢ = 1 − 2bᵢ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::CMatrix;

/// Number of `(U_φ · H⊗ⁿ)` blocks in the feature map.
pub const REPS: usize = 2;

/// Largest magnitude a training parameter may take.
pub const THETA_BOUND: f64 = 2.0 * PI;

const NORM_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0ⁿ⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("qubit count must be >= 1".into()));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits)?;
        if index >= s.amplitudes.len() {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        s.amplitudes[0] = Complex64::new(0.0, 0.0);
        s.amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Wraps raw amplitudes; the length must be a power of two and the norm 1.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "statevector length {len} is not a power of two >= 2"
            )));
        }
        let s = Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "statevector norm² {norm} is not 1"
            )));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_len("inner product", self.dim(), other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`, clamped to `[0, 1]`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().min(1.0))
    }

    /// Applies `H` to every qubit in place.
    pub fn apply_hadamard_layer(&mut self) {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let dim = self.dim();
        for q in 0..self.n_qubits {
            let stride = 1 << (self.n_qubits - 1 - q);
            for base in (0..dim).step_by(2 * stride) {
                for k in base..base + stride {
                    let a = self.amplitudes[k];
                    let b = self.amplitudes[k + stride];
                    self.amplitudes[k] = (a + b) * scale;
                    self.amplitudes[k + stride] = (a - b) * scale;
                }
            }
        }
    }

    /// Applies the diagonal evolution `U_φ` in place.
    pub fn apply_phase_evolution(&mut self, angles: &PhaseAngles) -> Result<()> {
        let n = self.n_qubits;
        check_len("one-body angles", n, angles.one_body.len())?;
        check_len("two-body angles", pair_count(n), angles.two_body.len())?;
        let mut signs = vec![0.0; n];
        for (b, amp) in self.amplitudes.iter_mut().enumerate() {
            for (q, z) in signs.iter_mut().enumerate() {
                *z = if (b >> (n - 1 - q)) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                };
            }
            let mut phase = 0.0;
            for (phi, z) in angles.one_body.iter().zip(&signs) {
                phase += phi * z;
            }
            for ((i, j), phi) in pairs(n).zip(&angles.two_body) {
                phase += phi * signs[i] * signs[j];
            }
            *amp *= Complex64::from_polar(1.0, phase);
        }
        Ok(())
    }
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Qubit pairs `(i, j)` with `i < j` in lexicographic order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// One-body `φᵢ` and two-body `φᵢⱼ` angles of a diagonal evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAngles {
    pub one_body: Vec<f64>,
    /// Ordered as [`pairs`].
    pub two_body: Vec<f64>,
}

/// How a data point and the training parameters become phase angles.
///
/// Both variants share the two-body term `φᵢⱼ(x) = (π − xᵢ)(π − xⱼ)` and reduce
/// to the unparametrised map `φᵢ(x) = xᵢ` at [`DataMap::identity_theta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DataMap {
    /// `φᵢ(x) = xᵢ + θᵢ`.
    #[default]
    ZzOffset,
    /// `φᵢ(x) = θᵢ · xᵢ`.
    ZzScaled,
}

impl DataMap {
    pub fn name(self) -> &'static str {
        match self {
            DataMap::ZzOffset => "zz-offset",
            DataMap::ZzScaled => "zz-scaled",
        }
    }

    pub fn identity_theta(self, n: usize) -> Vec<f64> {
        match self {
            DataMap::ZzOffset => vec![0.0; n],
            DataMap::ZzScaled => vec![1.0; n],
        }
    }

    pub fn angles(self, x: &[f64], theta: &[f64]) -> PhaseAngles {
        let one_body = x
            .iter()
            .zip(theta)
            .map(|(xi, ti)| match self {
                DataMap::ZzOffset => xi + ti,
                DataMap::ZzScaled => ti * xi,
            })
            .collect();
        let two_body = pairs(x.len())
            .map(|(i, j)| (PI - x[i]) * (PI - x[j]))
            .collect();
        PhaseAngles { one_body, two_body }
    }
}

impl std::str::FromStr for DataMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zz-offset" => Ok(DataMap::ZzOffset),
            "zz-scaled" => Ok(DataMap::ZzScaled),
            other => Err(Error::InvalidParameter(format!(
                "unknown data map `{other}`"
            ))),
        }
    }
}

/// Feature map configuration: qubit count, training parameters, and data map.
/// The data dimension equals the qubit count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureMap")]
pub struct FeatureMapSpec {
    n_qubits: usize,
    theta: Vec<f64>,
    data_map: DataMap,
}

#[derive(Deserialize)]
struct RawFeatureMap {
    n_qubits: usize,
    theta: Vec<f64>,
    data_map: DataMap,
}

impl TryFrom<RawFeatureMap> for FeatureMapSpec {
    type Error = Error;

    fn try_from(raw: RawFeatureMap) -> Result<Self> {
        Self::new(raw.n_qubits, raw.theta, raw.data_map)
    }
}

impl FeatureMapSpec {
    pub fn new(n_qubits: usize, theta: Vec<f64>, data_map: DataMap) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("qubit count must be >= 1".into()));
        }
        check_len("training parameters", n_qubits, theta.len())?;
        if let Some(t) = theta.iter().find(|t| t.is_nan() || t.abs() > THETA_BOUND) {
            return Err(Error::InvalidParameter(format!(
                "training parameter {t} outside [-2π, 2π]"
            )));
        }
        Ok(Self {
            n_qubits,
            theta,
            data_map,
        })
    }

    /// The map used to label generated data: `φᵢ(x) = xᵢ`.
    pub fn unparametrised(n_qubits: usize) -> Result<Self> {
        let map = DataMap::default();
        Self::new(n_qubits, map.identity_theta(n_qubits), map)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn data_map(&self) -> DataMap {
        self.data_map
    }

    pub fn reps(&self) -> usize {
        REPS
    }
}

/// `|Φ(x)⟩` for one data point.
pub fn feature_state(x: &[f64], spec: &FeatureMapSpec) -> Result<StateVector> {
    check_len("data point", spec.n_qubits, x.len())?;
    let angles = spec.data_map.angles(x, &spec.theta);
    let mut state = StateVector::zero(spec.n_qubits)?;
    for _ in 0..REPS {
        state.apply_hadamard_layer();
        state.apply_phase_evolution(&angles)?;
    }
    Ok(state)
}

pub fn kernel_entry(x: &[f64], z: &[f64], spec: &FeatureMapSpec) -> Result<f64> {
    feature_state(x, spec)?.fidelity(&feature_state(z, spec)?)
}

/// Symmetric real kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    /// Builds the matrix from the upper triangle (including the diagonal) and mirrors it.
    pub fn from_upper<F>(size: usize, entry: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        if size == 0 {
            return Err(Error::Empty("point list"));
        }
        let rows: Vec<Vec<f64>> = (0..size)
            .into_par_iter()
            .map(|i| (i..size).map(|j| entry(i, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut entries = vec![0.0; size * size];
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                entries[i * size + j] = v;
                entries[j * size + i] = v;
            }
        }
        Ok(Self { size, entries })
    }

    /// Wraps a full row-major matrix; it must be square and exactly symmetric.
    pub fn from_rows(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::Empty("gram matrix"));
        }
        check_len("gram entries", size * size, entries.len())?;
        for i in 0..size {
            for j in i + 1..size {
                if entries[i * size + j] != entries[j * size + i] {
                    return Err(Error::InvalidParameter(format!(
                        "gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

/// Quantum Gram matrix; each feature state is prepared once.
pub fn gram(points: &[Vec<f64>], spec: &FeatureMapSpec) -> Result<GramMatrix> {
    if points.is_empty() {
        return Err(Error::Empty("point list"));
    }
    let states = feature_states(points, spec)?;
    GramMatrix::from_upper(points.len(), |i, j| states[i].fidelity(&states[j]))
}

pub(crate) fn feature_states(
    points: &[Vec<f64>],
    spec: &FeatureMapSpec,
) -> Result<Vec<StateVector>> {
    points.par_iter().map(|p| feature_state(p, spec)).collect()
}

/// `⟨ψ|V† (Z⊗…⊗Z) V|ψ⟩`.
pub fn expectation_zz(state: &StateVector, v: &CMatrix) -> Result<f64> {
    check_len("unitary dimension", state.dim(), v.dim())?;
    v.ensure_unitary(UNITARY_TOL)?;
    let rotated = v.mul_vec(state.amplitudes())?;
    Ok(rotated
        .iter()
        .enumerate()
        .map(|(b, a)| {
            if b.count_ones() % 2 == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum())
}
