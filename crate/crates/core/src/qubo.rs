//! QUBO construction for the binary-weight SVM dual, the offset β, and the
//! kernelised decision function.
//!
//! Energies use the full-matrix convention `E(α) = Σᵢⱼ q[i][j] αᵢ αⱼ`.

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Label};
use crate::error::{check_len, Error, Result};
use crate::kernel::Kernel;
use crate::qkernel::GramMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    size: usize,
    q: Vec<f64>,
}

impl QuboMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            q: vec![0.0; size * size],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let mut q = Vec::with_capacity(size * size);
        for row in rows {
            check_len("qubo row", size, row.len())?;
            q.extend_from_slice(row);
        }
        Self::from_flat(size, q)
    }

    pub fn from_flat(size: usize, q: Vec<f64>) -> Result<Self> {
        check_len("qubo entries", size * size, q.len())?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "qubo entries must be finite".into(),
            ));
        }
        Ok(Self { size, q })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.q[i * self.size + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.size..(i + 1) * self.size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }
}

/// Which QUBO formulation to train with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuboBuilder {
    /// Literal transcription of the "Solve QUBO" pseudocode.
    #[default]
    Paper,
    /// Standard binary-α dual `−Σα + ½(αy)ᵀK(αy)` with an optional diagonal penalty.
    Dual,
}

impl QuboBuilder {
    pub fn name(self) -> &'static str {
        match self {
            QuboBuilder::Paper => "paper",
            QuboBuilder::Dual => "dual",
        }
    }

    pub fn build(self, gram: &GramMatrix, labels: &[Label], penalty: f64) -> Result<QuboMatrix> {
        match self {
            QuboBuilder::Paper => build_qubo_paper(gram, labels),
            QuboBuilder::Dual => build_qubo_dual(gram, labels, penalty),
        }
    }
}

impl std::str::FromStr for QuboBuilder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(QuboBuilder::Paper),
            "dual" => Ok(QuboBuilder::Dual),
            other => Err(Error::InvalidParameter(format!(
                "unknown qubo builder `{other}`"
            ))),
        }
    }
}

/// For `m ≠ n`: `kernel_tot = yₙyₘ + K[m][n]`, then `q[m][n] = −½ · kernel_tot · yₘ · yₙ`.
/// The diagonal stays zero.
pub fn build_qubo_paper(gram: &GramMatrix, labels: &[Label]) -> Result<QuboMatrix> {
    let n_pts = gram.size();
    check_len("labels", n_pts, labels.len())?;
    let mut q = QuboMatrix::zeros(n_pts);
    for n in 0..n_pts {
        for m in 0..n_pts {
            let mut kernel_tot = labels[n].value() * labels[m].value();
            if m != n {
                let k_val = gram.get(m, n);
                kernel_tot += k_val;
                q.set(
                    m,
                    n,
                    -0.5 * kernel_tot * labels[m].value() * labels[n].value(),
                );
            }
        }
    }
    Ok(q)
}

/// `q[m][n] = ½ yₘyₙ K[m][n]` off the diagonal and `q[n][n] = ½ K[n][n] − 1 + penalty`,
/// so that `E(α) = −(Σα − ½(αy)ᵀK(αy)) + penalty·Σα`.
pub fn build_qubo_dual(gram: &GramMatrix, labels: &[Label], penalty: f64) -> Result<QuboMatrix> {
    let n_pts = gram.size();
    check_len("labels", n_pts, labels.len())?;
    if !penalty.is_finite() {
        return Err(Error::InvalidParameter("penalty must be finite".into()));
    }
    let mut q = QuboMatrix::zeros(n_pts);
    for m in 0..n_pts {
        for n in 0..n_pts {
            let v = if m == n {
                0.5 * gram.get(n, n) - 1.0 + penalty
            } else {
                0.5 * labels[m].value() * labels[n].value() * gram.get(m, n)
            };
            q.set(m, n, v);
        }
    }
    Ok(q)
}

/// `β = (1/N) Σₙ (yₙ − Σₘ αₘ yₘ K[m][n])`, with the inner sum over all `m`.
pub fn compute_beta(alpha: &[u8], labels: &[Label], gram: &GramMatrix) -> Result<f64> {
    let n_pts = gram.size();
    check_len("alpha", n_pts, alpha.len())?;
    check_len("labels", n_pts, labels.len())?;
    let mut total = 0.0;
    for n in 0..n_pts {
        let mut inner = 0.0;
        for m in 0..n_pts {
            inner += f64::from(alpha[m]) * labels[m].value() * gram.get(m, n);
        }
        total += labels[n].value() - inner;
    }
    let beta = total / n_pts as f64;
    if beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::Numerical("offset beta is not finite".into()))
    }
}

/// Classifier state: binary weights, offset, support data and kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub alpha: Vec<u8>,
    pub beta: f64,
    pub train_points: Vec<Vec<f64>>,
    pub train_labels: Vec<Label>,
    pub kernel: Kernel,
    pub builder: QuboBuilder,
}

impl TrainedModel {
    pub fn new(
        alpha: Vec<u8>,
        beta: f64,
        train: &Dataset,
        kernel: Kernel,
        builder: QuboBuilder,
    ) -> Result<Self> {
        let model = Self {
            alpha,
            beta,
            train_points: train.points().to_vec(),
            train_labels: train.labels().to_vec(),
            kernel,
            builder,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.train_points.len();
        check_len("alpha", n, self.alpha.len())?;
        check_len("train labels", n, self.train_labels.len())?;
        if self.alpha.iter().any(|&a| a > 1) {
            return Err(Error::InvalidParameter(
                "alpha entries must be 0 or 1".into(),
            ));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter("beta must be finite".into()));
        }
        if let Some(d) = self.train_points.first().map(Vec::len) {
            if self.train_points.iter().any(|p| p.len() != d) {
                return Err(Error::InvalidParameter("ragged training points".into()));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> Option<usize> {
        self.train_points.first().map(Vec::len)
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        match self.n_features() {
            Some(d) => check_len("query point", d, x.len()),
            None => Ok(()),
        }
    }

    /// Decision values for many query points, sharing kernel preparation.
    pub fn decision_values(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
        for q in queries {
            self.check_query(q)?;
        }
        let support: Vec<usize> = (0..self.alpha.len())
            .filter(|&i| self.alpha[i] == 1)
            .collect();
        let support_points: Vec<Vec<f64>> = support
            .iter()
            .map(|&i| self.train_points[i].clone())
            .collect();
        if support_points.is_empty() {
            return Ok(vec![self.beta; queries.len()]);
        }
        let k = self.kernel.cross(queries, &support_points)?;
        Ok(k.iter()
            .map(|row| {
                row.iter()
                    .zip(&support)
                    .map(|(kv, &i)| self.train_labels[i].value() * kv)
                    .sum::<f64>()
                    + self.beta
            })
            .collect())
    }
}

/// `Σₘ αₘ yₘ K(xₘ, x) + β`.
pub fn decision_value(x: &[f64], model: &TrainedModel) -> Result<f64> {
    model.check_query(x)?;
    let mut acc = 0.0;
    for ((a, p), y) in model
        .alpha
        .iter()
        .zip(&model.train_points)
        .zip(&model.train_labels)
    {
        if *a == 1 {
            acc += y.value() * model.kernel.entry(p, x)?;
        }
    }
    Ok(acc + model.beta)
}

/// Sign of the decision value, with `0 → +1`.
pub fn classify(x: &[f64], model: &TrainedModel) -> Result<Label> {
    Ok(Label::from_sign(decision_value(x, model)?))
}

/// Fraction of correctly classified points.
pub fn accuracy(model: &TrainedModel, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Empty("evaluation dataset"));
    }
    let values = model.decision_values(ds.points())?;
    let correct = values
        .iter()
        .zip(ds.labels())
        .filter(|(v, l)| Label::from_sign(**v) == **l)
        .count();
    Ok(correct as f64 / ds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::{DataMap, FeatureMapSpec};
    use Label::{Negative as N, Positive as P};

    fn gram2(k01: f64) -> GramMatrix {
        GramMatrix::from_rows(2, vec![1.0, k01, k01, 1.0]).unwrap()
    }

    #[test]
    fn paper_builder_hand_trace() {
        let q = build_qubo_paper(&gram2(0.5), &[P, N]).unwrap();
        assert_eq!(q.get(0, 1), -0.25);
        assert_eq!(q.get(1, 0), -0.25);
        assert_eq!(q.get(0, 0), 0.0);
        assert_eq!(q.get(1, 1), 0.0);

        let q = build_qubo_paper(&gram2(0.0), &[P, P]).unwrap();
        assert_eq!(q.get(0, 1), -0.5);

        let q = build_qubo_paper(&GramMatrix::from_rows(1, vec![1.0]).unwrap(), &[P]).unwrap();
        assert_eq!(q.as_slice(), &[0.0]);
    }

    #[test]
    fn builders_reject_size_mismatch() {
        assert!(build_qubo_paper(&gram2(0.1), &[P]).is_err());
        assert!(build_qubo_dual(&gram2(0.1), &[P, N, P], 0.0).is_err());
        assert!(compute_beta(&[1], &[P, N], &gram2(0.1)).is_err());
    }

    fn enumerate_min(q: &QuboMatrix) -> (Vec<u8>, f64) {
        let n = q.size();
        let mut best = (vec![0; n], f64::INFINITY);
        for bits in 0..(1u32 << n) {
            let a: Vec<u8> = (0..n).map(|i| ((bits >> (n - 1 - i)) & 1) as u8).collect();
            let mut e = 0.0;
            for i in 0..n {
                for j in 0..n {
                    e += q.get(i, j) * f64::from(a[i]) * f64::from(a[j]);
                }
            }
            if e < best.1 {
                best = (a, e);
            }
        }
        best
    }

    #[test]
    fn dual_builder_small_cases() {
        let q = build_qubo_dual(&GramMatrix::from_rows(1, vec![1.0]).unwrap(), &[P], 0.0).unwrap();
        assert_eq!(q.get(0, 0), -0.5);
        assert_eq!(enumerate_min(&q), (vec![1], -0.5));

        let id = GramMatrix::from_rows(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let q = build_qubo_dual(&id, &[P, N], 0.0).unwrap();
        assert_eq!(enumerate_min(&q), (vec![1, 1], -1.0));
    }

    #[test]
    fn beta_cases() {
        let g = gram2(0.5);
        assert_eq!(compute_beta(&[0, 0], &[P, N], &g).unwrap(), 0.0);
        assert_eq!(compute_beta(&[0, 0], &[P, P], &g).unwrap(), 1.0);
        let one = GramMatrix::from_rows(1, vec![1.0]).unwrap();
        assert_eq!(compute_beta(&[1], &[P], &one).unwrap(), 0.0);
        assert_eq!(compute_beta(&[1, 0], &[P, N], &g).unwrap(), -0.75);
    }

    fn model(alpha: Vec<u8>, beta: f64, pts: Vec<Vec<f64>>, labels: Vec<Label>) -> TrainedModel {
        let ds = Dataset::new("m", pts, labels).unwrap();
        let spec = FeatureMapSpec::new(2, vec![0.3, 0.4], DataMap::ZzOffset).unwrap();
        TrainedModel::new(
            alpha,
            beta,
            &ds,
            Kernel::QuantumZz(spec),
            QuboBuilder::Paper,
        )
        .unwrap()
    }

    #[test]
    fn decision_value_offset_only_and_self_kernel() {
        let m = model(
            vec![0, 0],
            0.3,
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![P, N],
        );
        assert_eq!(decision_value(&[5.0, 0.1], &m).unwrap(), 0.3);
        assert_eq!(m.decision_values(&[vec![5.0, 0.1]]).unwrap(), vec![0.3]);

        let m = model(vec![1], 0.0, vec![vec![1.0, 2.0]], vec![P]);
        assert!((decision_value(&[1.0, 2.0], &m).unwrap() - 1.0).abs() < 1e-12);
        assert!(decision_value(&[1.0], &m).is_err());
    }

    #[test]
    fn classify_tie_breaks_positive() {
        let pts = vec![vec![1.0, 2.0]];
        assert_eq!(
            classify(&[0.0, 0.0], &model(vec![0], 0.3, pts.clone(), vec![P])).unwrap(),
            P
        );
        assert_eq!(
            classify(&[0.0, 0.0], &model(vec![0], -0.01, pts.clone(), vec![P])).unwrap(),
            N
        );
        assert_eq!(
            classify(&[0.0, 0.0], &model(vec![0], 0.0, pts, vec![P])).unwrap(),
            P
        );
    }

    #[test]
    fn accuracy_counts() {
        let m = model(vec![0], 1.0, vec![vec![1.0, 2.0]], vec![P]);
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.5]).collect();
        let all_pos = Dataset::new("a", pts.clone(), vec![P; 10]).unwrap();
        assert_eq!(accuracy(&m, &all_pos).unwrap(), 1.0);
        let all_neg = Dataset::new("b", pts.clone(), vec![N; 10]).unwrap();
        assert_eq!(accuracy(&m, &all_neg).unwrap(), 0.0);
        let mut labels = vec![P; 10];
        labels[3] = N;
        let nine = Dataset::new("c", pts, labels).unwrap();
        assert_eq!(accuracy(&m, &nine).unwrap(), 0.9);
        let empty = Dataset::new("e", vec![], vec![]).unwrap();
        assert!(matches!(accuracy(&m, &empty), Err(Error::Empty(_))));
    }

    #[test]
    fn model_json_fields() {
        let m = model(
            vec![1, 0],
            -0.25,
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![P, N],
        );
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["alpha"], serde_json::json!([1, 0]));
        assert_eq!(v["train_labels"], serde_json::json!([1, -1]));
        assert_eq!(v["kernel"]["kind"], "quantum-zz");
        assert_eq!(v["builder"], "paper");
        let back: TrainedModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
