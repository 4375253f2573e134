//! Datasets: the gap-separated ad-hoc generator, CSV input/output, rescaling and splits.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::CMatrix;
use crate::qkernel::{expectation_zz, feature_state, FeatureMapSpec};

/// Default separation gap of the ad-hoc generator.
pub const DEFAULT_GAP: f64 = 0.6;

/// Attempts allowed per requested sample before giving up.
pub const ATTEMPTS_PER_SAMPLE: usize = 10_000;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// Sign with the tie `0 → +1`.
    pub fn from_sign(v: f64) -> Self {
        if v < 0.0 {
            Label::Negative
        } else {
            Label::Positive
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(Error::InvalidParameter(format!(
                "label {other} is not -1 or 1"
            ))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", i8::from(*self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    points: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        check_len("labels", points.len(), labels.len())?;
        if let Some(d) = points.first().map(Vec::len) {
            if d == 0 {
                return Err(Error::InvalidParameter(
                    "data points need at least one feature".into(),
                ));
            }
            if let Some(bad) = points.iter().find(|p| p.len() != d) {
                return Err(Error::DimensionMismatch {
                    context: "dataset row",
                    expected: d,
                    got: bad.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            points,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Self {
        Self {
            name: name.into(),
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Writes the `f1,…,fd,label` format.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let d = self.n_features();
        let header: Vec<String> = (1..=d).map(|i| format!("f{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",label\n");
        for (p, l) in self.points.iter().zip(&self.labels) {
            for v in p {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{l}\n"));
        }
        out
    }

    /// Reads the `f1,…,fd,label` format written by [`Dataset::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = open_csv(path)?;
        let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        let label_idx =
            headers
                .iter()
                .position(|h| h == "label")
                .ok_or_else(|| Error::MissingColumn {
                    path: path.into(),
                    column: "label".into(),
                })?;
        let feature_idx: Vec<usize> = (0..headers.len()).filter(|&i| i != label_idx).collect();
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let row = row + 2;
            let p = feature_idx
                .iter()
                .map(|&i| parse_cell(path, row, &rec[i]))
                .collect::<Result<Vec<_>>>()?;
            let label = match rec[label_idx].trim() {
                "1" | "+1" => Label::Positive,
                "-1" => Label::Negative,
                other => {
                    return Err(Error::BadRow {
                        path: path.into(),
                        row,
                        message: format!("label `{other}` is not -1 or 1"),
                    })
                }
            };
            points.push(p);
            labels.push(label);
        }
        let name = path.file_stem().map_or_else(
            || "dataset".to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        Dataset::new(name, points, labels)
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.into(),
        source,
    }
}

fn parse_cell(path: &Path, row: usize, cell: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::BadRow {
            path: path.into(),
            row,
            message: format!("cannot parse `{cell}` as a number"),
        }),
    }
}

/// Loads two named feature columns and a label column from an arbitrary CSV
/// with a header row. Rows whose label equals `positive_label` become `+1`,
/// the single other label value becomes `−1`.
pub fn load_csv(
    path: &Path,
    feature_columns: &[&str],
    label_column: &str,
    positive_label: &str,
) -> Result<Dataset> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.into(),
                column: name.to_string(),
            })
    };
    let label_idx = find(label_column)?;
    let feature_idx = feature_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut negative_raw: Option<String> = None;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = row + 2;
        let p = feature_idx
            .iter()
            .map(|&i| parse_cell(path, row, rec.get(i).unwrap_or("")))
            .collect::<Result<Vec<_>>>()?;
        let raw = rec.get(label_idx).unwrap_or("");
        let label = if raw == positive_label {
            Label::Positive
        } else {
            match &negative_raw {
                None => {
                    negative_raw = Some(raw.to_string());
                    Label::Negative
                }
                Some(neg) if neg == raw => Label::Negative,
                Some(neg) => {
                    return Err(Error::BadRow {
                        path: path.into(),
                        row,
                        message: format!("label `{raw}` is neither `{positive_label}` nor `{neg}`"),
                    })
                }
            }
        };
        points.push(p);
        labels.push(label);
    }
    let name = path.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    Dataset::new(name, points, labels)
}

/// Per-column min-max constants used by [`rescale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaling {
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        check_len("scaling columns", self.min.len(), ds.n_features())?;
        let points = ds.points.iter().map(|p| self.apply_point(p)).collect();
        Dataset::new(ds.name.clone(), points, ds.labels.clone())
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo) * TWO_PI)
            .collect()
    }
}

/// Maps every feature column independently onto `[0, 2π]`.
pub fn rescale(ds: &Dataset) -> Result<(Dataset, Scaling)> {
    if ds.len() < 2 {
        return Err(Error::InsufficientRows {
            needed: 2,
            available: ds.len(),
        });
    }
    let d = ds.n_features();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for p in &ds.points {
        for (c, v) in p.iter().enumerate() {
            min[c] = min[c].min(*v);
            max[c] = max[c].max(*v);
        }
    }
    if let Some(c) = (0..d).find(|&c| max[c] <= min[c]) {
        return Err(Error::ConstantColumn(c));
    }
    let scaling = Scaling { min, max };
    Ok((scaling.apply(ds)?, scaling))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// Test set five times smaller than the training set.
    pub fn new(n_train: usize, seed: u64) -> Self {
        Self {
            n_train,
            n_test: n_train / 5,
            seed,
        }
    }
}

/// Disjoint uniformly random train and test subsets.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test, _) = split_with_rest(ds, spec)?;
    Ok((train, test))
}

/// Like [`split`], also returning the rows that landed in neither subset.
pub fn split_with_rest(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let needed = spec.n_train + spec.n_test;
    if needed > ds.len() {
        return Err(Error::InsufficientRows {
            needed,
            available: ds.len(),
        });
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (train_idx, rest) = idx.split_at(spec.n_train);
    let (test_idx, rest) = rest.split_at(spec.n_test);
    Ok((
        ds.subset(format!("{}-train", ds.name), train_idx),
        ds.subset(format!("{}-test", ds.name), test_idx),
        ds.subset(format!("{}-rest", ds.name), rest),
    ))
}

/// Haar-distributed unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarUnitary(CMatrix);

impl HaarUnitary {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Samples a Haar-random `dim × dim` unitary.
///
/// Columns of a complex Gaussian matrix are orthonormalised by Gram-Schmidt
/// (applied twice for accuracy), which is QR with a positive real `R`
/// diagonal. The result lies in U(dim); its global phase is unobservable in
/// `V† O V`.
pub fn haar_unitary(dim: usize, seed: u64) -> Result<HaarUnitary> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "unitary dimension {dim} < 2"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_from_rng(dim, &mut rng)
}

fn haar_from_rng(dim: usize, rng: &mut ChaCha8Rng) -> Result<HaarUnitary> {
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect()
        })
        .collect();
    for k in 0..dim {
        for _ in 0..2 {
            for j in 0..k {
                let proj: Complex64 = cols[j]
                    .iter()
                    .zip(&cols[k])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let basis = cols[j].clone();
                for (v, b) in cols[k].iter_mut().zip(&basis) {
                    *v -= proj * b;
                }
            }
        }
        let norm = cols[k].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Numerical(
                "degenerate Gaussian sample in Haar draw".into(),
            ));
        }
        for v in &mut cols[k] {
            *v /= norm;
        }
    }
    let mut m = CMatrix::zeros(dim);
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m.set(r, c, *v);
        }
    }
    Ok(HaarUnitary(m))
}

/// Gap-separated labelling rule: `f(x) = sign⟨Φ(x)|V† Z⊗…⊗Z V|Φ(x)⟩`, defined only
/// where the expectation exceeds the gap in magnitude.
#[derive(Debug, Clone)]
pub struct AdhocGenerator {
    n: usize,
    delta: f64,
    unitary: HaarUnitary,
    feature_map: FeatureMapSpec,
}

impl AdhocGenerator {
    /// `seed` fixes the random unitary `V`.
    pub fn new(n: usize, delta: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "gap {delta} must lie in [0, 1)"
            )));
        }
        if n == 0 || n > 12 {
            return Err(Error::InvalidParameter(format!(
                "dimension {n} must be in 1..=12"
            )));
        }
        Ok(Self {
            n,
            delta,
            unitary: haar_unitary(1 << n, seed)?,
            feature_map: FeatureMapSpec::unparametrised(n)?,
        })
    }

    pub fn unitary(&self) -> &HaarUnitary {
        &self.unitary
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn feature_map(&self) -> &FeatureMapSpec {
        &self.feature_map
    }

    pub fn expectation(&self, x: &[f64]) -> Result<f64> {
        expectation_zz(&feature_state(x, &self.feature_map)?, self.unitary.matrix())
    }

    /// Draws `m` points uniformly from `(0, 2π]ⁿ`, keeping only those outside the
    /// gap, with `⌈m/2⌉` positive and `⌊m/2⌋` negative samples.
    pub fn sample(&self, m: usize, seed: u64) -> Result<Dataset> {
        if m == 0 {
            return Err(Error::Empty("sample count"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut need_pos = m.div_ceil(2);
        let mut need_neg = m / 2;
        let cap = ATTEMPTS_PER_SAMPLE.saturating_mul(m);
        let mut points = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        let mut attempts = 0;
        while need_pos + need_neg > 0 {
            if attempts == cap {
                return Err(Error::GapInfeasible {
                    delta: self.delta,
                    attempts,
                });
            }
            attempts += 1;
            // 1 − u with u ∈ [0, 1) lands in (0, 1].
            let x: Vec<f64> = (0..self.n)
                .map(|_| TWO_PI * (1.0 - rng.random::<f64>()))
                .collect();
            let e = self.expectation(&x)?;
            let slot = if e > self.delta {
                Some((Label::Positive, &mut need_pos))
            } else if e < -self.delta {
                Some((Label::Negative, &mut need_neg))
            } else {
                None
            };
            if let Some((label, need)) = slot {
                if *need > 0 {
                    *need -= 1;
                    points.push(x);
                    labels.push(label);
                }
            }
        }
        Dataset::new(
            format!("adhoc-n{}-gap{}", self.n, self.delta),
            points,
            labels,
        )
    }
}

/// Ad-hoc dataset whose unitary and sample stream both derive from `seed`.
pub fn adhoc_generate(m: usize, delta: f64, n: usize, seed: u64) -> Result<Dataset> {
    AdhocGenerator::new(n, delta, seed)?.sample(m, seed)
}

/// Indices of a split, for checking disjointness without comparing floats.
pub fn split_indices(len: usize, spec: &SplitSpec) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let train = idx[..spec.n_train.min(len)].to_vec();
    let test = idx[spec.n_train.min(len)..(spec.n_train + spec.n_test).min(len)].to_vec();
    (train, test)
}

/// True when the two index lists share no element.
pub fn disjoint(a: &[usize], b: &[usize]) -> bool {
    let set: BTreeSet<_> = a.iter().collect();
    b.iter().all(|i| !set.contains(i))
}
