//! Dense-matrix reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use triqsvm::linalg::CMatrix;

pub type C = Complex<f64>;

pub fn kron(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    a.kronecker(b)
}

pub fn hadamard_layer(n: usize) -> DMatrix<C> {
    let s = 1.0 / 2f64.sqrt();
    let h = DMatrix::from_row_slice(
        2,
        2,
        &[
            C::new(s, 0.0),
            C::new(s, 0.0),
            C::new(s, 0.0),
            C::new(-s, 0.0),
        ],
    );
    let mut m = h.clone();
    for _ in 1..n {
        m = kron(&m, &h);
    }
    m
}

/// `zᵢ` of basis index `b`, with qubit 0 as the most significant bit.
pub fn z(b: usize, i: usize, n: usize) -> f64 {
    1.0 - 2.0 * ((b >> (n - 1 - i)) & 1) as f64
}

/// Diagonal phase operator for one-body angles `phi` and two-body angles `(π − xᵢ)(π − xⱼ)`.
pub fn phase_operator(x: &[f64], phi: &[f64]) -> DMatrix<C> {
    let n = x.len();
    let dim = 1 << n;
    let mut m = DMatrix::from_element(dim, dim, C::new(0.0, 0.0));
    for b in 0..dim {
        let mut angle = 0.0;
        for i in 0..n {
            angle += phi[i] * z(b, i, n);
            for j in (i + 1)..n {
                angle += (PI - x[i]) * (PI - x[j]) * z(b, i, n) * z(b, j, n);
            }
        }
        m[(b, b)] = C::from_polar(1.0, angle);
    }
    m
}

#[derive(Clone, Copy)]
pub enum Map {
    Offset,
    Scaled,
}

pub fn one_body(x: &[f64], theta: &[f64], map: Map) -> Vec<f64> {
    x.iter()
        .zip(theta)
        .map(|(x, t)| match map {
            Map::Offset => x + t,
            Map::Scaled => t * x,
        })
        .collect()
}

/// `U H U H |0…0⟩` built from explicit matrices.
pub fn state(x: &[f64], theta: &[f64], map: Map) -> DVector<C> {
    let n = x.len();
    let h = hadamard_layer(n);
    let u = phase_operator(x, &one_body(x, theta, map));
    let mut zero = DVector::from_element(1 << n, C::new(0.0, 0.0));
    zero[0] = C::new(1.0, 0.0);
    &u * &h * &u * &h * zero
}

pub fn kernel(x: &[f64], y: &[f64], theta: &[f64], map: Map) -> f64 {
    let a = state(x, theta, map);
    let b = state(y, theta, map);
    a.dotc(&b).norm_sqr()
}

pub fn to_dense(m: &CMatrix) -> DMatrix<C> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |r, c| m.get(r, c))
}

/// `⟨ψ|V† Z⊗…⊗Z V|ψ⟩` as an explicit matrix sandwich.
pub fn zz_expectation(psi: &DVector<C>, v: &DMatrix<C>) -> C {
    let dim = psi.len();
    let n = dim.trailing_zeros() as usize;
    let parity = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            C::new((0..n).map(|i| z(r, i, n)).product(), 0.0)
        } else {
            C::new(0.0, 0.0)
        }
    });
    let op = v.adjoint() * parity * v;
    psi.dotc(&(op * psi))
}

pub fn min_eigenvalue(entries: &[f64], size: usize) -> f64 {
    let m = DMatrix::from_row_slice(size, size, entries);
    m.symmetric_eigen().eigenvalues.min()
}
