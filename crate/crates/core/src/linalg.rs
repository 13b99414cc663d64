//! Dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex square matrix over the full spin Hilbert space.
pub type Operator = DMatrix<Complex64>;

/// Pure-state amplitude vector.
pub type StateVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn zeros(dim: usize) -> Operator {
    Operator::zeros(dim, dim)
}

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

pub fn trace(a: &Operator) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Real part of the trace, for operators known to be Hermitian.
pub fn trace_re(a: &Operator) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// `Tr{a b}` without forming the product.
pub fn trace_product(a: &Operator, b: &Operator) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
    a * b + b * a
}

/// Largest entrywise modulus.
pub fn max_abs(a: &Operator) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Entrywise `max |a - a†|`.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `(a + a†) / 2`.
pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()) * c(0.5)
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// `|v><v|`.
pub fn outer(v: &StateVector) -> Operator {
    v * v.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors, ordered like `values`.
    pub vectors: Operator,
}

impl HermitianEigen {
    pub fn new(a: &Operator) -> Self {
        let eig = hermitian_part(a).symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let n = a.nrows();
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Operator::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn spread(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// `exp(-i H t)` for the decomposed `H`.
    pub fn propagator(&self, t: f64) -> Operator {
        let n = self.values.len();
        let phases = DVector::from_iterator(
            n,
            self.values.iter().map(|&l| Complex64::from_polar(1.0, -l * t)),
        );
        let scaled = Operator::from_fn(n, n, |i, j| self.vectors[(i, j)] * phases[j]);
        scaled * self.vectors.adjoint()
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &Operator) -> f64 {
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
pub fn spectral_norm_hermitian(a: &Operator) -> f64 {
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0, |m: f64, &v| m.max(v.abs()))
}
