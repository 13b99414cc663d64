//! Shared helpers for integration tests: random inputs and reference
//! operators built directly from basis vectors.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type M = DMatrix<Complex64>;

pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Hermitian matrix with spectral norm `norm`.
pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, norm: f64) -> M {
    let a = M::from_fn(dim, dim, |_, _| random_complex(rng));
    let h = (&a + a.adjoint()) * cx(0.5, 0.0);
    let eig = h.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        h
    } else {
        h * cx(norm / scale, 0.0)
    }
}

/// Random density matrix of random rank, unit trace.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> M {
    let rank = rng.random_range(1..=dim);
    let a = M::from_fn(dim, rank, |_, _| random_complex(rng));
    let rho = &a * a.adjoint();
    let tr = rho.trace().re;
    let rho = rho * cx(1.0 / tr, 0.0);
    (&rho + rho.adjoint()) * cx(0.5, 0.0)
}

pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(dim, |_, _| random_complex(rng));
    let n = v.norm();
    v / cx(n, 0.0)
}

/// |S><S| on the two electrons, tensored with the identity on `nuclear_dim`.
pub fn singlet_projector(nuclear_dim: usize) -> M {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let s = DVector::from_vec(vec![cx(0.0, 0.0), cx(r, 0.0), cx(-r, 0.0), cx(0.0, 0.0)]);
    let qs = &s * s.adjoint();
    qs.kronecker(&M::identity(nuclear_dim, nuclear_dim))
}

pub fn triplet_projector(nuclear_dim: usize) -> M {
    let d = 4 * nuclear_dim;
    M::identity(d, d) - singlet_projector(nuclear_dim)
}

pub fn max_abs(m: &M) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn trace_re(m: &M) -> f64 {
    m.trace().re
}

pub fn min_eig(m: &M) -> f64 {
    let h = (m + m.adjoint()) * cx(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}
