//! Magnetic Hamiltonian and its singlet/triplet block structure.

use crate::linalg::{self, c, hermiticity_defect, Operator};
use crate::spin::{Electron, Projectors, SpinSystem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperfineCoupling {
    Isotropic(f64),
    /// Full real 3×3 tensor, applied as `Σ_ij s_i A_ij I_j`. Not symmetrized.
    Tensor([[f64; 3]; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperfine {
    /// Index into `SpinSystem::nuclei`, zero-based.
    pub nucleus: usize,
    pub electron: Electron,
    pub coupling: HyperfineCoupling,
}

/// Time-independent magnetic interactions, all in angular-frequency units.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    /// Field vector (already multiplied by the gyromagnetic ratio).
    pub field: [f64; 3],
    /// Per-electron scale applied to `field`.
    pub g_scale: [f64; 2],
    pub hyperfine: Vec<Hyperfine>,
    /// `J` in `J s1·s2`.
    pub exchange: f64,
    /// `ω` in `ω (s1z - s2z)`.
    pub delta_g: f64,
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        Self {
            field: [0.0; 3],
            g_scale: [1.0, 1.0],
            hyperfine: Vec::new(),
            exchange: 0.0,
            delta_g: 0.0,
        }
    }
}

impl HamiltonianSpec {
    pub fn exchange_only(j: f64) -> Self {
        Self { exchange: j, ..Self::default() }
    }

    pub fn delta_g_only(omega: f64) -> Self {
        Self { delta_g: omega, ..Self::default() }
    }

    fn check_finite(&self) -> Result<()> {
        let mut values = self.field.to_vec();
        values.extend(self.g_scale);
        values.push(self.exchange);
        values.push(self.delta_g);
        for hf in &self.hyperfine {
            match hf.coupling {
                HyperfineCoupling::Isotropic(a) => values.push(a),
                HyperfineCoupling::Tensor(t) => values.extend(t.iter().flatten()),
            }
        }
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("hamiltonian spec"))
        }
    }
}

pub fn build_hamiltonian(system: &SpinSystem, spec: &HamiltonianSpec) -> Result<Operator> {
    spec.check_finite()?;
    let dim = system.total_dim();
    let mut h = linalg::zeros(dim);
    let s = [system.electron_spin(Electron::One), system.electron_spin(Electron::Two)];

    for (e, g) in s.iter().zip(spec.g_scale) {
        for (op, b) in e.iter().zip(spec.field) {
            if b != 0.0 && g != 0.0 {
                h += op * c(g * b);
            }
        }
    }

    for hf in &spec.hyperfine {
        let nuc = system.nuclear_spin(hf.nucleus)?;
        let el = &s[hf.electron.subspace()];
        match hf.coupling {
            HyperfineCoupling::Isotropic(a) => {
                for (se, si) in el.iter().zip(nuc.iter()) {
                    h += se * si * c(a);
                }
            }
            HyperfineCoupling::Tensor(t) => {
                for (i, se) in el.iter().enumerate() {
                    for (j, si) in nuc.iter().enumerate() {
                        if t[i][j] != 0.0 {
                            h += se * si * c(t[i][j]);
                        }
                    }
                }
            }
        }
    }

    if spec.exchange != 0.0 {
        h += system.electron_dot() * c(spec.exchange);
    }
    if spec.delta_g != 0.0 {
        h += (&s[0][2] - &s[1][2]) * c(spec.delta_g);
    }

    let defect = hermiticity_defect(&h);
    assert!(defect < 1e-12, "hamiltonian not hermitian: defect {defect:e}");
    Ok(h)
}

/// `H_αβ = Q_α H Q_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianBlocks {
    pub ss: Operator,
    pub st: Operator,
    pub ts: Operator,
    pub tt: Operator,
}

pub fn block_decompose(h: &Operator, projectors: &Projectors) -> Result<HamiltonianBlocks> {
    if h.nrows() != projectors.dim() || h.ncols() != projectors.dim() {
        return Err(Error::DimensionMismatch { expected: projectors.dim(), found: h.nrows() });
    }
    let Projectors { singlet: qs, triplet: qt } = projectors;
    let hs = h * qs;
    let ht = h * qt;
    Ok(HamiltonianBlocks {
        ss: qs * &hs,
        st: qs * &ht,
        ts: qt * &hs,
        tt: qt * &ht,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, max_abs_diff, HermitianEigen};
    use crate::spin::{electron_basis, NuclearSpec, SpinNumber};

    #[test]
    fn exchange_spectrum() {
        let sys = SpinSystem::electrons_only();
        let j = 2.5;
        let h = build_hamiltonian(&sys, &HamiltonianSpec::exchange_only(j)).unwrap();
        let eig = HermitianEigen::new(&h);
        let expected = [-0.75 * j, 0.25 * j, 0.25 * j, 0.25 * j];
        for (v, e) in eig.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!((eig.spread() - j).abs() < 1e-12);
        let s = electron_basis::singlet();
        assert!((&h * &s - &s * c(-0.75 * j)).norm() < 1e-12);
    }

    #[test]
    fn zero_spec_is_zero() {
        let sys = SpinSystem::new(vec![NuclearSpec { spin: SpinNumber::HALF, electron: Electron::One }])
            .unwrap();
        let h = build_hamiltonian(&sys, &HamiltonianSpec::default()).unwrap();
        assert_eq!(max_abs(&h), 0.0);
    }

    #[test]
    fn delta_g_mixes_singlet_and_t0() {
        let sys = SpinSystem::electrons_only();
        let w = 1.7;
        let h = build_hamiltonian(&sys, &HamiltonianSpec::delta_g_only(w)).unwrap();
        let s = electron_basis::singlet();
        let t0 = electron_basis::triplet_zero();
        assert!((&h * &s - &t0 * c(w)).norm() < 1e-14);
        assert!((&h * &t0 - &s * c(w)).norm() < 1e-14);
    }

    #[test]
    fn blocks_of_exchange_and_delta_g() {
        let sys = SpinSystem::electrons_only();
        let p = sys.projectors();
        let hj = build_hamiltonian(&sys, &HamiltonianSpec::exchange_only(3.0)).unwrap();
        let b = block_decompose(&hj, &p).unwrap();
        assert!(max_abs(&b.st) < 1e-14 && max_abs(&b.ts) < 1e-14);

        let hw = build_hamiltonian(&sys, &HamiltonianSpec::delta_g_only(2.0)).unwrap();
        let b = block_decompose(&hw, &p).unwrap();
        assert!(max_abs(&b.ss) < 1e-14 && max_abs(&b.tt) < 1e-14);
        assert!(max_abs(&b.st) > 0.5);
        assert!(max_abs_diff(&b.ts, &b.st.adjoint()) < 1e-14);

        let b = block_decompose(&linalg::zeros(4), &p).unwrap();
        assert_eq!(max_abs(&(b.ss + b.st + b.ts + b.tt)), 0.0);
    }

    #[test]
    fn bad_indices() {
        let sys = SpinSystem::electrons_only();
        let spec = HamiltonianSpec {
            hyperfine: vec![Hyperfine {
                nucleus: 0,
                electron: Electron::One,
                coupling: HyperfineCoupling::Isotropic(1.0),
            }],
            ..HamiltonianSpec::default()
        };
        assert_eq!(
            build_hamiltonian(&sys, &spec),
            Err(Error::NucleusIndex { index: 0, count: 0 })
        );
        assert!(block_decompose(&linalg::zeros(8), &sys.projectors()).is_err());
        let nan = HamiltonianSpec { exchange: f64::NAN, ..HamiltonianSpec::default() };
        assert!(build_hamiltonian(&sys, &nan).is_err());
    }

    #[test]
    fn isotropic_equals_diagonal_tensor() {
        let sys = SpinSystem::new(vec![NuclearSpec { spin: SpinNumber::ONE, electron: Electron::Two }])
            .unwrap();
        let iso = HamiltonianSpec {
            hyperfine: vec![Hyperfine {
                nucleus: 0,
                electron: Electron::Two,
                coupling: HyperfineCoupling::Isotropic(0.7),
            }],
            ..HamiltonianSpec::default()
        };
        let tensor = HamiltonianSpec {
            hyperfine: vec![Hyperfine {
                nucleus: 0,
                electron: Electron::Two,
                coupling: HyperfineCoupling::Tensor([[0.7, 0.0, 0.0], [0.0, 0.7, 0.0], [0.0, 0.0, 0.7]]),
            }],
            ..HamiltonianSpec::default()
        };
        let a = build_hamiltonian(&sys, &iso).unwrap();
        let b = build_hamiltonian(&sys, &tensor).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-14);
    }
}
