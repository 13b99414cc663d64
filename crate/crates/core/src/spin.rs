//! Spin Hilbert space of a radical-ion pair.
//!
//! Subspace ordering is fixed: electron 1, electron 2, then nuclei in
//! declaration order. Within each subspace the basis runs over `m = s, s-1,
//! ..., -s`, so for an electron index 0 is `|↑>` and index 1 is `|↓>`. The
//! singlet is `|S> = (|↑↓> - |↓↑>)/√2`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, hermiticity_defect, min_eigenvalue, Operator, StateVector, I};
use crate::{Error, Result};

/// Spin quantum number, stored as `2s` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinNumber {
    twice: u32,
}

impl SpinNumber {
    pub const HALF: SpinNumber = SpinNumber { twice: 1 };
    pub const ONE: SpinNumber = SpinNumber { twice: 2 };

    pub fn from_twice(twice: u32) -> Self {
        Self { twice }
    }

    pub fn new(spin: f64) -> Result<Self> {
        let twice = 2.0 * spin;
        if !twice.is_finite() || twice < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpin(spin));
        }
        Ok(Self { twice: twice.round() as u32 })
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }
}

impl fmt::Display for SpinNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Angular-momentum matrices `(Sx, Sy, Sz)` for a single spin, basis ordered
/// by descending `m`.
pub fn spin_operators(spin: SpinNumber) -> [Operator; 3] {
    let s = spin.value();
    let n = spin.dim();
    let m = |i: usize| s - i as f64;
    // <m+1| S+ |m> sits at (i-1, i) since m(i-1) = m(i) + 1.
    let raise = Operator::from_fn(n, n, |r, col| {
        if col == r + 1 {
            let mm = m(col);
            c((s * (s + 1.0) - mm * (mm + 1.0)).sqrt())
        } else {
            c(0.0)
        }
    });
    let lower = raise.adjoint();
    let sx = (&raise + &lower) * c(0.5);
    let sy = (&raise - &lower) * (-0.5 * I);
    let sz = Operator::from_fn(n, n, |r, col| if r == col { c(m(r)) } else { c(0.0) });
    [sx, sy, sz]
}

/// Which of the two radical electrons an interaction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Electron {
    One,
    Two,
}

impl Electron {
    pub fn subspace(self) -> usize {
        match self {
            Electron::One => 0,
            Electron::Two => 1,
        }
    }
}

impl TryFrom<usize> for Electron {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        match value {
            1 => Ok(Electron::One),
            2 => Ok(Electron::Two),
            other => Err(Error::ElectronIndex(other)),
        }
    }
}

impl From<Electron> for usize {
    fn from(e: Electron) -> usize {
        e.subspace() + 1
    }
}

impl fmt::Display for Electron {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", usize::from(*self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NuclearSpec {
    pub spin: SpinNumber,
    pub electron: Electron,
}

/// Two electron spins plus an ordered list of nuclei.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinSystem {
    nuclei: Vec<NuclearSpec>,
    dims: Vec<usize>,
}

impl SpinSystem {
    pub fn electrons_only() -> Self {
        Self { nuclei: Vec::new(), dims: vec![2, 2] }
    }

    pub fn new(nuclei: Vec<NuclearSpec>) -> Result<Self> {
        if let Some(bad) = nuclei.iter().find(|n| n.spin.twice == 0) {
            return Err(Error::InvalidSpin(bad.spin.value()));
        }
        let mut dims = vec![2, 2];
        dims.extend(nuclei.iter().map(|n| n.spin.dim()));
        Ok(Self { nuclei, dims })
    }

    pub fn nuclei(&self) -> &[NuclearSpec] {
        &self.nuclei
    }

    pub fn subspace_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn nuclear_dim(&self) -> usize {
        self.total_dim() / 4
    }

    /// `I ⊗ ... ⊗ op ⊗ ... ⊗ I` with `op` acting on subspace `index`.
    pub fn embed(&self, index: usize, op: &Operator) -> Result<Operator> {
        let count = self.dims.len();
        if index >= count {
            return Err(Error::SubspaceIndex { index, count });
        }
        if op.nrows() != self.dims[index] || op.ncols() != self.dims[index] {
            return Err(Error::DimensionMismatch {
                expected: self.dims[index],
                found: op.nrows(),
            });
        }
        let before: usize = self.dims[..index].iter().product();
        let after: usize = self.dims[index + 1..].iter().product();
        let left = linalg::kron(&linalg::identity(before), op);
        Ok(linalg::kron(&left, &linalg::identity(after)))
    }

    pub fn electron_spin(&self, electron: Electron) -> [Operator; 3] {
        let ops = spin_operators(SpinNumber::HALF);
        ops.map(|op| {
            self.embed(electron.subspace(), &op)
                .expect("electron subspaces always exist")
        })
    }

    pub fn nuclear_spin(&self, nucleus: usize) -> Result<[Operator; 3]> {
        let spec = self.nuclei.get(nucleus).ok_or(Error::NucleusIndex {
            index: nucleus,
            count: self.nuclei.len(),
        })?;
        let [x, y, z] = spin_operators(spec.spin);
        Ok([
            self.embed(nucleus + 2, &x)?,
            self.embed(nucleus + 2, &y)?,
            self.embed(nucleus + 2, &z)?,
        ])
    }

    /// `s1 · s2` on the full space.
    pub fn electron_dot(&self) -> Operator {
        let s1 = self.electron_spin(Electron::One);
        let s2 = self.electron_spin(Electron::Two);
        s1.iter()
            .zip(s2.iter())
            .fold(linalg::zeros(self.total_dim()), |acc, (a, b)| acc + a * b)
    }

    /// `Q_S = 1/4 - s1·s2`, identity on the nuclei.
    pub fn singlet_projector(&self) -> Operator {
        linalg::identity(self.total_dim()) * c(0.25) - self.electron_dot()
    }

    pub fn triplet_projector(&self) -> Operator {
        linalg::identity(self.total_dim()) - self.singlet_projector()
    }

    pub fn projectors(&self) -> Projectors {
        let singlet = self.singlet_projector();
        let triplet = linalg::identity(self.total_dim()) - &singlet;
        Projectors { singlet, triplet }
    }

    /// Electron-space density matrix tensored with the maximally mixed
    /// nuclear state.
    pub fn with_mixed_nuclei(&self, electron_rho: &Operator) -> Operator {
        let d = self.nuclear_dim();
        linalg::kron(electron_rho, &(linalg::identity(d) * c(1.0 / d as f64)))
    }
}

/// Singlet and triplet projectors of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct Projectors {
    pub singlet: Operator,
    pub triplet: Operator,
}

impl Projectors {
    pub fn dim(&self) -> usize {
        self.singlet.nrows()
    }
}

/// Two-electron basis vectors in the `|m1 m2>` product basis.
pub mod electron_basis {
    use super::*;

    fn vec4(v: [f64; 4]) -> StateVector {
        StateVector::from_iterator(4, v.iter().map(|&x| c(x)))
    }

    pub fn singlet() -> StateVector {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        vec4([0.0, r, -r, 0.0])
    }

    pub fn triplet_zero() -> StateVector {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        vec4([0.0, r, r, 0.0])
    }

    pub fn triplet_plus() -> StateVector {
        vec4([1.0, 0.0, 0.0, 0.0])
    }

    pub fn triplet_minus() -> StateVector {
        vec4([0.0, 0.0, 0.0, 1.0])
    }
}

/// Initial states addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedState {
    Singlet,
    TripletZero,
    TripletPlus,
    TripletMinus,
    /// `(|S> + |T0>)/√2`
    CoherentPlus,
    /// `(|S> - |T0>)/√2`
    CoherentMinus,
    /// `(|S><S| + |T0><T0|)/2`
    MixedSt,
    /// Amplitudes over the 4 electron states (nuclei maximally mixed) or over
    /// the full space.
    Custom(Vec<Complex64>),
}

impl NamedState {
    pub const NAMES: [&'static str; 8] = [
        "singlet",
        "triplet_0",
        "triplet_plus",
        "triplet_minus",
        "coherent_plus",
        "coherent_minus",
        "mixed_ST",
        "custom",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NamedState::Singlet => "singlet",
            NamedState::TripletZero => "triplet_0",
            NamedState::TripletPlus => "triplet_plus",
            NamedState::TripletMinus => "triplet_minus",
            NamedState::CoherentPlus => "coherent_plus",
            NamedState::CoherentMinus => "coherent_minus",
            NamedState::MixedSt => "mixed_ST",
            NamedState::Custom(_) => "custom",
        }
    }

    /// Electron-space pure state, if the named state is pure.
    fn electron_vector(&self) -> Option<StateVector> {
        use electron_basis::*;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            NamedState::Singlet => Some(singlet()),
            NamedState::TripletZero => Some(triplet_zero()),
            NamedState::TripletPlus => Some(triplet_plus()),
            NamedState::TripletMinus => Some(triplet_minus()),
            NamedState::CoherentPlus => Some((singlet() + triplet_zero()) * c(r)),
            NamedState::CoherentMinus => Some((singlet() - triplet_zero()) * c(r)),
            NamedState::MixedSt | NamedState::Custom(_) => None,
        }
    }
}

impl FromStr for NamedState {
    type Err = Error;

    /// Parses every name except `custom`, which needs amplitudes.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "singlet" => NamedState::Singlet,
            "triplet_0" => NamedState::TripletZero,
            "triplet_plus" => NamedState::TripletPlus,
            "triplet_minus" => NamedState::TripletMinus,
            "coherent_plus" => NamedState::CoherentPlus,
            "coherent_minus" => NamedState::CoherentMinus,
            "mixed_ST" => NamedState::MixedSt,
            other => return Err(Error::UnknownState(other.to_string())),
        })
    }
}

/// Builds the density matrix of a named initial state on `system`.
pub fn named_state(system: &SpinSystem, state: &NamedState) -> Result<DensityState> {
    let matrix = match state {
        NamedState::MixedSt => {
            let s = linalg::outer(&electron_basis::singlet());
            let t = linalg::outer(&electron_basis::triplet_zero());
            system.with_mixed_nuclei(&((s + t) * c(0.5)))
        }
        NamedState::Custom(amps) => {
            let v = StateVector::from_column_slice(amps);
            let norm2 = v.norm_squared();
            if !norm2.is_finite() {
                return Err(Error::NonFinite("custom amplitudes"));
            }
            if (norm2 - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized(norm2));
            }
            if v.len() == 4 {
                system.with_mixed_nuclei(&linalg::outer(&v))
            } else if v.len() == system.total_dim() {
                linalg::outer(&v)
            } else {
                return Err(Error::DimensionMismatch {
                    expected: system.total_dim(),
                    found: v.len(),
                });
            }
        }
        pure => {
            let v = pure.electron_vector().expect("pure named state");
            system.with_mixed_nuclei(&linalg::outer(&v))
        }
    };
    // Rounding in 1/sqrt(2) leaves the trace a few ulp above one.
    let tr = linalg::trace_re(&matrix);
    DensityState::new(matrix * c(1.0 / tr))
}

/// Hermitian positive-semidefinite matrix with trace in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    matrix: Operator,
}

impl DensityState {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const EIGEN_TOL: f64 = 1e-9;
    pub const TRACE_TOL: f64 = 1e-9;

    pub fn new(matrix: Operator) -> Result<Self> {
        check_density(&matrix)?;
        Ok(Self { matrix })
    }

    /// Normalized `|ψ><ψ|`.
    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        let n2 = psi.norm_squared();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(Error::NotNormalized(n2));
        }
        Self::new(linalg::outer(psi) * c(1.0 / n2))
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn into_matrix(self) -> Operator {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.matrix)
    }
}

/// Checks every `DensityState` invariant on a raw matrix.
pub fn check_density(m: &Operator) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("density matrix"));
    }
    let herm = hermiticity_defect(m);
    if herm > DensityState::HERMITIAN_TOL {
        return Err(Error::InvalidDensity { quantity: "hermiticity defect", value: herm });
    }
    let tr = linalg::trace_re(m);
    if !(-DensityState::TRACE_TOL..=1.0 + DensityState::TRACE_TOL).contains(&tr) {
        return Err(Error::InvalidDensity { quantity: "trace", value: tr });
    }
    let min = min_eigenvalue(m);
    if min < -DensityState::EIGEN_TOL {
        return Err(Error::InvalidDensity { quantity: "min eigenvalue", value: min });
    }
    Ok(())
}
