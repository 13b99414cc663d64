//! Density-matrix master equations and their fixed-step integration.
//!
//! Three right-hand sides share one measurement (dephasing) term:
//!
//! * non-reacting: `-i[H,ρ] - (k_S+k_T)/2 (ρQ_S + Q_Sρ - 2Q_SρQ_S)`, trace preserving;
//! * nonlinear: the non-reacting term plus a reaction term that interpolates,
//!   with weight `p_coh`, between projecting out the singlet/triplet blocks
//!   and removing whole copies of `ρ/Tr{ρ}`;
//! * traditional: the nonlinear equation with `p_coh` forced to zero, which is
//!   the Haberkorn anticommutator form.
//!
//! Yields are accumulated alongside ρ so `Tr{ρ} + n_S + n_T` is an exact
//! linear invariant of the integrator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coherence::{self, AveragedCoherence, CoherenceConfig, CoherenceMode};
use crate::linalg::{self, c, hermitian_part, hermiticity_defect, min_eigenvalue, Operator, I};
use crate::magnetics::{build_hamiltonian, HamiltonianSpec};
use crate::spin::{electron_basis, DensityState, Projectors, SpinSystem};
use crate::{Error, Result};

/// Singlet and triplet recombination rates (1/time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionParams {
    pub k_singlet: f64,
    pub k_triplet: f64,
}

impl ReactionParams {
    pub fn new(k_singlet: f64, k_triplet: f64) -> Result<Self> {
        for (name, k) in [("k_S", k_singlet), ("k_T", k_triplet)] {
            if !k.is_finite() || k < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {k}")));
            }
        }
        Ok(Self { k_singlet, k_triplet })
    }

    pub fn singlet_only(k: f64) -> Self {
        Self { k_singlet: k, k_triplet: 0.0 }
    }

    pub fn sum(&self) -> f64 {
        self.k_singlet + self.k_triplet
    }

    /// Total measurement (dephasing) rate `(k_S + k_T)/2`.
    pub fn dephasing(&self) -> f64 {
        0.5 * self.sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theory {
    /// Coherence-weighted nonlinear master equation.
    #[serde(rename = "kominis")]
    Nonlinear,
    #[serde(rename = "traditional")]
    Traditional,
    #[serde(rename = "nonreacting")]
    NonReacting,
}

impl Theory {
    pub const SUPPORTED: [&'static str; 3] = ["kominis", "traditional", "nonreacting"];

    pub fn as_str(self) -> &'static str {
        match self {
            Theory::Nonlinear => "kominis",
            Theory::Traditional => "traditional",
            Theory::NonReacting => "nonreacting",
        }
    }

    pub fn is_reacting(self) -> bool {
        !matches!(self, Theory::NonReacting)
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Theory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kominis" => Ok(Theory::Nonlinear),
            "traditional" => Ok(Theory::Traditional),
            "nonreacting" => Ok(Theory::NonReacting),
            other => Err(Error::Config(format!(
                "unsupported theory `{other}`; supported: {}",
                Theory::SUPPORTED.join(", ")
            ))),
        }
    }
}

/// Time derivative of ρ together with the instantaneous product rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub drho: Operator,
    /// `dn_S/dt = k_S Tr{Q_S ρ}`
    pub singlet_rate: f64,
    /// `dn_T/dt = k_T Tr{Q_T ρ}`
    pub triplet_rate: f64,
}

/// Hamiltonian, projectors and rates of one reacting system.
#[derive(Debug, Clone)]
pub struct ReactionModel {
    hamiltonian: Operator,
    projectors: Projectors,
    params: ReactionParams,
    coherence: CoherenceConfig,
    averaged: AveragedCoherence,
    hamiltonian_norm: f64,
}

impl ReactionModel {
    pub fn new(hamiltonian: Operator, projectors: Projectors, params: ReactionParams) -> Result<Self> {
        Self::with_coherence(hamiltonian, projectors, params, CoherenceConfig::default())
    }

    pub fn with_coherence(
        hamiltonian: Operator,
        projectors: Projectors,
        params: ReactionParams,
        coherence: CoherenceConfig,
    ) -> Result<Self> {
        let params = ReactionParams::new(params.k_singlet, params.k_triplet)?;
        if hamiltonian.nrows() != projectors.dim() || hamiltonian.ncols() != projectors.dim() {
            return Err(Error::DimensionMismatch {
                expected: projectors.dim(),
                found: hamiltonian.nrows(),
            });
        }
        let defect = hermiticity_defect(&hamiltonian);
        if defect > 1e-12 {
            return Err(Error::InvalidDensity { quantity: "hamiltonian hermiticity defect", value: defect });
        }
        let averaged = AveragedCoherence::new(&hamiltonian, &coherence, params.sum())?;
        let hamiltonian_norm = linalg::spectral_norm_hermitian(&hamiltonian);
        Ok(Self { hamiltonian, projectors, params, coherence, averaged, hamiltonian_norm })
    }

    pub fn from_spec(
        system: &SpinSystem,
        spec: &HamiltonianSpec,
        params: ReactionParams,
        coherence: CoherenceConfig,
    ) -> Result<Self> {
        let h = build_hamiltonian(system, spec)?;
        Self::with_coherence(h, system.projectors(), params, coherence)
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn projectors(&self) -> &Projectors {
        &self.projectors
    }

    pub fn params(&self) -> ReactionParams {
        self.params
    }

    pub fn coherence_config(&self) -> &CoherenceConfig {
        &self.coherence
    }

    /// Lag window used by the averaged coherence measure.
    pub fn averaging_window(&self) -> Option<f64> {
        self.averaged.window()
    }

    pub fn hamiltonian_norm(&self) -> f64 {
        self.hamiltonian_norm
    }

    pub fn dim(&self) -> usize {
        self.projectors.dim()
    }

    fn check_dim(&self, rho: &Operator) -> Result<()> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rho.nrows() });
        }
        Ok(())
    }

    pub fn coherence(&self, rho: &Operator, mode: CoherenceMode) -> Result<f64> {
        match mode {
            CoherenceMode::Instantaneous => coherence::p_coh(rho, &self.projectors, &self.coherence),
            CoherenceMode::Averaged => self.averaged.evaluate(rho, &self.projectors),
        }
    }

    /// `(Tr{Q_S ρ}, Tr{Q_T ρ})`
    pub fn populations(&self, rho: &Operator) -> (f64, f64) {
        (
            linalg::trace_product(&self.projectors.singlet, rho).re,
            linalg::trace_product(&self.projectors.triplet, rho).re,
        )
    }

    /// Trace-preserving evolution of the unrecombined pairs.
    pub fn rhs_nonreacting(&self, rho: &Operator) -> Result<Operator> {
        self.check_dim(rho)?;
        let qs = &self.projectors.singlet;
        let qs_rho = qs * rho;
        let rho_qs = rho * qs;
        let sandwich = &qs_rho * qs;
        let dephase = rho_qs + qs_rho - sandwich * c(2.0);
        Ok(linalg::commutator(&self.hamiltonian, rho) * (-I) - dephase * c(self.params.dephasing()))
    }

    fn reaction(&self, rho: &Operator, p: f64) -> Result<Derivative> {
        let mut drho = self.rhs_nonreacting(rho)?;
        let Projectors { singlet: qs, triplet: qt } = &self.projectors;
        let (pop_s, pop_t) = self.populations(rho);
        let ks = self.params.k_singlet;
        let kt = self.params.k_triplet;
        let singlet_rate = ks * pop_s;
        let triplet_rate = kt * pop_t;
        if p < 1.0 {
            let mut incoh = linalg::zeros(self.dim());
            if ks != 0.0 {
                incoh += qs * rho * qs * c(ks);
            }
            if kt != 0.0 {
                incoh += qt * rho * qt * c(kt);
            }
            drho -= incoh * c(1.0 - p);
        }
        if p > 0.0 {
            let tr = linalg::trace_re(rho);
            drho -= rho * c(p * (singlet_rate + triplet_rate) / tr);
        }
        Ok(Derivative { drho, singlet_rate, triplet_rate })
    }

    /// Coherence-weighted nonlinear master equation.
    pub fn rhs_nonlinear(&self, rho: &Operator, mode: CoherenceMode, trace_floor: f64) -> Result<Derivative> {
        self.check_dim(rho)?;
        let tr = linalg::trace_re(rho);
        if !(tr > trace_floor) {
            return Err(Error::Terminated { trace: tr, floor: trace_floor });
        }
        let p = self.coherence(rho, mode)?;
        self.reaction(rho, p)
    }

    /// Traditional (Haberkorn) master equation.
    pub fn rhs_traditional(&self, rho: &Operator) -> Result<Derivative> {
        self.reaction(rho, 0.0)
    }

    pub fn derivative(
        &self,
        theory: Theory,
        mode: CoherenceMode,
        rho: &Operator,
        trace_floor: f64,
    ) -> Result<Derivative> {
        match theory {
            Theory::Nonlinear => self.rhs_nonlinear(rho, mode, trace_floor),
            Theory::Traditional => self.rhs_traditional(rho),
            Theory::NonReacting => Ok(Derivative {
                drho: self.rhs_nonreacting(rho)?,
                singlet_rate: 0.0,
                triplet_rate: 0.0,
            }),
        }
    }

    /// One classical RK4 step of `(ρ, n_S, n_T)`. Returns the new ρ and the
    /// product increments.
    pub fn rk4_step(
        &self,
        theory: Theory,
        mode: CoherenceMode,
        rho: &Operator,
        dt: f64,
        trace_floor: f64,
    ) -> Result<(Operator, f64, f64)> {
        let f = |r: &Operator| self.derivative(theory, mode, r, trace_floor);
        let k1 = f(rho)?;
        let k2 = f(&(rho + &k1.drho * c(0.5 * dt)))?;
        let k3 = f(&(rho + &k2.drho * c(0.5 * dt)))?;
        let k4 = f(&(rho + &k3.drho * c(dt)))?;
        let w = dt / 6.0;
        let drho = (k1.drho + (k2.drho + k3.drho) * c(2.0) + k4.drho) * c(w);
        let dns = w * (k1.singlet_rate + 2.0 * (k2.singlet_rate + k3.singlet_rate) + k4.singlet_rate);
        let dnt = w * (k1.triplet_rate + 2.0 * (k2.triplet_rate + k3.triplet_rate) + k4.triplet_rate);
        Ok((rho + drho, dns, dnt))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub trace_floor: f64,
    pub theory: Theory,
    pub coherence_mode: CoherenceMode,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_max: 20.0,
            trace_floor: 1e-9,
            theory: Theory::Nonlinear,
            coherence_mode: CoherenceMode::Instantaneous,
        }
    }
}

impl IntegratorConfig {
    /// Upper bound on `dt · max(k_S + k_T, ||H||)`.
    pub const STEP_BOUND: f64 = 0.05;
    /// Most negative eigenvalue tolerated mid-run. Looser than the input
    /// check because RK4 truncation at the step bound reaches ~1e-9 on
    /// rank-deficient states.
    pub const POSITIVITY_TOL: f64 = 1e-7;

    pub fn new(theory: Theory, dt: f64, t_max: f64) -> Self {
        Self { dt, t_max, theory, ..Self::default() }
    }

    pub fn validate(&self, model: &ReactionModel) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be >= 0, got {}", self.t_max)));
        }
        if !(self.trace_floor >= 0.0 && self.trace_floor < 1.0) {
            return Err(Error::Config(format!("trace_floor must lie in [0, 1), got {}", self.trace_floor)));
        }
        let scale = model.params.sum().max(model.hamiltonian_norm);
        let value = self.dt * scale;
        if value > Self::STEP_BOUND * (1.0 + 1e-12) {
            return Err(Error::StepSize {
                quantity: "dt*max(k_S+k_T, ||H||)",
                value,
                bound: Self::STEP_BOUND,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t: f64,
    pub trace: f64,
    #[serde(rename = "tr_QS")]
    pub tr_qs: f64,
    #[serde(rename = "tr_QT")]
    pub tr_qt: f64,
    pub p_coh: f64,
    #[serde(rename = "dnS_cum")]
    pub dns_cum: f64,
    #[serde(rename = "dnT_cum")]
    pub dnt_cum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub theory: Theory,
    pub rows: Vec<RecordRow>,
    pub yield_singlet: f64,
    pub yield_triplet: f64,
    pub final_state: Operator,
    /// Run stopped because the trace fell below the floor.
    pub terminated: bool,
}

impl SimulationRecord {
    /// Unreacted fraction, `Tr{ρ}` at the end of the run.
    pub fn survival(&self) -> f64 {
        linalg::trace_re(&self.final_state)
    }

    pub fn last(&self) -> &RecordRow {
        self.rows.last().expect("record has at least the initial row")
    }
}

fn invariant(step: usize, t: f64, quantity: &'static str, value: f64) -> Error {
    Error::Invariant { step, t, quantity, value }
}

/// Integrates `rho0` under the configured theory with fixed-step RK4.
pub fn integrate(rho0: &DensityState, model: &ReactionModel, config: &IntegratorConfig) -> Result<SimulationRecord> {
    config.validate(model)?;
    model.check_dim(rho0.matrix())?;
    if (rho0.trace() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDensity { quantity: "initial trace", value: rho0.trace() });
    }
    let theory = config.theory;
    let mode = match theory {
        Theory::Nonlinear => config.coherence_mode,
        _ => CoherenceMode::Instantaneous,
    };
    let row = |t: f64, rho: &Operator, dns: f64, dnt: f64| -> Result<RecordRow> {
        let trace = linalg::trace_re(rho);
        let (tr_qs, tr_qt) = model.populations(rho);
        let p_coh = if trace > 0.0 { model.coherence(rho, mode)? } else { 0.0 };
        Ok(RecordRow { t, trace, tr_qs, tr_qt, p_coh, dns_cum: dns, dnt_cum: dnt })
    };

    let mut rho = rho0.matrix().clone();
    let (mut ns, mut nt) = (0.0, 0.0);
    let mut t = 0.0;
    let mut rows = vec![row(0.0, &rho, 0.0, 0.0)?];
    let mut terminated = false;
    let mut step = 0usize;

    loop {
        let remaining = config.t_max - t;
        if remaining <= 1e-12 * config.dt.max(config.t_max) {
            break;
        }
        let trace = linalg::trace_re(&rho);
        if theory.is_reacting() && trace < config.trace_floor {
            terminated = true;
            break;
        }
        let h = config.dt.min(remaining);
        let (next, dns, dnt) = match model.rk4_step(theory, mode, &rho, h, config.trace_floor) {
            Ok(out) => out,
            Err(Error::Terminated { .. }) => {
                terminated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        step += 1;
        t = if h < config.dt { config.t_max } else { step as f64 * config.dt };

        let drift = hermiticity_defect(&next);
        if drift > 1e-12 {
            return Err(invariant(step, t, "hermiticity drift", drift));
        }
        let next = hermitian_part(&next);
        let new_trace = linalg::trace_re(&next);
        let min_eig = min_eigenvalue(&next);
        if min_eig < -IntegratorConfig::POSITIVITY_TOL {
            return Err(invariant(step, t, "min eigenvalue", min_eig));
        }
        if !(-DensityState::TRACE_TOL..=1.0 + DensityState::TRACE_TOL).contains(&new_trace) {
            return Err(invariant(step, t, "trace", new_trace));
        }
        if theory.is_reacting() && new_trace > trace + 1e-12 {
            return Err(invariant(step, t, "trace increase", new_trace - trace));
        }
        if dns < -1e-14 || dnt < -1e-14 {
            return Err(invariant(step, t, "negative product increment", dns.min(dnt)));
        }
        ns += dns;
        nt += dnt;
        let drift = (new_trace + ns + nt - 1.0).abs();
        if drift > 1e-6 {
            return Err(invariant(step, t, "trace accounting drift", drift));
        }
        rho = next;
        rows.push(row(t, &rho, ns, nt)?);
    }

    Ok(SimulationRecord {
        theory,
        rows,
        yield_singlet: ns,
        yield_triplet: nt,
        final_state: rho,
        terminated,
    })
}

/// Finite-step change of ρ with its predicted first-order decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCheck {
    pub drho: Operator,
    pub predicted: Operator,
    /// `max |drho - predicted|` entrywise.
    pub residual: f64,
}

/// One-step comparison of the nonlinear and traditional updates for an
/// ensemble of `n` molecules in `(|S> + |T0>)/√2` with `H = 0`, `k_T = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepReport {
    pub n: f64,
    pub dt: f64,
    /// `dn_S = n k_S dt / 2`, identical for both theories.
    pub dn_singlet: f64,
    /// Predicted: `-dn_S ρ1 - (k_S dt/2) ρ_coh`.
    pub nonlinear: StepCheck,
    /// Predicted: `-dn_S ρ1 + n (k_S dt/4)(|T><T| - |S><S|)`.
    pub traditional: StepCheck,
    /// `<T| n dρ1 |T>` under the traditional update, i.e. of `dρ + dn_S ρ1`.
    pub traditional_triplet_gain: f64,
}

pub fn one_step_comparison(n: f64, rho1: &DensityState, params: ReactionParams, dt: f64) -> Result<OneStepReport> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Config(format!("molecule count must be > 0, got {n}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    if params.k_triplet != 0.0 {
        return Err(Error::Config("one-step comparison requires k_T = 0".into()));
    }
    let system = SpinSystem::electrons_only();
    let s = electron_basis::singlet();
    let t0 = electron_basis::triplet_zero();
    let psi = (&s + &t0) * c(std::f64::consts::FRAC_1_SQRT_2);
    let expected = linalg::outer(&psi);
    if rho1.dim() != 4 || linalg::max_abs_diff(rho1.matrix(), &expected) > 1e-12 {
        return Err(Error::Config("one-step comparison requires rho1 = coherent_plus".into()));
    }

    let model = ReactionModel::new(linalg::zeros(4), system.projectors(), params)?;
    let rho1 = rho1.matrix();
    let ensemble = rho1 * c(n);
    let blocks = coherence::decompose(rho1, model.projectors())?;
    let rho_coh = blocks.coherent() * c(n);
    let k = params.k_singlet;
    let dn_singlet = n * k * dt / 2.0;

    let check = |theory: Theory, predicted: Operator| -> Result<StepCheck> {
        let (next, _, _) = model.rk4_step(theory, CoherenceMode::Instantaneous, &ensemble, dt, 0.0)?;
        let drho = next - &ensemble;
        let residual = linalg::max_abs_diff(&drho, &predicted);
        Ok(StepCheck { drho, predicted, residual })
    };

    let nonlinear = check(Theory::Nonlinear, rho1 * c(-dn_singlet) - &rho_coh * c(k * dt / 2.0))?;
    let shift = linalg::outer(&t0) - linalg::outer(&s);
    let traditional = check(Theory::Traditional, rho1 * c(-dn_singlet) + shift * c(n * k * dt / 4.0))?;
    let unreacted = &traditional.drho + rho1 * c(dn_singlet);
    let traditional_triplet_gain = (t0.adjoint() * unreacted * &t0)[(0, 0)].re;

    Ok(OneStepReport { n, dt, dn_singlet, nonlinear, traditional, traditional_triplet_gain })
}
