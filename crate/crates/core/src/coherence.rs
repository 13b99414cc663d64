//! Singlet–triplet block decomposition of ρ and the coherence measure
//!
//! ```text
//! p_coh = Tr{ρ_ST ρ_TS} / (Tr{ρ_SS} Tr{ρ_TT})
//! ```
//!
//! together with its time-averaged variant, in which `ρ_TS` is propagated by
//! the magnetic Hamiltonian over a window of lags `τ` and the modulus of the
//! averaged overlap is taken.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, HermitianEigen, Operator};
use crate::spin::Projectors;
use crate::{Error, Result};

/// Which coherence measure weights the reaction terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceMode {
    #[default]
    Instantaneous,
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    /// Relative floor on `Tr{ρ_SS} Tr{ρ_TT} / Tr{ρ}²` below which `p_coh = 0`.
    pub epsilon: f64,
    /// Averaging window; `None` picks [`default_window`].
    pub tau_window: Option<f64>,
    pub tau_samples: usize,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self { epsilon: 1e-12, tau_window: None, tau_samples: 64 }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if let Some(w) = self.tau_window {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("tau_window must be > 0, got {w}")));
            }
        }
        if self.tau_samples < 8 {
            return Err(Error::Config(format!(
                "tau_samples must be >= 8, got {}",
                self.tau_samples
            )));
        }
        Ok(())
    }
}

/// `ρ = ρ_SS + ρ_TT + ρ_ST + ρ_TS` with `ρ_αβ = Q_α ρ Q_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoBlocks {
    pub ss: Operator,
    pub tt: Operator,
    pub st: Operator,
    pub ts: Operator,
}

impl RhoBlocks {
    /// Coherent part `ρ̃ = ρ_ST + ρ_TS`.
    pub fn coherent(&self) -> Operator {
        &self.st + &self.ts
    }

    /// Incoherent part `ρ̄ = ρ_SS + ρ_TT`.
    pub fn incoherent(&self) -> Operator {
        &self.ss + &self.tt
    }
}

pub fn decompose(rho: &Operator, projectors: &Projectors) -> Result<RhoBlocks> {
    check_dim(rho, projectors)?;
    let Projectors { singlet: qs, triplet: qt } = projectors;
    let rs = rho * qs;
    let rt = rho * qt;
    Ok(RhoBlocks { ss: qs * &rs, tt: qt * &rt, st: qs * &rt, ts: qt * &rs })
}

fn check_dim(rho: &Operator, projectors: &Projectors) -> Result<()> {
    if rho.nrows() != projectors.dim() || rho.ncols() != projectors.dim() {
        return Err(Error::DimensionMismatch { expected: projectors.dim(), found: rho.nrows() });
    }
    Ok(())
}

/// Block populations `(Tr{ρ_SS}, Tr{ρ_TT})` and the total trace.
fn populations(rho: &Operator, projectors: &Projectors) -> Result<(f64, f64, f64)> {
    let tr = linalg::trace_re(rho);
    if tr <= 0.0 || !tr.is_finite() {
        return Err(Error::ZeroTrace);
    }
    let s = linalg::trace_product(&projectors.singlet, rho).re;
    let t = linalg::trace_product(&projectors.triplet, rho).re;
    Ok((s, t, tr))
}

fn ratio(numerator: f64, s: f64, t: f64, tr: f64, epsilon: f64) -> f64 {
    let denom = s * t;
    if denom < epsilon * tr * tr {
        return 0.0;
    }
    (numerator / denom).clamp(0.0, 1.0)
}

/// Instantaneous singlet–triplet coherence of `rho`.
pub fn p_coh(rho: &Operator, projectors: &Projectors, config: &CoherenceConfig) -> Result<f64> {
    check_dim(rho, projectors)?;
    let (s, t, tr) = populations(rho, projectors)?;
    // Tr{ρ_ST ρ_TS} = ||Q_S ρ Q_T||_F^2 since ρ_TS = ρ_ST†.
    let st = &projectors.singlet * (rho * &projectors.triplet);
    Ok(ratio(st.norm_squared(), s, t, tr, config.epsilon))
}

/// `Tr{ρ_ST ρ_TS}`, the unnormalized numerator of `p_coh`.
pub fn coherence_overlap(rho: &Operator, projectors: &Projectors) -> Result<f64> {
    check_dim(rho, projectors)?;
    Ok((&projectors.singlet * (rho * &projectors.triplet)).norm_squared())
}

/// Default lag window: the largest whole number of periods `2π/Δ` of the
/// widest Hamiltonian gap `Δ` that fits in the reaction time `1/(k_S + k_T)`,
/// at least one period. Ten periods when nothing reacts. `None` when the
/// Hamiltonian is a multiple of the identity.
pub fn default_window(gap: f64, rate_sum: f64) -> Option<f64> {
    if !(gap > 1e-12) {
        return None;
    }
    let period = 2.0 * PI / gap;
    let periods = if rate_sum > 0.0 {
        (1.0 / (rate_sum * period) + 1e-9).floor().max(1.0)
    } else {
        10.0
    };
    Some(periods * period)
}

/// Time-averaged coherence evaluator for a fixed Hamiltonian.
#[derive(Debug, Clone)]
pub struct AveragedCoherence {
    eigen: HermitianEigen,
    window: Option<f64>,
    samples: usize,
    epsilon: f64,
}

impl AveragedCoherence {
    pub fn new(h: &Operator, config: &CoherenceConfig, rate_sum: f64) -> Result<Self> {
        config.validate()?;
        let eigen = HermitianEigen::new(h);
        let scale = eigen.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let window = if eigen.spread() <= 1e-14 * scale {
            None
        } else {
            config.tau_window.or_else(|| default_window(eigen.spread(), rate_sum))
        };
        Ok(Self { eigen, window, samples: config.tau_samples, epsilon: config.epsilon })
    }

    /// Window actually used; `None` when the propagator is a global phase.
    pub fn window(&self) -> Option<f64> {
        self.window
    }

    pub fn evaluate(&self, rho: &Operator, projectors: &Projectors) -> Result<f64> {
        check_dim(rho, projectors)?;
        let Some(window) = self.window else {
            return p_coh(
                rho,
                projectors,
                &CoherenceConfig { epsilon: self.epsilon, ..CoherenceConfig::default() },
            );
        };
        let (s, t, tr) = populations(rho, projectors)?;
        let v = &self.eigen.vectors;
        let vd = v.adjoint();
        let st = &projectors.singlet * (rho * &projectors.triplet);
        // In the eigenbasis, Tr{ρ_ST e^{-iHτ} ρ_TS e^{iHτ}} =
        //   Σ_ab A_ba B_ab exp(-i (λ_a - λ_b) τ)  with A = V†ρ_ST V, B = A†.
        let a = &vd * &st * v;
        let n = a.nrows();
        let dt = window / self.samples as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for ia in 0..n {
            for ib in 0..n {
                let w = a[(ib, ia)] * a[(ib, ia)].conj();
                if w.re == 0.0 {
                    continue;
                }
                let omega = self.eigen.values[ia] - self.eigen.values[ib];
                let mean: Complex64 = (0..self.samples)
                    .map(|j| Complex64::from_polar(1.0, -omega * dt * j as f64))
                    .sum::<Complex64>()
                    / self.samples as f64;
                acc += w * mean;
            }
        }
        Ok(ratio(acc.norm(), s, t, tr, self.epsilon))
    }
}

/// Time-averaged coherence with lags propagated by `h`.
pub fn p_coh_averaged(
    rho: &Operator,
    h: &Operator,
    projectors: &Projectors,
    config: &CoherenceConfig,
    rate_sum: f64,
) -> Result<f64> {
    AveragedCoherence::new(h, config, rate_sum)?.evaluate(rho, projectors)
}
