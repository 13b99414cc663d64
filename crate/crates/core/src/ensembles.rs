//! Proper and improper mixtures.
//!
//! A proper mixture is a collection of sub-ensembles, each prepared in its own
//! state. Under a nonlinear equation each sub-ensemble must be evolved on its
//! own and only the observables added up; evolving the summed density matrix
//! (an improper mixture) generally gives a different answer.

use rayon::prelude::*;

use crate::evolvers::{integrate, IntegratorConfig, ReactionModel, RecordRow, SimulationRecord};
use crate::linalg::{self, c};
use crate::spin::DensityState;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProperMixture {
    components: Vec<(f64, DensityState)>,
}

impl ProperMixture {
    /// Weights must be non-negative and sum to one within `1e-9`.
    pub fn new(components: Vec<(f64, DensityState)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("proper mixture needs at least one component".into()));
        }
        let dim = components[0].1.dim();
        let mut total = 0.0;
        for (w, rho) in &components {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("mixture weight must be >= 0, got {w}")));
            }
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, DensityState)] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }

    /// The weighted-sum density matrix, i.e. the improper counterpart.
    pub fn summed(&self) -> Result<DensityState> {
        let m = self
            .components
            .iter()
            .fold(linalg::zeros(self.dim()), |acc, (w, rho)| acc + rho.matrix() * c(*w));
        DensityState::new(linalg::hermitian_part(&m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRecord {
    /// Weight-summed observables. `p_coh` is the population-weighted mean of
    /// the component values.
    pub aggregate: SimulationRecord,
    pub weights: Vec<f64>,
    pub components: Vec<SimulationRecord>,
}

/// Integrates each component separately and adds up the observables.
pub fn evolve_proper(mixture: &ProperMixture, model: &ReactionModel, config: &IntegratorConfig) -> Result<MixtureRecord> {
    let components: Vec<SimulationRecord> = mixture
        .components
        .par_iter()
        .map(|(_, rho)| integrate(rho, model, config))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = mixture.components.iter().map(|(w, _)| *w).collect();

    let n_rows = components.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let mut agg = RecordRow { t: 0.0, trace: 0.0, tr_qs: 0.0, tr_qt: 0.0, p_coh: 0.0, dns_cum: 0.0, dnt_cum: 0.0 };
        let mut coh_weight = 0.0;
        for (w, rec) in weights.iter().zip(&components) {
            // A component that stopped early stays at its last row.
            let r = rec.rows.get(i).unwrap_or_else(|| rec.last());
            agg.trace += w * r.trace;
            agg.tr_qs += w * r.tr_qs;
            agg.tr_qt += w * r.tr_qt;
            agg.dns_cum += w * r.dns_cum;
            agg.dnt_cum += w * r.dnt_cum;
            agg.p_coh += w * r.trace * r.p_coh;
            coh_weight += w * r.trace;
        }
        agg.p_coh = if coh_weight > 0.0 { agg.p_coh / coh_weight } else { 0.0 };
        agg.t = components
            .iter()
            .find(|rec| rec.rows.len() > i)
            .map(|rec| rec.rows[i].t)
            .unwrap_or(0.0);
        rows.push(agg);
    }

    let final_state = weights
        .iter()
        .zip(&components)
        .fold(linalg::zeros(mixture.dim()), |acc, (w, rec)| acc + &rec.final_state * c(*w));
    let aggregate = SimulationRecord {
        theory: config.theory,
        rows,
        yield_singlet: weights.iter().zip(&components).map(|(w, r)| w * r.yield_singlet).sum(),
        yield_triplet: weights.iter().zip(&components).map(|(w, r)| w * r.yield_triplet).sum(),
        final_state,
        terminated: components.iter().all(|r| r.terminated),
    };
    Ok(MixtureRecord { aggregate, weights, components })
}

/// Integrates the summed density matrix as a single ensemble.
pub fn evolve_improper(rho: &DensityState, model: &ReactionModel, config: &IntegratorConfig) -> Result<SimulationRecord> {
    integrate(rho, model, config)
}
