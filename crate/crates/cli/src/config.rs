//! Run configuration: a TOML document with one table per section.
//!
//! Every optional key has its default filled in during [`parse_config`], so
//! [`emit`] of a parsed config is a complete, re-parseable echo.

use serde::{Deserialize, Serialize};

use radpair::spin::named_state;
use radpair::{
    CoherenceConfig, CoherenceMode, DensityState, Electron, HamiltonianSpec, Hyperfine, HyperfineCoupling,
    IntegratorConfig, NamedState, NuclearSpec, ProperMixture, ReactionModel, ReactionParams, SpinNumber, SpinSystem,
    Theory, TrajectoryConfig,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub hamiltonian: HamiltonianSection,
    pub reaction: ReactionSection,
    pub initial_state: InitialStateSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub trajectories: TrajectorySection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default)]
    pub nuclei: Vec<NucleusEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NucleusEntry {
    pub spin: f64,
    /// Electron (1 or 2) the nucleus sits next to.
    pub electron: Electron,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    #[serde(default)]
    pub field: [f64; 3],
    #[serde(default = "unit_g")]
    pub g_scale: [f64; 2],
    #[serde(default)]
    pub exchange: f64,
    #[serde(default)]
    pub delta_g: f64,
    #[serde(default)]
    pub hyperfine: Vec<HyperfineEntry>,
}

impl Default for HamiltonianSection {
    fn default() -> Self {
        Self { field: [0.0; 3], g_scale: unit_g(), exchange: 0.0, delta_g: 0.0, hyperfine: Vec::new() }
    }
}

fn unit_g() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineEntry {
    /// Zero-based index into `system.nuclei`.
    pub nucleus: usize,
    pub electron: Electron,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSection {
    pub k_s: f64,
    pub k_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `[re, im]` pairs, either 4 electron amplitudes or the full dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<MixtureEntry>>,
    /// Treat `mixture` as a proper mixture. When false the components are
    /// summed into one density matrix first.
    #[serde(default = "yes")]
    pub proper: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureEntry {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_floor")]
    pub trace_floor: f64,
    #[serde(default = "default_theory")]
    pub theory: Theory,
    #[serde(default)]
    pub coherence_mode: CoherenceMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_window: Option<f64>,
    #[serde(default = "default_tau_samples")]
    pub tau_samples: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_dt() -> f64 {
    IntegratorConfig::default().dt
}
fn default_t_max() -> f64 {
    IntegratorConfig::default().t_max
}
fn default_floor() -> f64 {
    IntegratorConfig::default().trace_floor
}
fn default_theory() -> Theory {
    Theory::Nonlinear
}
fn default_tau_samples() -> usize {
    CoherenceConfig::default().tau_samples
}
fn default_epsilon() -> f64 {
    CoherenceConfig::default().epsilon
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_max: default_t_max(),
            trace_floor: default_floor(),
            theory: default_theory(),
            coherence_mode: CoherenceMode::default(),
            tau_window: None,
            tau_samples: default_tau_samples(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_traj_dt")]
    pub dt: f64,
    /// Defaults to `integrator.t_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Also compare the recombination-free mean state with the master equation.
    #[serde(default)]
    pub compare_master: bool,
    #[serde(default = "default_sample_times")]
    pub sample_times: Vec<f64>,
}

fn default_n() -> usize {
    TrajectoryConfig::default().n_trajectories
}
fn default_traj_dt() -> f64 {
    TrajectoryConfig::default().dt
}
fn default_sample_times() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            enabled: false,
            n: default_n(),
            seed: 0,
            dt: default_traj_dt(),
            t_max: None,
            compare_master: false,
            sample_times: default_sample_times(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_json")]
    pub json: String,
    #[serde(default = "default_compare_csv")]
    pub compare_csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<String>,
    /// Write every `stride`-th step (the last row is always written).
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_csv() -> String {
    "record.csv".into()
}
fn default_json() -> String {
    "summary.json".into()
}
fn default_compare_csv() -> String {
    "compare.csv".into()
}
fn default_stride() -> usize {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            csv: default_csv(),
            json: default_json(),
            compare_csv: default_compare_csv(),
            plot: None,
            stride: default_stride(),
        }
    }
}

/// Parses and validates `text`, filling in every default.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.trajectories.t_max.is_none() {
        cfg.trajectories.t_max = Some(cfg.integrator.t_max);
    }
    cfg.build()?;
    Ok(cfg)
}

/// Serializes a config back to TOML.
pub fn emit(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config is always representable in TOML")
}

/// Initial ensemble as configured.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Single(DensityState),
    Proper(ProperMixture),
}

impl InitialState {
    /// The single density matrix (summed for a mixture).
    pub fn density(&self) -> Result<DensityState, CliError> {
        match self {
            InitialState::Single(rho) => Ok(rho.clone()),
            InitialState::Proper(mix) => mix.summed().map_err(config_err),
        }
    }
}

/// Everything a run needs, constructed from a validated config.
#[derive(Debug, Clone)]
pub struct Problem {
    pub system: SpinSystem,
    pub spec: HamiltonianSpec,
    pub model: ReactionModel,
    pub initial: InitialState,
    pub integrator: IntegratorConfig,
    pub trajectories: TrajectoryConfig,
}

fn config_err(e: radpair::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn amplitudes(pairs: &[[f64; 2]]) -> NamedState {
    NamedState::Custom(pairs.iter().map(|[re, im]| num_complex::Complex64::new(*re, *im)).collect())
}

fn state_from(
    system: &SpinSystem,
    name: Option<&String>,
    amps: Option<&Vec<[f64; 2]>>,
    location: &str,
) -> Result<DensityState, CliError> {
    let state = match (name, amps) {
        (Some(n), None) => n.parse::<NamedState>().map_err(|_| {
            CliError::Config(format!(
                "{location}: unknown state `{n}`; supported: {}",
                NamedState::NAMES.iter().filter(|s| **s != "custom").copied().collect::<Vec<_>>().join(", ")
            ))
        })?,
        (None, Some(a)) => amplitudes(a),
        _ => {
            return Err(CliError::Config(format!("{location}: give exactly one of `name` or `amplitudes`")));
        }
    };
    named_state(system, &state).map_err(|e| CliError::Config(format!("{location}: {e}")))
}

impl RunConfig {
    pub fn build(&self) -> Result<Problem, CliError> {
        let nuclei = self
            .system
            .nuclei
            .iter()
            .map(|n| {
                Ok(NuclearSpec { spin: SpinNumber::new(n.spin).map_err(config_err)?, electron: n.electron })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let system = SpinSystem::new(nuclei).map_err(config_err)?;

        let h = &self.hamiltonian;
        let hyperfine = h
            .hyperfine
            .iter()
            .enumerate()
            .map(|(i, hf)| {
                let coupling = match (hf.a, hf.tensor) {
                    (Some(a), None) => HyperfineCoupling::Isotropic(a),
                    (None, Some(t)) => HyperfineCoupling::Tensor(t),
                    _ => {
                        return Err(CliError::Config(format!(
                            "hamiltonian.hyperfine[{i}]: give exactly one of `a` or `tensor`"
                        )))
                    }
                };
                if hf.nucleus >= system.nuclei().len() {
                    return Err(CliError::Config(format!(
                        "hamiltonian.hyperfine[{i}]: nucleus index {} out of range (system has {} nuclei)",
                        hf.nucleus,
                        system.nuclei().len()
                    )));
                }
                Ok(Hyperfine { nucleus: hf.nucleus, electron: hf.electron, coupling })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let spec = HamiltonianSpec { field: h.field, g_scale: h.g_scale, hyperfine, exchange: h.exchange, delta_g: h.delta_g };

        let params = ReactionParams::new(self.reaction.k_s, self.reaction.k_t).map_err(config_err)?;
        let i = &self.integrator;
        let coherence = CoherenceConfig { epsilon: i.epsilon, tau_window: i.tau_window, tau_samples: i.tau_samples };
        let model = ReactionModel::from_spec(&system, &spec, params, coherence).map_err(config_err)?;

        let s = &self.initial_state;
        let forms = [s.name.is_some(), s.amplitudes.is_some(), s.mixture.is_some()].iter().filter(|b| **b).count();
        if forms != 1 {
            return Err(CliError::Config(
                "initial_state: give exactly one of `name`, `amplitudes` or `mixture`".into(),
            ));
        }
        let initial = if let Some(mix) = &s.mixture {
            let components = mix
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let loc = format!("initial_state.mixture[{k}]");
                    Ok((m.weight, state_from(&system, m.name.as_ref(), m.amplitudes.as_ref(), &loc)?))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let mixture = ProperMixture::new(components).map_err(config_err)?;
            if s.proper {
                InitialState::Proper(mixture)
            } else {
                InitialState::Single(mixture.summed().map_err(config_err)?)
            }
        } else {
            InitialState::Single(state_from(&system, s.name.as_ref(), s.amplitudes.as_ref(), "initial_state")?)
        };

        let integrator = IntegratorConfig {
            dt: i.dt,
            t_max: i.t_max,
            trace_floor: i.trace_floor,
            theory: i.theory,
            coherence_mode: i.coherence_mode,
        };
        integrator.validate(&model).map_err(config_err)?;

        let t = &self.trajectories;
        let trajectories = TrajectoryConfig {
            dt: t.dt,
            t_max: t.t_max.unwrap_or(i.t_max),
            n_trajectories: t.n,
            seed: t.seed,
            record_mean_state: t.compare_master,
            sample_times: if t.compare_master { t.sample_times.clone() } else { Vec::new() },
        };
        if t.enabled || t.compare_master {
            trajectories.validate(&params).map_err(config_err)?;
        }
        if self.outputs.stride == 0 {
            return Err(CliError::Config("outputs.stride must be >= 1".into()));
        }

        Ok(Problem { system, spec, model, initial, integrator, trajectories })
    }
}
