//! Single-molecule quantum trajectories.
//!
//! Each time step a live radical pair first may recombine (singlet with
//! probability `k_S dt <Q_S>`, triplet with `k_T dt <Q_T>`). If it survives it
//! may jump onto the singlet or triplet subspace with probabilities
//! `(k_S+k_T)/2 dt <Q_S>` and `(k_S+k_T)/2 dt <Q_T>`, and otherwise evolves
//! unitarily for `dt`. Averaging the surviving trajectories reproduces the
//! trace-preserving dephasing equation.
//!
//! Every trajectory owns a ChaCha8 stream keyed by `(seed, index)`, and
//! trajectories are reduced in fixed-size chunks in index order, so results
//! do not depend on the number of worker threads.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evolvers::{integrate, IntegratorConfig, ReactionModel, ReactionParams, Theory};
use crate::linalg::{self, c, HermitianEigen, Operator, StateVector};
use crate::spin::{DensityState, Projectors};
use crate::{Error, Result};

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Alive,
    RecombinedSinglet,
    RecombinedTriplet,
}

/// Conditional state of one molecule.
#[derive(Debug, Clone, PartialEq)]
pub enum Conditional {
    Pure(StateVector),
    Mixed(Operator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub state: Conditional,
    pub status: Status,
    pub t: f64,
}

impl TrajectoryState {
    pub fn pure(psi: StateVector) -> Self {
        Self { state: Conditional::Pure(psi), status: Status::Alive, t: 0.0 }
    }

    pub fn mixed(rho: &DensityState) -> Self {
        Self { state: Conditional::Mixed(rho.matrix().clone()), status: Status::Alive, t: 0.0 }
    }

    pub fn density(&self) -> Operator {
        match &self.state {
            Conditional::Pure(psi) => linalg::outer(psi),
            Conditional::Mixed(rho) => rho.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub t_max: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub record_mean_state: bool,
    /// Times at which the mean state is recorded; each must be a multiple of `dt`.
    pub sample_times: Vec<f64>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 20.0,
            n_trajectories: 10_000,
            seed: 0,
            record_mean_state: false,
            sample_times: Vec::new(),
        }
    }
}

impl TrajectoryConfig {
    /// Upper bound on `dt (k_S + k_T)`.
    pub const STEP_BOUND: f64 = 0.01;

    pub fn validate(&self, params: &ReactionParams) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("trajectory dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!("trajectory t_max must be >= 0, got {}", self.t_max)));
        }
        if self.n_trajectories == 0 {
            return Err(Error::Config("n_trajectories must be >= 1".into()));
        }
        let value = self.dt * params.sum();
        if value > Self::STEP_BOUND * (1.0 + 1e-12) {
            return Err(Error::StepSize { quantity: "dt*(k_S+k_T)", value, bound: Self::STEP_BOUND });
        }
        self.sample_steps()?;
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    fn sample_steps(&self) -> Result<Vec<usize>> {
        let n = self.n_steps();
        let mut steps = Vec::with_capacity(self.sample_times.len());
        for &t in &self.sample_times {
            let k = t / self.dt;
            let r = k.round();
            if !(t >= 0.0) || (k - r).abs() > 1e-6 || r as usize > n {
                return Err(Error::Config(format!(
                    "sample time {t} is not a multiple of dt = {} within [0, t_max]",
                    self.dt
                )));
            }
            steps.push(r as usize);
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sample times must be strictly increasing".into()));
        }
        Ok(steps)
    }
}

/// Event probabilities of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepProbabilities {
    pub recombine_singlet: f64,
    pub recombine_triplet: f64,
    /// Conditioned on survival.
    pub project_singlet: f64,
    /// Conditioned on survival.
    pub project_triplet: f64,
}

impl StepProbabilities {
    pub fn new(pop_singlet: f64, params: &ReactionParams, dt: f64, recombination: bool) -> Self {
        let ps = pop_singlet.clamp(0.0, 1.0);
        let pt = 1.0 - ps;
        let (rs, rt) = if recombination {
            (params.k_singlet * dt * ps, params.k_triplet * dt * pt)
        } else {
            (0.0, 0.0)
        };
        let g = params.dephasing() * dt;
        Self { recombine_singlet: rs, recombine_triplet: rt, project_singlet: g * ps, project_triplet: g * pt }
    }

    pub fn recombine(&self) -> f64 {
        self.recombine_singlet + self.recombine_triplet
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    RecombineSinglet,
    RecombineTriplet,
    ProjectSinglet,
    ProjectTriplet,
    Unitary,
}

impl StepProbabilities {
    /// Maps one uniform draw onto an event, recombination first.
    fn event(&self, u: f64) -> Event {
        let pr = self.recombine();
        if u < self.recombine_singlet {
            return Event::RecombineSinglet;
        }
        if u < pr {
            return Event::RecombineTriplet;
        }
        let v = (u - pr) / (1.0 - pr);
        if v < self.project_singlet {
            Event::ProjectSinglet
        } else if v < self.project_singlet + self.project_triplet {
            Event::ProjectTriplet
        } else {
            Event::Unitary
        }
    }
}

/// Stepping rules for one Hamiltonian, rate set and step size.
#[derive(Debug, Clone)]
pub struct Unraveling {
    hamiltonian: Operator,
    propagator: Operator,
    projectors: Projectors,
    params: ReactionParams,
    dt: f64,
    recombination: bool,
}

impl Unraveling {
    pub fn new(hamiltonian: &Operator, projectors: &Projectors, params: ReactionParams, dt: f64) -> Self {
        let propagator = HermitianEigen::new(hamiltonian).propagator(dt);
        Self {
            hamiltonian: hamiltonian.clone(),
            propagator,
            projectors: projectors.clone(),
            params,
            dt,
            recombination: true,
        }
    }

    /// Keeps the measurement jumps but never recombines.
    pub fn without_recombination(mut self) -> Self {
        self.recombination = false;
        self
    }

    pub fn probabilities(&self, pop_singlet: f64) -> StepProbabilities {
        StepProbabilities::new(pop_singlet, &self.params, self.dt, self.recombination)
    }

    fn pop_pure(&self, psi: &StateVector) -> f64 {
        (&self.projectors.singlet * psi).norm_squared()
    }

    fn project(q: &Operator, psi: &StateVector) -> StateVector {
        let v = q * psi;
        let n = v.norm();
        v / c(n)
    }

    /// Advances `state` by one step.
    pub fn step<R: Rng + ?Sized>(&self, state: &TrajectoryState, rng: &mut R) -> TrajectoryState {
        if state.status != Status::Alive {
            return state.clone();
        }
        let t = state.t + self.dt;
        let u: f64 = rng.random();
        let (pop, conditional) = match &state.state {
            Conditional::Pure(psi) => (self.pop_pure(psi), None),
            Conditional::Mixed(rho) => {
                let tr = linalg::trace_re(rho);
                (linalg::trace_product(&self.projectors.singlet, rho).re / tr, Some(rho))
            }
        };
        let event = self.probabilities(pop).event(u);
        let status = match event {
            Event::RecombineSinglet => Status::RecombinedSinglet,
            Event::RecombineTriplet => Status::RecombinedTriplet,
            _ => Status::Alive,
        };
        let next = match (&state.state, conditional) {
            (Conditional::Pure(psi), _) => Conditional::Pure(match event {
                Event::ProjectSinglet => Self::project(&self.projectors.singlet, psi),
                Event::ProjectTriplet => Self::project(&self.projectors.triplet, psi),
                Event::Unitary => &self.propagator * psi,
                _ => psi.clone(),
            }),
            (_, Some(rho)) => Conditional::Mixed(match event {
                Event::ProjectSinglet | Event::ProjectTriplet => {
                    let q = if event == Event::ProjectSinglet {
                        &self.projectors.singlet
                    } else {
                        &self.projectors.triplet
                    };
                    let r = q * rho * q;
                    let tr = linalg::trace_re(&r);
                    r * c(1.0 / tr)
                }
                Event::Unitary => &self.propagator * rho * self.propagator.adjoint(),
                _ => rho.clone(),
            }),
            (Conditional::Mixed(_), None) => unreachable!(),
        };
        TrajectoryState { state: next, status, t }
    }

    /// `psi` is an eigenvector of `H`, so unitary steps only change its phase.
    fn is_stationary(&self, psi: &StateVector) -> bool {
        let hpsi = &self.hamiltonian * psi;
        let energy = psi.dotc(&hpsi);
        (hpsi - psi * energy).norm() <= 1e-12
    }
}

/// One step of a single trajectory under `h`.
pub fn trajectory_step<R: Rng + ?Sized>(
    state: &TrajectoryState,
    h: &Operator,
    projectors: &Projectors,
    params: ReactionParams,
    dt: f64,
    rng: &mut R,
) -> TrajectoryState {
    Unraveling::new(h, projectors, params, dt).step(state, rng)
}

/// Weighted list of pure states a trajectory starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct PureEnsemble {
    components: Vec<(f64, StateVector)>,
}

impl PureEnsemble {
    pub fn from_pure(components: Vec<(f64, StateVector)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("pure ensemble needs at least one component".into()));
        }
        let dim = components[0].1.len();
        let mut total = 0.0;
        for (w, psi) in &components {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("component weight must be >= 0, got {w}")));
            }
            if psi.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: psi.len() });
            }
            let n2 = psi.norm_squared();
            if (n2 - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized(n2));
            }
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::Config("pure ensemble weights sum to zero".into()));
        }
        Ok(Self { components: components.into_iter().map(|(w, v)| (w / total, v)).collect() })
    }

    /// Spectral decomposition of `rho`. Inside degenerate eigenspaces the
    /// basis is rotated to diagonalize `Q_S`, so singlet/triplet mixtures
    /// such as `(|S><S| + |T0><T0|)/2` split into `|S>` and `|T0>`.
    pub fn from_density(rho: &DensityState, projectors: &Projectors) -> Result<Self> {
        let m = rho.matrix();
        if m.nrows() != projectors.dim() {
            return Err(Error::DimensionMismatch { expected: projectors.dim(), found: m.nrows() });
        }
        let eig = HermitianEigen::new(m);
        let n = eig.values.len();
        let mut components = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && eig.values[end] - eig.values[start] < 1e-9 {
                end += 1;
            }
            let weight = eig.values[start..end].iter().sum::<f64>() / (end - start) as f64;
            if weight > 1e-12 {
                let block = eig.vectors.columns(start, end - start).into_owned();
                let basis = if end - start > 1 {
                    let q = block.adjoint() * &projectors.singlet * &block;
                    &block * HermitianEigen::new(&q).vectors
                } else {
                    block
                };
                for col in basis.column_iter() {
                    components.push((weight, col.into_owned()));
                }
            }
            start = end;
        }
        Self::from_pure(components)
    }

    pub fn components(&self) -> &[(f64, StateVector)] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.len()
    }

    pub fn density(&self) -> Operator {
        self.components
            .iter()
            .fold(linalg::zeros(self.dim()), |acc, (w, v)| acc + linalg::outer(v) * c(*w))
    }

    fn sample(&self, u: f64) -> &StateVector {
        let mut acc = 0.0;
        for (w, v) in &self.components {
            acc += w;
            if u < acc {
                return v;
            }
        }
        &self.components.last().expect("non-empty").1
    }
}

/// Ensemble mean `Σ_alive |ψ><ψ| / N` at one time with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanState {
    pub t: f64,
    pub mean: Operator,
    pub stderr_re: DMatrix<f64>,
    pub stderr_im: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub n_trajectories: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_max: f64,
    pub singlet_count: u64,
    pub triplet_count: u64,
    pub alive_count: u64,
    pub yield_singlet: f64,
    pub yield_triplet: f64,
    pub survival: f64,
    pub stderr_singlet: f64,
    pub stderr_triplet: f64,
    pub stderr_survival: f64,
    /// Trajectories whose first step was a singlet / triplet projection.
    pub first_step_singlet_projections: u64,
    pub first_step_triplet_projections: u64,
    #[serde(skip)]
    pub mean_states: Vec<MeanState>,
}

#[derive(Debug, Clone)]
struct Tally {
    singlet: u64,
    triplet: u64,
    alive: u64,
    first_proj_s: u64,
    first_proj_t: u64,
    // [sample][entry] interleaved re, im
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Tally {
    fn new(len: usize) -> Self {
        Self {
            singlet: 0,
            triplet: 0,
            alive: 0,
            first_proj_s: 0,
            first_proj_t: 0,
            sum: vec![0.0; len],
            sumsq: vec![0.0; len],
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.singlet += other.singlet;
        self.triplet += other.triplet;
        self.alive += other.alive;
        self.first_proj_s += other.first_proj_s;
        self.first_proj_t += other.first_proj_t;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
    }

    fn record(&mut self, sample: usize, dim: usize, psi: &StateVector) {
        let base = sample * dim * dim * 2;
        for i in 0..dim {
            for j in 0..dim {
                let z: Complex64 = psi[i] * psi[j].conj();
                let k = base + 2 * (i * dim + j);
                self.sum[k] += z.re;
                self.sum[k + 1] += z.im;
                self.sumsq[k] += z.re * z.re;
                self.sumsq[k + 1] += z.im * z.im;
            }
        }
    }
}

struct Runner<'a> {
    unraveling: Unraveling,
    init: &'a PureEnsemble,
    n_steps: usize,
    samples: Vec<usize>,
    record: bool,
    seed: u64,
}

impl Runner<'_> {
    fn run_one(&self, index: u64, tally: &mut Tally) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let dim = self.init.dim();
        let mut psi = self.init.sample(rng.random()).clone();
        let mut step = 0usize;
        let mut next_sample = 0usize;
        let mut status = Status::Alive;
        let un = &self.unraveling;

        // Records the current state for every sample step <= `upto`.
        let flush = |upto: usize, psi: &StateVector, next_sample: &mut usize, tally: &mut Tally| {
            while *next_sample < self.samples.len() && self.samples[*next_sample] <= upto {
                if self.record {
                    tally.record(*next_sample, dim, psi);
                }
                *next_sample += 1;
            }
        };
        flush(0, &psi, &mut next_sample, tally);
        // U commutes with H, so only a projection can change this.
        let mut stationary = un.is_stationary(&psi);

        while step < self.n_steps {
            let pop = un.pop_pure(&psi);
            let probs = un.probabilities(pop);
            let event = if stationary {
                // Only events can change the state; jump straight to the next one.
                let mixing = pop * (1.0 - pop) > 1e-14;
                let jumps = if mixing { probs.project_singlet + probs.project_triplet } else { 0.0 };
                let p_event = probs.recombine() + (1.0 - probs.recombine()) * jumps;
                if p_event <= 0.0 {
                    break;
                }
                let u: f64 = rng.random();
                let gap = if p_event >= 1.0 {
                    0.0
                } else {
                    ((1.0 - u).ln() / (1.0 - p_event).ln()).floor()
                };
                if gap >= (self.n_steps - step) as f64 {
                    break;
                }
                step += gap as usize;
                flush(step, &psi, &mut next_sample, tally);
                step += 1;
                let v: f64 = rng.random::<f64>() * p_event;
                let rs = probs.recombine_singlet;
                let rt = probs.recombine_triplet;
                let js = (1.0 - probs.recombine()) * if mixing { probs.project_singlet } else { 0.0 };
                if v < rs {
                    Event::RecombineSinglet
                } else if v < rs + rt {
                    Event::RecombineTriplet
                } else if v < rs + rt + js {
                    Event::ProjectSinglet
                } else {
                    Event::ProjectTriplet
                }
            } else {
                step += 1;
                probs.event(rng.random())
            };

            if step == 1 {
                match event {
                    Event::ProjectSinglet => tally.first_proj_s += 1,
                    Event::ProjectTriplet => tally.first_proj_t += 1,
                    _ => {}
                }
            }
            match event {
                Event::RecombineSinglet => {
                    status = Status::RecombinedSinglet;
                    break;
                }
                Event::RecombineTriplet => {
                    status = Status::RecombinedTriplet;
                    break;
                }
                Event::ProjectSinglet => {
                    psi = Unraveling::project(&un.projectors.singlet, &psi);
                    stationary = un.is_stationary(&psi);
                }
                Event::ProjectTriplet => {
                    psi = Unraveling::project(&un.projectors.triplet, &psi);
                    stationary = un.is_stationary(&psi);
                }
                Event::Unitary => psi = &un.propagator * &psi,
            }
            flush(step, &psi, &mut next_sample, tally);
        }

        match status {
            Status::Alive => {
                flush(self.n_steps, &psi, &mut next_sample, tally);
                tally.alive += 1;
            }
            Status::RecombinedSinglet => tally.singlet += 1,
            Status::RecombinedTriplet => tally.triplet += 1,
        }
    }

    fn run(&self, n: usize) -> Tally {
        let dim = self.init.dim();
        let len = if self.record { self.samples.len() * dim * dim * 2 } else { 0 };
        let n_chunks = n.div_ceil(CHUNK);
        let partials: Vec<Tally> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut tally = Tally::new(len);
                let lo = chunk * CHUNK;
                let hi = (lo + CHUNK).min(n);
                for idx in lo..hi {
                    self.run_one(idx as u64, &mut tally);
                }
                tally
            })
            .collect();
        let mut total = Tally::new(len);
        for p in &partials {
            total.merge(p);
        }
        total
    }
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn run(init: &PureEnsemble, model: &ReactionModel, config: &TrajectoryConfig, recombination: bool) -> Result<EnsembleReport> {
    let params = model.params();
    config.validate(&params)?;
    if init.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: init.dim() });
    }
    let mut unraveling = Unraveling::new(model.hamiltonian(), model.projectors(), params, config.dt);
    if !recombination {
        unraveling = unraveling.without_recombination();
    }
    let runner = Runner {
        unraveling,
        init,
        n_steps: config.n_steps(),
        samples: config.sample_steps()?,
        record: config.record_mean_state,
        seed: config.seed,
    };
    let n = config.n_trajectories;
    let tally = runner.run(n);

    let nf = n as f64;
    let dim = init.dim();
    let mut mean_states = Vec::new();
    if config.record_mean_state {
        for (s, &t) in config.sample_times.iter().enumerate() {
            let base = s * dim * dim * 2;
            let mut mean = linalg::zeros(dim);
            let mut se_re = DMatrix::zeros(dim, dim);
            let mut se_im = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let k = base + 2 * (i * dim + j);
                    let stats = |sum: f64, sumsq: f64| {
                        let m = sum / nf;
                        let var = if n > 1 { ((sumsq - nf * m * m) / (nf - 1.0)).max(0.0) } else { 0.0 };
                        (m, (var / nf).sqrt())
                    };
                    let (re, sre) = stats(tally.sum[k], tally.sumsq[k]);
                    let (im, sim) = stats(tally.sum[k + 1], tally.sumsq[k + 1]);
                    mean[(i, j)] = Complex64::new(re, im);
                    se_re[(i, j)] = sre;
                    se_im[(i, j)] = sim;
                }
            }
            mean_states.push(MeanState { t, mean, stderr_re: se_re, stderr_im: se_im });
        }
    }

    let ys = tally.singlet as f64 / nf;
    let yt = tally.triplet as f64 / nf;
    let alive = tally.alive as f64 / nf;
    Ok(EnsembleReport {
        n_trajectories: n,
        seed: config.seed,
        dt: config.dt,
        t_max: config.t_max,
        singlet_count: tally.singlet,
        triplet_count: tally.triplet,
        alive_count: tally.alive,
        yield_singlet: ys,
        yield_triplet: yt,
        survival: alive,
        stderr_singlet: binomial_se(ys, n),
        stderr_triplet: binomial_se(yt, n),
        stderr_survival: binomial_se(alive, n),
        first_step_singlet_projections: tally.first_proj_s,
        first_step_triplet_projections: tally.first_proj_t,
        mean_states,
    })
}

/// Runs `config.n_trajectories` independent molecules drawn from `init`.
pub fn run_ensemble(init: &PureEnsemble, model: &ReactionModel, config: &TrajectoryConfig) -> Result<EnsembleReport> {
    run(init, model, config, true)
}

/// Deviation of the recombination-free trajectory mean from the
/// non-reacting master equation at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeComparison {
    pub t: f64,
    pub max_abs_deviation: f64,
    /// Largest `|deviation| / SE` over entries with nonzero SE that deviate
    /// by more than `ABS_SLACK`.
    pub max_z: f64,
    /// Largest deviation over entries whose sample variance is zero.
    pub max_deterministic_deviation: f64,
    /// Entries with `|deviation| > k SE + ABS_SLACK` at `k = 3`.
    pub entries_outside_3se: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MasterComparison {
    pub times: Vec<TimeComparison>,
    #[serde(skip)]
    pub trajectory_means: Vec<MeanState>,
    #[serde(skip)]
    pub master_states: Vec<Operator>,
}

impl MasterComparison {
    /// Absolute allowance for entries with zero sampling variance, covering
    /// the deterministic integration error of the reference solution.
    pub const ABS_SLACK: f64 = 1e-8;

    pub fn max_z(&self) -> f64 {
        self.times.iter().fold(0.0, |m, t| m.max(t.max_z))
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.times.iter().fold(0.0, |m, t| m.max(t.max_abs_deviation))
    }

    /// Every entry agrees within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.trajectory_means.iter().zip(&self.master_states).all(|(ms, master)| {
            count_outside(ms, master, k) == 0
        })
    }
}

fn count_outside(ms: &MeanState, master: &Operator, k: f64) -> usize {
    let mut count = 0;
    for (idx, (a, b)) in ms.mean.iter().zip(master.iter()).enumerate() {
        let d = a - b;
        if d.re.abs() > k * ms.stderr_re[idx] + MasterComparison::ABS_SLACK {
            count += 1;
        }
        if d.im.abs() > k * ms.stderr_im[idx] + MasterComparison::ABS_SLACK {
            count += 1;
        }
    }
    count
}

/// Compares the recombination-free trajectory average against the
/// non-reacting master equation at `config.sample_times`.
pub fn mean_state_vs_master(
    rho0: &DensityState,
    model: &ReactionModel,
    config: &TrajectoryConfig,
) -> Result<MasterComparison> {
    if !config.record_mean_state || config.sample_times.is_empty() {
        return Err(Error::Config("mean-state comparison needs record_mean_state and sample_times".into()));
    }
    let init = PureEnsemble::from_density(rho0, model.projectors())?;
    let report = run(&init, model, config, false)?;

    // Master-equation grid: an integer refinement of the trajectory step that
    // satisfies the integrator bound.
    let scale = model.params().sum().max(model.hamiltonian_norm());
    let refine = if scale > 0.0 {
        (config.dt * scale / IntegratorConfig::STEP_BOUND).ceil().max(1.0) as usize
    } else {
        1
    };
    let dt = config.dt / refine as f64;
    let t_end = config.sample_times.last().copied().unwrap_or(0.0);
    let icfg = IntegratorConfig { dt, t_max: t_end, theory: Theory::NonReacting, ..IntegratorConfig::default() };
    let master = integrate_states(rho0, model, &icfg)?;

    let mut times = Vec::new();
    let mut master_states = Vec::new();
    for ms in &report.mean_states {
        let idx = (ms.t / dt).round() as usize;
        let reference = master[idx.min(master.len() - 1)].clone();
        let mut max_dev: f64 = 0.0;
        let mut max_z: f64 = 0.0;
        let mut max_det: f64 = 0.0;
        for (k, (a, b)) in ms.mean.iter().zip(reference.iter()).enumerate() {
            let d = a - b;
            for (dev, se) in [(d.re.abs(), ms.stderr_re[k]), (d.im.abs(), ms.stderr_im[k])] {
                max_dev = max_dev.max(dev);
                if dev <= MasterComparison::ABS_SLACK {
                    continue;
                }
                if se > 0.0 {
                    max_z = max_z.max(dev / se);
                } else {
                    max_det = max_det.max(dev);
                }
            }
        }
        times.push(TimeComparison {
            t: ms.t,
            max_abs_deviation: max_dev,
            max_z,
            max_deterministic_deviation: max_det,
            entries_outside_3se: count_outside(ms, &reference, 3.0),
        });
        master_states.push(reference);
    }
    Ok(MasterComparison { times, trajectory_means: report.mean_states, master_states })
}

/// Density matrix after every step of a non-reacting integration.
fn integrate_states(rho0: &DensityState, model: &ReactionModel, config: &IntegratorConfig) -> Result<Vec<Operator>> {
    config.validate(model)?;
    let mut rho = rho0.matrix().clone();
    let n = (config.t_max / config.dt - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    out.push(rho.clone());
    for _ in 0..n {
        let (next, _, _) = model.rk4_step(config.theory, config.coherence_mode, &rho, config.dt, 0.0)?;
        rho = linalg::hermitian_part(&next);
        out.push(rho.clone());
    }
    // Cross-check the final state against the full integrator's record.
    let rec = integrate(rho0, model, config)?;
    debug_assert!(linalg::max_abs_diff(&rec.final_state, &rho) < 1e-12);
    Ok(out)
}
