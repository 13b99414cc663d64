use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use radpair::coherence::p_coh;
use radpair::evolvers::integrate;
use radpair::magnetics::build_hamiltonian;
use radpair::spin::named_state;
use radpair::trajectories::run_ensemble;
use radpair::{
    CoherenceConfig, CoherenceMode, Electron, HamiltonianSpec, Hyperfine, HyperfineCoupling, IntegratorConfig,
    NamedState, NuclearSpec, PureEnsemble, ReactionModel, ReactionParams, SpinNumber, SpinSystem, Theory,
    TrajectoryConfig,
};

/// Two electrons and `n` spin-1/2 nuclei on electron 1, in a weak field.
fn system(n: usize) -> (SpinSystem, ReactionModel) {
    let sys = SpinSystem::new((0..n).map(|_| NuclearSpec { spin: SpinNumber::HALF, electron: Electron::One }).collect())
        .unwrap();
    let spec = HamiltonianSpec {
        field: [0.0, 0.0, 0.3],
        hyperfine: (0..n)
            .map(|k| Hyperfine {
                nucleus: k,
                electron: Electron::One,
                coupling: HyperfineCoupling::Isotropic(1.0 / (k + 1) as f64),
            })
            .collect(),
        ..HamiltonianSpec::default()
    };
    let model = ReactionModel::from_spec(&sys, &spec, ReactionParams::new(1.0, 0.2).unwrap(), CoherenceConfig::default())
        .unwrap();
    (sys, model)
}

fn kernels(c: &mut Criterion) {
    for n in [0usize, 1, 3] {
        let (sys, model) = system(n);
        let dim = sys.total_dim();
        let rho = named_state(&sys, &NamedState::CoherentPlus).unwrap();
        let m = rho.matrix();

        c.bench_function(&format!("build_hamiltonian/dim{dim}"), |b| {
            let spec = HamiltonianSpec { field: [0.1, 0.0, 0.3], ..HamiltonianSpec::default() };
            b.iter(|| build_hamiltonian(black_box(&sys), &spec).unwrap())
        });
        c.bench_function(&format!("p_coh/dim{dim}"), |b| {
            b.iter(|| p_coh(black_box(m), model.projectors(), model.coherence_config()).unwrap())
        });
        for theory in [Theory::Nonlinear, Theory::Traditional] {
            c.bench_function(&format!("rhs_{theory}/dim{dim}"), |b| {
                b.iter(|| model.derivative(theory, CoherenceMode::Instantaneous, black_box(m), 1e-12).unwrap())
            });
            c.bench_function(&format!("rk4_step_{theory}/dim{dim}"), |b| {
                b.iter(|| model.rk4_step(theory, CoherenceMode::Instantaneous, black_box(m), 0.005, 1e-12).unwrap())
            });
        }
    }
}

fn runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("runs");
    g.sample_size(10);

    let sys = SpinSystem::electrons_only();
    let model = ReactionModel::new(radpair::linalg::zeros(4), sys.projectors(), ReactionParams::singlet_only(1.0)).unwrap();
    let rho = named_state(&sys, &NamedState::CoherentPlus).unwrap();
    g.bench_function("integrate_coherent_superposition_t20", |b| {
        b.iter(|| integrate(&rho, &model, &IntegratorConfig::new(Theory::Nonlinear, 0.005, 20.0)).unwrap())
    });

    let (sys, model) = system(1);
    let rho = named_state(&sys, &NamedState::Singlet).unwrap();
    let init = PureEnsemble::from_density(&rho, model.projectors()).unwrap();
    g.bench_function("trajectories_dim8_n1000_t2", |b| {
        b.iter_batched(
            || TrajectoryConfig { n_trajectories: 1000, t_max: 2.0, seed: 1, ..TrajectoryConfig::default() },
            |cfg| run_ensemble(&init, &model, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, kernels, runs);
criterion_main!(benches);
