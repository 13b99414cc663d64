//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radpair::coherence::{decompose, p_coh, p_coh_averaged};
use radpair::ensembles::{evolve_improper, evolve_proper};
use radpair::evolvers::{integrate, one_step_comparison};
use radpair::magnetics::{block_decompose, build_hamiltonian};
use radpair::spin::{electron_basis, named_state};
use radpair::trajectories::{mean_state_vs_master, run_ensemble};
use radpair::{
    CoherenceConfig, DensityState, Electron, HamiltonianSpec, Hyperfine, HyperfineCoupling,
    IntegratorConfig, NamedState, NuclearSpec, ProperMixture, PureEnsemble, ReactionModel, ReactionParams,
    SpinNumber, SpinSystem, Theory, TrajectoryConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn superposition_setup() -> (SpinSystem, ReactionModel, DensityState) {
    let sys = SpinSystem::electrons_only();
    let model = ReactionModel::new(M::zeros(4, 4), sys.projectors(), ReactionParams::singlet_only(1.0)).unwrap();
    let rho = named_state(&sys, &NamedState::CoherentPlus).unwrap();
    (sys, model, rho)
}

fn one_nucleus() -> SpinSystem {
    SpinSystem::new(vec![NuclearSpec { spin: SpinNumber::HALF, electron: Electron::One }]).unwrap()
}

fn isotropic_a1() -> HamiltonianSpec {
    HamiltonianSpec {
        hyperfine: vec![Hyperfine { nucleus: 0, electron: Electron::One, coupling: HyperfineCoupling::Isotropic(1.0) }],
        ..HamiltonianSpec::default()
    }
}

fn criterion_1() -> Outcome {
    let (_, model, rho) = superposition_setup();
    let start = Instant::now();
    let kom = integrate(&rho, &model, &IntegratorConfig::new(Theory::Nonlinear, 0.005, 20.0)).unwrap();
    let trad = integrate(&rho, &model, &IntegratorConfig::new(Theory::Traditional, 0.005, 20.0)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let kom_qt = kom.last().tr_qt;
    let kom_ok = (kom_qt - 0.25).abs() <= 1e-3 && (kom.yield_singlet - 0.75).abs() <= 1e-3;
    let curve = trad.rows.iter().fold(0.0_f64, |m, r| m.max((r.tr_qs - (-r.t).exp() / 2.0).abs()));
    let trad_qt = trad.last().tr_qt;
    let trad_ok = curve <= 1e-6 && (trad_qt - 0.5).abs() <= 1e-6;
    outcome(
        kom_ok && trad_ok && elapsed < 1.0,
        format!(
            "kominis tr_QT={kom_qt:.6} Y_S={:.6} (want 0.250/0.750 +-1e-3); traditional max|tr_QS-e^-t/2|={curve:.2e} tr_QT={trad_qt:.9}; {elapsed:.3}s",
            kom.yield_singlet
        ),
    )
}

fn criterion_2() -> Outcome {
    let (_, model, rho) = superposition_setup();
    let init = PureEnsemble::from_density(&rho, model.projectors()).unwrap();
    let cfg = TrajectoryConfig { dt: 1e-3, t_max: 20.0, n_trajectories: 100_000, seed: 2024, ..TrajectoryConfig::default() };
    let start = Instant::now();
    let rep = run_ensemble(&init, &model, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let z = (rep.yield_singlet - 0.75) / rep.stderr_singlet;
    outcome(
        z.abs() <= 3.0,
        format!("Y_S={:.5} SE={:.5} z={z:.2}; {elapsed:.2}s", rep.yield_singlet, rep.stderr_singlet),
    )
}

fn criterion_3() -> Outcome {
    let times = vec![0.5, 1.0, 2.0];
    let (_, model, rho) = superposition_setup();
    let cfg = TrajectoryConfig {
        dt: 1e-3,
        t_max: 2.0,
        n_trajectories: 100_000,
        seed: 3,
        record_mean_state: true,
        sample_times: times.clone(),
    };
    let a = mean_state_vs_master(&rho, &model, &cfg).unwrap();

    let sys = one_nucleus();
    let h = build_hamiltonian(&sys, &isotropic_a1()).unwrap();
    let model8 = ReactionModel::new(h, sys.projectors(), ReactionParams::singlet_only(1.0)).unwrap();
    let rho8 = named_state(&sys, &NamedState::Singlet).unwrap();
    let cfg8 = TrajectoryConfig { n_trajectories: 20_000, seed: 4, ..cfg };
    let b = mean_state_vs_master(&rho8, &model8, &cfg8).unwrap();

    outcome(
        a.within(3.0) && b.within(3.0),
        format!(
            "4-dim max z={:.2} max dev={:.1e}; 8-dim max z={:.2} max dev={:.1e}",
            a.max_z(),
            a.max_abs_deviation(),
            b.max_z(),
            b.max_abs_deviation()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = CoherenceConfig::default();
    let mut worst_bound: f64 = 0.0;
    let mut worst_purity: f64 = 0.0;
    let mut bound_ok = true;
    for i in 0..10_000 {
        let (sys, nd) = if i % 2 == 0 { (SpinSystem::electrons_only(), 1) } else { (one_nucleus(), 2) };
        let rho = random_density(&mut rng, 4 * nd);
        let qs = singlet_projector(nd);
        let qt = triplet_projector(nd);
        let (ss, tt, st, ts) = (&qs * &rho * &qs, &qt * &rho * &qt, &qs * &rho * &qt, &qt * &rho * &qs);
        let overlap = (&st * &ts).trace().re;
        let bound = trace_re(&ss) * trace_re(&tt);
        if overlap < -1e-10 || overlap > bound + 1e-10 {
            bound_ok = false;
        }
        worst_bound = worst_bound.max(overlap - bound);
        let purity = (&rho * &rho).trace().re;
        let parts = (&ss * &ss).trace().re + (&tt * &tt).trace().re + 2.0 * overlap;
        worst_purity = worst_purity.max((purity - parts).abs());
        // The library's block split agrees with the reference one.
        let blocks = decompose(&rho, &sys.projectors()).unwrap();
        worst_purity = worst_purity.max(max_abs(&(blocks.st - &st)));
    }

    let sys = SpinSystem::electrons_only();
    let p = sys.projectors();
    let triplets = [electron_basis::triplet_plus(), electron_basis::triplet_zero(), electron_basis::triplet_minus()];
    let mut worst_pure: f64 = 0.0;
    for _ in 0..100 {
        let ab = random_unit(&mut rng, 2);
        let tw = random_unit(&mut rng, 3);
        let t = &triplets[0] * tw[0] + &triplets[1] * tw[1] + &triplets[2] * tw[2];
        let psi: DVector<_> = electron_basis::singlet() * ab[0] + t * ab[1];
        let v = p_coh(&(&psi * psi.adjoint()), &p, &cfg).unwrap();
        worst_pure = worst_pure.max((v - 1.0).abs());
    }

    let s = named_state(&sys, &NamedState::Singlet).unwrap();
    let psi = named_state(&sys, &NamedState::CoherentPlus).unwrap();
    let mix = (s.matrix() + psi.matrix()) * cx(0.5, 0.0);
    let third = p_coh(&mix, &p, &cfg).unwrap();

    let pass = bound_ok && worst_purity <= 1e-10 && worst_pure <= 1e-12 && (third - 1.0 / 3.0).abs() <= 1e-12;
    outcome(
        pass,
        format!(
            "max(overlap-bound)={worst_bound:.1e} purity identity {worst_purity:.1e}; pure p_coh dev {worst_pure:.1e}; mixing example {third:.15}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let (sys, nd) = if i % 2 == 0 { (SpinSystem::electrons_only(), 1) } else { (one_nucleus(), 2) };
        let d = 4 * nd;
        let norm = rng.random_range(0.0..10.0);
        let h = random_hermitian(&mut rng, d, norm);
        let rho = random_density(&mut rng, d);
        let params = ReactionParams::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)).unwrap();
        let model = ReactionModel::new(h.clone(), sys.projectors(), params).unwrap();
        let got = model.rhs_traditional(&rho).unwrap().drho;
        let qs = singlet_projector(nd);
        let qt = triplet_projector(nd);
        let i_ = cx(0.0, 1.0);
        let expect = -(&h * &rho - &rho * &h) * i_
            - (&qs * &rho + &rho * &qs) * cx(params.k_singlet / 2.0, 0.0)
            - (&qt * &rho + &rho * &qt) * cx(params.k_triplet / 2.0, 0.0);
        worst = worst.max(max_abs(&(got - expect)));
    }
    outcome(worst <= 1e-12, format!("max entry deviation {worst:.2e} over 1000 inputs"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let (sys, nd) = if i % 2 == 0 { (SpinSystem::electrons_only(), 1) } else { (one_nucleus(), 2) };
        let d = 4 * nd;
        let norm = rng.random_range(0.0..10.0);
        let h = random_hermitian(&mut rng, d, norm);
        let rho = random_density(&mut rng, d);
        let params = ReactionParams::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)).unwrap();
        let model = ReactionModel::new(h.clone(), sys.projectors(), params).unwrap();
        let drho = model.rhs_nonreacting(&rho).unwrap();
        let qs = singlet_projector(nd);
        let qt = triplet_projector(nd);
        let lhs = &qs * &drho * &qt + &qt * &drho * &qs;

        let hb = block_decompose(&h, &sys.projectors()).unwrap();
        let (ss, tt, st, ts) = (&qs * &rho * &qs, &qt * &rho * &qt, &qs * &rho * &qt, &qt * &rho * &qs);
        let coh = &st + &ts;
        let inner = &hb.ts * &ss - &ss * &hb.st + &hb.st * &tt - &tt * &hb.ts + &hb.ss * &st - &st * &hb.tt
            + &hb.tt * &ts
            - &ts * &hb.ss;
        let rhs = coh * cx(-params.sum() / 2.0, 0.0) - inner * cx(0.0, 1.0);
        worst = worst.max(max_abs(&(lhs - rhs)));
    }

    let sys = SpinSystem::electrons_only();
    let omega = 5.0;
    let h = build_hamiltonian(&sys, &HamiltonianSpec::delta_g_only(omega)).unwrap();
    let model = ReactionModel::new(h, sys.projectors(), ReactionParams::new(0.0, 0.0).unwrap()).unwrap();
    let rho = named_state(&sys, &NamedState::Singlet).unwrap();
    let rec = integrate(&rho, &model, &IntegratorConfig::new(Theory::Nonlinear, 1e-3, 2.0)).unwrap();
    let unitary = rec.rows.iter().fold(0.0_f64, |m, r| m.max((r.tr_qs - (omega * r.t).cos().powi(2)).abs()));

    outcome(
        worst <= 1e-10 && unitary <= 1e-6,
        format!("block identity max dev {worst:.2e}; max|<Q_S>-cos^2(wt)| = {unitary:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let sys = SpinSystem::electrons_only();
    let rho1 = named_state(&sys, &NamedState::CoherentPlus).unwrap();
    let params = ReactionParams::singlet_only(1.0);
    let coarse = one_step_comparison(1000.0, &rho1, params, 1e-4).unwrap();
    let fine = one_step_comparison(1000.0, &rho1, params, 1e-5).unwrap();
    let r_nl = coarse.nonlinear.residual / fine.nonlinear.residual;
    let r_tr = coarse.traditional.residual / fine.traditional.residual;
    let quadratic = |r: f64| (50.0..=200.0).contains(&r);
    outcome(
        quadratic(r_nl) && quadratic(r_tr),
        format!(
            "residual ratio 1e-4/1e-5: nonlinear {r_nl:.1} ({:.2e}/{:.2e}), traditional {r_tr:.1} ({:.2e}/{:.2e})",
            coarse.nonlinear.residual, fine.nonlinear.residual, coarse.traditional.residual, fine.traditional.residual
        ),
    )
}

fn criterion_8() -> Outcome {
    let (sys, model, _) = superposition_setup();
    let p = named_state(&sys, &NamedState::CoherentPlus).unwrap();
    let m = named_state(&sys, &NamedState::CoherentMinus).unwrap();
    let cfg = IntegratorConfig::new(Theory::Nonlinear, 0.005, 20.0);
    let proper = evolve_proper(&ProperMixture::new(vec![(0.5, p), (0.5, m)]).unwrap(), &model, &cfg).unwrap();
    let improper = evolve_improper(&named_state(&sys, &NamedState::MixedSt).unwrap(), &model, &cfg).unwrap();
    let sp = proper.aggregate.survival();
    let si = improper.survival();
    outcome(
        (sp - 0.25).abs() <= 2e-3 && (si - 0.5).abs() <= 1e-6,
        format!("proper survival {sp:.6} (want 0.25 +-2e-3); improper survival {si:.9} (want 0.5 +-1e-6)"),
    )
}

fn criterion_9() -> Outcome {
    let (sys, _, rho) = superposition_setup();
    let h = build_hamiltonian(&sys, &HamiltonianSpec::exchange_only(50.0)).unwrap();
    let cfg = CoherenceConfig::default();
    let averaged = p_coh_averaged(rho.matrix(), &h, &sys.projectors(), &cfg, 1.0).unwrap();
    let instantaneous = p_coh(rho.matrix(), &sys.projectors(), &cfg).unwrap();
    outcome(
        averaged <= 0.05 && (instantaneous - 1.0).abs() <= 1e-12,
        format!("averaged {averaged:.3e}, instantaneous {instantaneous:.15}"),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_drift: f64 = 0.0;
    let mut worst_eig: f64 = f64::INFINITY;
    let mut worst_sum: f64 = 0.0;
    let mut errors = Vec::new();
    for run in 0..200 {
        let (sys, nd) = if run % 4 < 2 { (SpinSystem::electrons_only(), 1) } else { (one_nucleus(), 2) };
        let d = 4 * nd;
        let norm = rng.random_range(0.0..10.0);
        let h = random_hermitian(&mut rng, d, norm);
        let params = ReactionParams::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)).unwrap();
        let rho = DensityState::new(random_density(&mut rng, d)).unwrap();
        let theory = if run % 2 == 0 { Theory::Nonlinear } else { Theory::Traditional };
        let model = ReactionModel::new(h, sys.projectors(), params).unwrap();
        match integrate(&rho, &model, &IntegratorConfig::new(theory, 1e-3, 3.0)) {
            Ok(rec) => {
                for r in &rec.rows {
                    worst_drift = worst_drift.max((r.trace + r.dns_cum + r.dnt_cum - 1.0).abs());
                }
                worst_eig = worst_eig.min(min_eig(&rec.final_state));
                let total = rec.yield_singlet + rec.yield_triplet + rec.survival();
                worst_sum = worst_sum.max((total - 1.0).abs());
            }
            Err(e) => errors.push(format!("run {run}: {e}")),
        }
    }
    outcome(
        errors.is_empty() && worst_drift < 1e-6 && worst_eig >= -1e-7 && worst_sum <= 1e-6,
        format!(
            "drift {worst_drift:.2e}, min eigenvalue {worst_eig:.2e}, |Y_S+Y_T+survival-1| {worst_sum:.2e}, errors {:?}",
            errors
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("coherent superposition populations", criterion_1),
        ("trajectory yield", criterion_2),
        ("trajectory mean vs master equation", criterion_3),
        ("coherence measure properties", criterion_4),
        ("anticommutator identity", criterion_5),
        ("coherence generation", criterion_6),
        ("one-step decomposition", criterion_7),
        ("proper vs improper mixture", criterion_8),
        ("averaged coherence suppression", criterion_9),
        ("conservation and positivity sweep", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!("{tag} {id:<13} {name}: {} [{:.2}s]", result.detail, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
