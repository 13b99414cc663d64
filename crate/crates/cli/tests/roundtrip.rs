use proptest::prelude::*;

use radpair::{CoherenceMode, Electron, Theory};
use radpair_cli::config::{HyperfineEntry, MixtureEntry, NucleusEntry};
use radpair_cli::{emit, parse_config, RunConfig};

const BASE: &str = "[reaction]\nk_s = 1.0\nk_t = 0.0\n[initial_state]\nname = \"singlet\"\n";
const NAMES: [&str; 7] = ["singlet", "triplet_0", "triplet_plus", "triplet_minus", "coherent_plus", "coherent_minus", "mixed_ST"];

fn electron(one: bool) -> Electron {
    if one { Electron::One } else { Electron::Two }
}

prop_compose! {
    fn configs()(
        k_s in 0.1..5.0f64,
        k_t in 0.0..5.0f64,
        dt_scale in 0.05..1.0f64,
        t_max in 0.0..30.0f64,
        theory in prop::sample::select(vec![Theory::Nonlinear, Theory::Traditional, Theory::NonReacting]),
        averaged in any::<bool>(),
        name in prop::sample::select(NAMES.to_vec()),
        mix in prop::option::of((0.05..0.95f64, prop::sample::select(NAMES.to_vec()), any::<bool>())),
        nucleus in prop::option::of((prop::sample::select(vec![0.5, 1.0, 1.5]), any::<bool>(), -2.0..2.0f64)),
        field in prop::array::uniform3(-1.0..1.0f64),
        exchange in -1.0..1.0f64,
        seed in any::<u64>(),
        n in 1usize..100_000,
        enabled in any::<bool>(),
        stride in 1usize..50,
        plot in any::<bool>(),
    ) -> RunConfig {
        let mut cfg = parse_config(BASE).unwrap();
        cfg.reaction.k_s = k_s;
        cfg.reaction.k_t = k_t;
        cfg.hamiltonian.field = field;
        cfg.hamiltonian.exchange = exchange;
        if let Some((spin, one, a)) = nucleus {
            cfg.system.nuclei.push(NucleusEntry { spin, electron: electron(one) });
            cfg.hamiltonian.hyperfine.push(HyperfineEntry { nucleus: 0, electron: electron(one), a: Some(a), tensor: None });
        }
        let norm = field.iter().map(|b| b.abs()).sum::<f64>() + exchange.abs() + 3.0;
        cfg.integrator.dt = dt_scale * 0.05 / (k_s + k_t).max(norm);
        cfg.integrator.t_max = t_max;
        cfg.integrator.theory = theory;
        if averaged {
            cfg.integrator.coherence_mode = CoherenceMode::Averaged;
        }
        match mix {
            Some((w, other, proper)) => {
                cfg.initial_state.name = None;
                cfg.initial_state.proper = proper;
                cfg.initial_state.mixture = Some(vec![
                    MixtureEntry { weight: w, name: Some(name.into()), amplitudes: None },
                    MixtureEntry { weight: 1.0 - w, name: Some(other.into()), amplitudes: None },
                ]);
            }
            None => cfg.initial_state.name = Some(name.into()),
        }
        cfg.trajectories.seed = seed;
        cfg.trajectories.n = n;
        cfg.trajectories.enabled = enabled;
        cfg.trajectories.t_max = Some(t_max);
        cfg.outputs.stride = stride;
        cfg.outputs.plot = plot.then(|| "populations.svg".to_string());
        cfg
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parse_of_emit_is_identity(cfg in configs()) {
        // Only valid configs are in scope.
        prop_assume!(cfg.build().is_ok());
        let text = emit(&cfg);
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
