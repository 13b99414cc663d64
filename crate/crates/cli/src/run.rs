//! Subcommand drivers.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use radpair::coherence::{p_coh, AveragedCoherence};
use radpair::ensembles::evolve_proper;
use radpair::evolvers::integrate;
use radpair::trajectories::{mean_state_vs_master, run_ensemble};
use radpair::{
    CoherenceConfig, EnsembleReport, IntegratorConfig, MasterComparison, PureEnsemble, SimulationRecord, Theory,
};

use crate::config::{emit, InitialState, Problem, RunConfig};
use crate::output::{self, RecordSummary};
use crate::plot::population_svg;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Trajectories,
    Compare,
    Coherence,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub theory: Option<Theory>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.trajectories.seed = seed;
        }
        if let Some(theory) = self.theory {
            cfg.integrator.theory = theory;
        }
    }
}

/// Files written and lines for standard output.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

fn runtime(e: radpair::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Serialize)]
struct ComponentSummary {
    weight: f64,
    #[serde(flatten)]
    record: RecordSummary,
}

fn evolve(problem: &Problem, config: &IntegratorConfig) -> Result<(SimulationRecord, Vec<ComponentSummary>), CliError> {
    match &problem.initial {
        InitialState::Single(rho) => Ok((integrate(rho, &problem.model, config).map_err(runtime)?, Vec::new())),
        InitialState::Proper(mix) => {
            let rec = evolve_proper(mix, &problem.model, config).map_err(runtime)?;
            let components = rec
                .weights
                .iter()
                .zip(&rec.components)
                .map(|(w, r)| ComponentSummary { weight: *w, record: r.into() })
                .collect();
            Ok((rec.aggregate, components))
        }
    }
}

fn with_theory(problem: &Problem, theory: Theory) -> IntegratorConfig {
    IntegratorConfig { theory, ..problem.integrator }
}

fn ensemble_start(problem: &Problem) -> Result<PureEnsemble, CliError> {
    let projectors = problem.model.projectors();
    match &problem.initial {
        InitialState::Single(rho) => PureEnsemble::from_density(rho, projectors).map_err(runtime),
        InitialState::Proper(mix) => {
            let mut parts = Vec::new();
            for (w, rho) in mix.components() {
                let pe = PureEnsemble::from_density(rho, projectors).map_err(runtime)?;
                parts.extend(pe.components().iter().map(|(v, psi)| (w * v, psi.clone())));
            }
            PureEnsemble::from_pure(parts).map_err(runtime)
        }
    }
}

#[derive(Serialize)]
struct TrajectoryJson {
    #[serde(flatten)]
    report: EnsembleReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    master_comparison: Option<MasterComparison>,
}

fn run_trajectories(problem: &Problem, compare_master: bool) -> Result<TrajectoryJson, CliError> {
    let init = ensemble_start(problem)?;
    let cfg = radpair::TrajectoryConfig { record_mean_state: false, sample_times: Vec::new(), ..problem.trajectories.clone() };
    let report = run_ensemble(&init, &problem.model, &cfg).map_err(runtime)?;
    let master_comparison = if compare_master {
        let rho = problem.initial.density()?;
        Some(mean_state_vs_master(&rho, &problem.model, &problem.trajectories).map_err(runtime)?)
    } else {
        None
    };
    Ok(TrajectoryJson { report, master_comparison })
}

fn config_echo(cfg: &RunConfig) -> serde_json::Value {
    json!({ "parsed": cfg, "toml": emit(cfg) })
}

fn target(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

fn simulate(cfg: &RunConfig, problem: &Problem, out_dir: &Path) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::default();
    let theory = problem.integrator.theory;
    let (record, components) = evolve(problem, &problem.integrator)?;

    let csv_path = target(out_dir, &cfg.outputs.csv);
    output::write_text(&csv_path, &output::record_csv(&record, cfg.outputs.stride)?)?;
    out.files.push(csv_path);

    if let Some(plot) = &cfg.outputs.plot {
        let mut records = vec![record.clone()];
        for other in [Theory::Nonlinear, Theory::Traditional] {
            if other != theory {
                records.push(evolve(problem, &with_theory(problem, other))?.0);
            }
        }
        records.sort_by_key(|r| r.theory != Theory::Nonlinear);
        let path = target(out_dir, plot);
        output::write_text(&path, &population_svg(&records.iter().collect::<Vec<_>>()))?;
        out.files.push(path);
    }

    let trajectories = if cfg.trajectories.enabled {
        Some(run_trajectories(problem, cfg.trajectories.compare_master)?)
    } else {
        None
    };

    let summary: RecordSummary = (&record).into();
    out.lines.push(format!(
        "{theory}: Y_S = {:.9}, Y_T = {:.9}, survival = {:.9}",
        summary.yield_singlet, summary.yield_triplet, summary.survival
    ));
    if let Some(t) = &trajectories {
        out.lines.push(format!(
            "trajectories: Y_S = {:.6} +- {:.6} (n = {})",
            t.report.yield_singlet, t.report.stderr_singlet, t.report.n_trajectories
        ));
    }
    let mut doc = json!({ "command": "simulate", "record": summary, "config": config_echo(cfg) });
    if !components.is_empty() {
        doc["components"] = serde_json::to_value(&components).expect("serializable");
    }
    if let Some(t) = trajectories {
        doc["trajectories"] = serde_json::to_value(&t).expect("serializable");
    }
    let json_path = target(out_dir, &cfg.outputs.json);
    output::write_json(&json_path, &doc)?;
    out.files.push(json_path);
    Ok(out)
}

fn trajectories(cfg: &RunConfig, problem: &Problem, out_dir: &Path) -> Result<RunOutput, CliError> {
    let t = run_trajectories(problem, cfg.trajectories.compare_master)?;
    let mut out = RunOutput::default();
    out.lines.push(format!(
        "Y_S = {:.6} +- {:.6}, Y_T = {:.6} +- {:.6}, survival = {:.6} (n = {}, seed = {})",
        t.report.yield_singlet,
        t.report.stderr_singlet,
        t.report.yield_triplet,
        t.report.stderr_triplet,
        t.report.survival,
        t.report.n_trajectories,
        t.report.seed
    ));
    if let Some(m) = &t.master_comparison {
        out.lines.push(format!(
            "mean state vs master equation: max |z| = {:.3}, within 3 SE: {}",
            m.max_z(),
            m.within(3.0)
        ));
    }
    let doc = json!({ "command": "trajectories", "trajectories": t, "config": config_echo(cfg) });
    let path = target(out_dir, &cfg.outputs.json);
    output::write_json(&path, &doc)?;
    out.files.push(path);
    Ok(out)
}

fn compare(cfg: &RunConfig, problem: &Problem, out_dir: &Path) -> Result<RunOutput, CliError> {
    let (a, _) = evolve(problem, &with_theory(problem, Theory::Nonlinear))?;
    let (b, _) = evolve(problem, &with_theory(problem, Theory::Traditional))?;
    let mut out = RunOutput::default();

    let csv_path = target(out_dir, &cfg.outputs.compare_csv);
    output::write_text(&csv_path, &output::compare_csv(&a, &b, cfg.outputs.stride)?)?;
    out.files.push(csv_path);

    let d = output::max_discrepancy(&a, &b);
    let names = &output::RECORD_HEADER[1..];
    let discrepancy: serde_json::Map<String, serde_json::Value> =
        names.iter().zip(d).map(|(n, v)| (n.to_string(), json!(v))).collect();
    let (sa, sb): (RecordSummary, RecordSummary) = ((&a).into(), (&b).into());
    for s in [&sa, &sb] {
        out.lines.push(format!("{}: Y_S = {:.9}, survival = {:.9}", s.theory, s.yield_singlet, s.survival));
    }
    out.lines.push(format!("max column discrepancy = {:.3e}", d.iter().fold(0.0_f64, |m, v| m.max(*v))));
    let doc = json!({
        "command": "compare",
        "kominis": sa,
        "traditional": sb,
        "max_discrepancy": discrepancy,
        "config": config_echo(cfg),
    });
    let path = target(out_dir, &cfg.outputs.json);
    output::write_json(&path, &doc)?;
    out.files.push(path);
    Ok(out)
}

fn coherence(cfg: &RunConfig, problem: &Problem, out_dir: &Path) -> Result<RunOutput, CliError> {
    let rho = problem.initial.density()?;
    let model = &problem.model;
    let ccfg: &CoherenceConfig = model.coherence_config();
    let inst = p_coh(rho.matrix(), model.projectors(), ccfg).map_err(runtime)?;
    let avg = AveragedCoherence::new(model.hamiltonian(), ccfg, model.params().sum()).map_err(runtime)?;
    let averaged = avg.evaluate(rho.matrix(), model.projectors()).map_err(runtime)?;
    let mut out = RunOutput::default();
    out.lines.push(format!("p_coh = {inst:.15}"));
    out.lines.push(format!("p_coh_averaged = {averaged:.15}"));
    let doc = json!({
        "command": "coherence",
        "p_coh": inst,
        "p_coh_averaged": averaged,
        "tau_window": avg.window(),
        "config": config_echo(cfg),
    });
    let path = target(out_dir, &cfg.outputs.json);
    output::write_json(&path, &doc)?;
    out.files.push(path);
    Ok(out)
}

/// Runs `command` on a parsed config, writing artifacts under `out_dir`.
pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    let problem = cfg.build()?;
    match command {
        Command::Simulate => simulate(cfg, &problem, out_dir),
        Command::Trajectories => trajectories(cfg, &problem, out_dir),
        Command::Compare => compare(cfg, &problem, out_dir),
        Command::Coherence => coherence(cfg, &problem, out_dir),
    }
}
