//! One function per subcommand. Each writes its artifacts through a
//! [`RunDir`] and returns the sealed manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use regswap::ansatz::{
    depth_sweep, init_seed, instance_seed, prepare_instance, run_vqe, SweepAggregate,
};
use regswap::dnc::{readout_for, run_dnc_spsa, DncConfig, SubsystemPartition, Variant};
use regswap::encoding::{ReducedEncoding, StateClass};
use regswap::hamiltonian::{build_hamiltonian, default_penalty, write_pauli_csv, PAULI_EPS};
use regswap::instances::{generate_instance_with, solve_exact, InstanceFixture, TspInstance};
use regswap::mitigation::{perturbed_calibration_trial, CalibrationRecord, TrialOutcome};
use regswap::rng::derive_seed;
use regswap::Execution;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{read_csv, RunDir, RunManifest};

const TAG_DNC: u64 = 11;
const TAG_MITIGATION: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    GenInstances,
    SolveExact,
    RunVqe,
    SweepDepth,
    RunDnc,
    MitigationStudy,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenInstances => "gen-instances",
            Command::SolveExact => "solve-exact",
            Command::RunVqe => "run-vqe",
            Command::SweepDepth => "sweep-depth",
            Command::RunDnc => "run-dnc",
            Command::MitigationStudy => "mitigation-study",
            Command::Report => "report",
        }
    }
}

/// Validates `cfg`, runs `cmd` into `out`, and writes its manifest.
pub fn run(
    cmd: Command,
    cfg: &ExperimentConfig,
    out: &Path,
    exec: Execution,
) -> Result<RunManifest> {
    cfg.validate()?;
    let mut dir = RunDir::create(out, &cfg.hash())?;
    dir.write_json(&format!("config_{}.json", cmd.name()), cfg)?;
    match cmd {
        Command::GenInstances => gen_instances(cfg, &mut dir)?,
        Command::SolveExact => solve_exact_cmd(cfg, &mut dir)?,
        Command::RunVqe => run_vqe_cmd(cfg, &mut dir, exec)?,
        Command::SweepDepth => sweep_depth(cfg, &mut dir, exec)?,
        Command::RunDnc => run_dnc(cfg, &mut dir, exec)?,
        Command::MitigationStudy => mitigation_study(cfg, &mut dir, exec)?,
        Command::Report => report(cfg, &mut dir)?,
    }
    dir.finish(cmd.name())
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn tour_string(tour: &[usize]) -> String {
    tour.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

fn tours_string(tours: &[Vec<usize>]) -> String {
    tours
        .iter()
        .map(|t| tour_string(t))
        .collect::<Vec<_>>()
        .join("|")
}

/// Instance `index` for `n` cities under the configured root seed.
pub fn sweep_instance(cfg: &ExperimentConfig, n: usize, index: usize) -> Result<TspInstance> {
    Ok(generate_instance_with(
        n,
        instance_seed(cfg.root_seed, n, index),
        cfg.weight_range,
        cfg.weight_kind,
    )?)
}

fn all_instances(cfg: &ExperimentConfig) -> Result<Vec<(usize, TspInstance)>> {
    let ns: BTreeSet<usize> = cfg.cases.iter().map(|c| c.n).collect();
    let mut out = Vec::new();
    for n in ns {
        for idx in 0..cfg.instances {
            out.push((idx, sweep_instance(cfg, n, idx)?));
        }
    }
    Ok(out)
}

fn gen_instances(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let mut rows = Vec::new();
    for (idx, inst) in all_instances(cfg)? {
        let n = inst.n();
        let sol = solve_exact(&inst)?;
        let fixture = InstanceFixture::new(&inst, &sol);
        dir.write_text(
            &format!("instances/n{n}_i{idx}.json"),
            &(fixture.to_json()? + "\n"),
        )?;
        let enc = ReducedEncoding::new(n)?;
        let lam = default_penalty(&inst);
        let h = build_hamiltonian(&inst, &enc, lam, lam)?;
        let mut pauli = format!("# config_hash={}\n", dir.config_hash()).into_bytes();
        write_pauli_csv(&mut pauli, &h.expand_pauli(PAULI_EPS))?;
        dir.write_text(
            &format!("instances/n{n}_i{idx}_pauli.csv"),
            &String::from_utf8(pauli)?,
        )?;
        rows.push(vec![
            n.to_string(),
            idx.to_string(),
            inst.seed().to_string(),
            f(sol.optimal_length),
            tours_string(&sol.optimal_tours),
            f(lam),
        ]);
    }
    dir.write_csv(
        "instances.csv",
        &[
            "n",
            "index",
            "seed",
            "optimal_length",
            "optimal_tours",
            "penalty",
        ],
        rows,
    )?;
    Ok(())
}

/// Whether the exhaustive ground states of the penalized Hamiltonian are
/// exactly the encodings of the optimal tours.
pub fn ground_states_match(inst: &TspInstance) -> Result<(f64, bool)> {
    let enc = ReducedEncoding::new(inst.n())?;
    let lam = default_penalty(inst);
    let h = build_hamiltonian(inst, &enc, lam, lam)?;
    let (energy, states) = h.ground_states()?;
    let sol = solve_exact(inst)?;
    let mut found = BTreeSet::new();
    for s in states {
        match enc.classify_state(s) {
            StateClass::Feasible(t) => {
                found.insert(t.to_full_tour());
            }
            _ => return Ok((energy, false)),
        }
    }
    let expected: BTreeSet<Vec<usize>> = sol.optimal_tours.iter().cloned().collect();
    Ok((energy, found == expected))
}

fn solve_exact_cmd(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let mut rows = Vec::new();
    for (idx, inst) in all_instances(cfg)? {
        let sol = solve_exact(&inst)?;
        let (ground, ok) = ground_states_match(&inst)?;
        if !ok {
            warn!(
                "n={} index={idx}: ground states differ from optimal tours",
                inst.n()
            );
        }
        rows.push(vec![
            inst.n().to_string(),
            idx.to_string(),
            inst.seed().to_string(),
            f(sol.optimal_length),
            tours_string(&sol.optimal_tours),
            f(ground),
            ok.to_string(),
        ]);
    }
    dir.write_csv(
        "solutions.csv",
        &[
            "n",
            "index",
            "seed",
            "optimal_length",
            "optimal_tours",
            "ground_energy",
            "ground_states_match",
        ],
        rows,
    )?;
    Ok(())
}

fn run_vqe_cmd(cfg: &ExperimentConfig, dir: &mut RunDir, exec: Execution) -> Result<()> {
    let sec = &cfg.run_vqe;
    let inst = sweep_instance(cfg, sec.n, sec.instance_index)?;
    let prepared = prepare_instance(inst, cfg.vqe.order)?;
    let inits: Vec<usize> = (0..cfg.inits).collect();
    let results = exec
        .map(&inits, |&i| {
            let seed = init_seed(cfg.root_seed, sec.n, sec.instance_index, sec.layers, i);
            run_vqe(
                &prepared.ansatz,
                sec.layers,
                seed,
                &cfg.vqe,
                &prepared.exact,
            )
            .map(|r| (seed, r))
        })
        .into_iter()
        .collect::<regswap::Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    let mut traces = Vec::new();
    for (i, (seed, r)) in results.iter().enumerate() {
        runs.push(vec![
            sec.n.to_string(),
            sec.layers.to_string(),
            prepared.instance.seed().to_string(),
            seed.to_string(),
            r.success.to_string(),
            f(r.final_energy),
            tour_string(&r.best_tour.to_full_tour()),
            f(r.best_probability),
            r.tied.len().to_string(),
        ]);
        for (it, e) in r.energy_trace.iter().enumerate() {
            traces.push(vec![i.to_string(), it.to_string(), f(*e)]);
        }
    }
    dir.write_csv(
        "vqe_runs.csv",
        &[
            "n",
            "L",
            "instance_seed",
            "init_seed",
            "success",
            "final_energy",
            "best_tour",
            "best_probability",
            "tied",
        ],
        runs,
    )?;
    dir.write_csv("vqe_traces.csv", &["init", "iteration", "energy"], traces)?;
    Ok(())
}

fn sweep_depth(cfg: &ExperimentConfig, dir: &mut RunDir, exec: Execution) -> Result<()> {
    let result = depth_sweep(&cfg.sweep(), exec)?;
    dir.write_csv(
        "sweep_runs.csv",
        &[
            "n",
            "L",
            "instance_seed",
            "init_seed",
            "success",
            "final_energy",
            "iterations",
        ],
        result.runs.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.layers.to_string(),
                r.instance_seed.to_string(),
                r.init_seed.to_string(),
                r.success.to_string(),
                f(r.final_energy),
                r.iterations.to_string(),
            ]
        }),
    )?;
    dir.write_csv(
        "sweep_aggregate.csv",
        &["n", "L", "mean", "min", "max"],
        result.aggregates.iter().map(|a| {
            vec![
                a.n.to_string(),
                a.layers.to_string(),
                f(a.mean),
                f(a.min),
                f(a.max),
            ]
        }),
    )?;
    dir.write_json("sweep_aggregate.json", &result.aggregates)?;
    for a in &result.aggregates {
        info!(
            "n={} L={}: mean {:.3} min {:.3} max {:.3}",
            a.n, a.layers, a.mean, a.min, a.max
        );
    }
    Ok(())
}

/// Optimizer seed for divide-and-conquer run `index`.
pub fn dnc_seed(root: u64, index: u64) -> u64 {
    derive_seed(root, &[TAG_DNC, index])
}

/// The configured fixture, or instance 0 for `dnc.n` under the root seed.
pub fn dnc_instance(cfg: &ExperimentConfig) -> Result<TspInstance> {
    match &cfg.dnc.instance {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading fixture {}", path.display()))?;
            let fixture = InstanceFixture::from_json(&text)?;
            let inst = fixture.instance()?;
            let sol = solve_exact(&inst)?;
            if (sol.optimal_length - fixture.optimal_length).abs() > 1e-9 * sol.optimal_length {
                bail!("fixture {} records a stale optimal length", path.display());
            }
            Ok(inst)
        }
        None => sweep_instance(cfg, cfg.dnc.n, 0),
    }
}

fn run_dnc(cfg: &ExperimentConfig, dir: &mut RunDir, exec: Execution) -> Result<()> {
    let inst = dnc_instance(cfg)?;
    let enc = ReducedEncoding::new(inst.n())?;
    let lam = default_penalty(&inst) * cfg.dnc.penalty_scale;
    let h = build_hamiltonian(&inst, &enc, lam, lam)?;
    let part = SubsystemPartition::per_register(&enc);
    let opt = DncConfig {
        seed: dnc_seed(cfg.root_seed, cfg.dnc.seed_index),
        ..cfg.dnc.optimizer
    };
    let traces = run_dnc_spsa(&inst, &enc, &h, &part, &opt, exec)?;
    let mut summary = Vec::new();
    for t in &traces {
        dir.write_csv(
            &format!("dnc_trace_{}.csv", t.variant),
            &["iteration", "variant", "loss", "target_prob"],
            t.loss
                .iter()
                .zip(&t.target_probability)
                .enumerate()
                .map(|(k, (l, p))| vec![k.to_string(), t.variant.to_string(), f(*l), f(*p)]),
        )?;
        summary.push(vec![
            t.variant.to_string(),
            t.final_loss().map(f).unwrap_or_default(),
            t.final_target_probability().map(f).unwrap_or_default(),
        ]);
    }
    dir.write_csv(
        "dnc_summary.csv",
        &["variant", "final_loss", "final_target_probability"],
        summary,
    )?;
    if let Some(readout) = readout_for(&part, Variant::Ibu, &opt)? {
        let records: Vec<CalibrationRecord> = readout
            .calibration
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(g, m)| {
                CalibrationRecord::new(
                    m,
                    opt.calibration_shots,
                    regswap::dnc::calibration_seed(opt.seed, g),
                )
            })
            .collect();
        dir.write_json("dnc_calibration.json", &records)?;
    }
    let sol = solve_exact(&inst)?;
    dir.write_text(
        "dnc_instance.json",
        &(InstanceFixture::new(&inst, &sol).to_json()? + "\n"),
    )?;
    Ok(())
}

/// Trial `t` of the perturbed-calibration study.
pub fn mitigation_trials(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<TrialOutcome>> {
    let trials: Vec<u64> = (0..cfg.mitigation.trials as u64).collect();
    Ok(exec
        .map(&trials, |&t| {
            perturbed_calibration_trial(
                &cfg.mitigation.study,
                derive_seed(cfg.root_seed, &[TAG_MITIGATION, t]),
            )
        })
        .into_iter()
        .collect::<regswap::Result<_>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct StudySummary {
    trials: usize,
    ibu_wins: usize,
    ibu_win_fraction: f64,
    mean_tv_ibu: f64,
    mean_tv_inversion: f64,
}

fn mitigation_study(cfg: &ExperimentConfig, dir: &mut RunDir, exec: Execution) -> Result<()> {
    let outcomes = mitigation_trials(cfg, exec)?;
    dir.write_csv(
        "mitigation_trials.csv",
        &["trial", "tv_ibu", "tv_inversion", "ibu_wins"],
        outcomes.iter().enumerate().map(|(t, o)| {
            vec![
                t.to_string(),
                f(o.tv_ibu),
                f(o.tv_inversion),
                o.ibu_wins().to_string(),
            ]
        }),
    )?;
    let n = outcomes.len();
    let wins = outcomes.iter().filter(|o| o.ibu_wins()).count();
    dir.write_json(
        "mitigation_summary.json",
        &StudySummary {
            trials: n,
            ibu_wins: wins,
            ibu_win_fraction: wins as f64 / n as f64,
            mean_tv_ibu: outcomes.iter().map(|o| o.tv_ibu).sum::<f64>() / n as f64,
            mean_tv_inversion: outcomes.iter().map(|o| o.tv_inversion).sum::<f64>() / n as f64,
        },
    )?;
    Ok(())
}

fn report(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let inputs: Vec<PathBuf> = if cfg.report.inputs.is_empty() {
        vec![dir.root().to_path_buf()]
    } else {
        cfg.report.inputs.clone()
    };
    let mut sweep_rows = Vec::new();
    let mut dnc_rows = Vec::new();
    for input in &inputs {
        if !input.is_dir() {
            bail!("report input {} is not a directory", input.display());
        }
        let agg = input.join("sweep_aggregate.json");
        if agg.exists() {
            let text = fs::read_to_string(&agg)?;
            let aggregates: Vec<SweepAggregate> = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", agg.display()))?;
            for a in aggregates {
                for (stat, v) in [("mean", a.mean), ("min", a.min), ("max", a.max)] {
                    sweep_rows.push(vec![
                        a.n.to_string(),
                        a.layers.to_string(),
                        stat.into(),
                        f(v),
                    ]);
                }
            }
        }
        for v in Variant::ALL {
            let path = input.join(format!("dnc_trace_{v}.csv"));
            if !path.exists() {
                continue;
            }
            let (header, rows) = read_csv(&path)?;
            if header != ["iteration", "variant", "loss", "target_prob"] {
                bail!("unexpected columns in {}", path.display());
            }
            for row in rows {
                for (metric, col) in [("loss", 2), ("target_prob", 3)] {
                    dnc_rows.push(vec![
                        row[0].clone(),
                        row[1].clone(),
                        metric.into(),
                        row[col].clone(),
                    ]);
                }
            }
        }
    }
    if sweep_rows.is_empty() && dnc_rows.is_empty() {
        bail!("no sweep or divide-and-conquer outputs found in the report inputs");
    }
    if !sweep_rows.is_empty() {
        dir.write_csv("report_sweep.csv", &["n", "L", "stat", "value"], sweep_rows)?;
    }
    if !dnc_rows.is_empty() {
        dir.write_csv(
            "report_dnc.csv",
            &["iteration", "variant", "metric", "value"],
            dnc_rows,
        )?;
    }
    Ok(())
}
