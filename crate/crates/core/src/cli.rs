//! Command-line front end shared by the `swarmland` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baseline::ApfPidController;
use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, PolicyCheckpoint};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_named, compare, run_scenario, trajectory_csv, Comparison, Controller, EpisodeRecord,
    PolicyController, Scenario,
};
use crate::io::{read, write_atomic};
use crate::ppo::{Trainer, TrainerState};

#[derive(Debug, Parser)]
#[command(name = "swarmland", version, about = "Two-drone cooperative landing: train, evaluate, compare")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy with PPO.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the baseline) on a scenario.
    Eval(EvalArgs),
    /// Evaluate the potential-field + PID baseline.
    Baseline(ScenarioArgs),
    /// Evaluate a checkpoint and the baseline on paired seeds.
    Compare(CompareArgs),
    /// Convert an episode record into trajectory CSV.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// static-floor, static-elevated, moving, moving-<speed> or linear-<speed>.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    Policy,
    Baseline,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ControllerKind::Policy)]
    pub controller: ControllerKind,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated list of scenarios.
    #[arg(long)]
    pub scenarios: Option<String>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub record: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub const POLICY_FILE: &str = "policy.marl";
pub const LOG_FILE: &str = "training_log.csv";
pub const CONFIG_FILE: &str = "config.txt";

/// Resume sidecar written next to every checkpoint.
pub fn state_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("state")
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::default().with_overrides(std::env::vars()),
    }
}

fn save_with_state(trainer: &Trainer, cfg: &RunConfig, path: &Path) -> Result<()> {
    let meta = CheckpointMeta {
        seed: cfg.ppo.seed,
        total_timesteps: trainer.timestep(),
        config_hash: cfg.hash(),
    };
    save_checkpoint(trainer.net(), trainer.normalizer(), &meta, path)?;
    write_atomic(&state_path(path), &trainer.state().to_bytes()?)
}

/// Trains under `cfg`, writing checkpoints, the log and the effective
/// config into `out`. Returns the final checkpoint path.
pub fn train_to_dir(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<PathBuf> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    let mut trainer = match resume {
        Some(ck) => {
            let PolicyCheckpoint { net, .. } = load_checkpoint(ck)?;
            let state = TrainerState::from_bytes(&read(&state_path(ck))?)?;
            let mut t = Trainer::resume(net, state)?;
            t.set_total_timesteps(cfg.ppo.total_timesteps);
            t
        }
        None => Trainer::new(cfg.train_setup()?)?,
    };
    let interval = cfg.ppo.checkpoint_interval;
    let log_path = out.join(LOG_FILE);
    trainer.train_with(|t, rec| {
        t.log().write_csv(&log_path)?;
        if interval > 0 && t.iteration() % interval as u64 == 0 && !t.is_done() {
            let path = out.join(format!("checkpoint_{:010}.marl", rec.timestep));
            save_with_state(t, cfg, &path)?;
        }
        Ok(())
    })?;
    trainer.log().write_csv(&log_path)?;
    let path = out.join(POLICY_FILE);
    save_with_state(&trainer, cfg, &path)?;
    Ok(path)
}

fn resolve_scenario(cfg: &RunConfig, args: &ScenarioArgs, name: Option<&str>) -> Result<Scenario> {
    let name = name
        .or(args.scenario.as_deref())
        .unwrap_or(&cfg.eval.scenario)
        .to_string();
    let episodes = args
        .episodes
        .or((cfg.eval.episodes > 0).then_some(cfg.eval.episodes));
    Scenario::by_name(&name, episodes, args.seed.unwrap_or(cfg.eval.seed))
}

fn policy(path: &Path) -> Result<PolicyController> {
    let ck = load_checkpoint(path)?;
    PolicyController::new(ck.net, ck.normalizer)
}

fn write_records(out: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let dir = out.join("records");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (k, r) in records.iter().enumerate() {
        write_atomic(&dir.join(format!("episode_{k:04}.json")), &serde_json::to_vec(r)?)?;
    }
    Ok(())
}

fn write_report(out: &Path, table: &Comparison) -> Result<()> {
    write_atomic(&out.join("metrics.csv"), table.to_csv().as_bytes())?;
    write_atomic(&out.join("metrics.txt"), table.to_text().as_bytes())?;
    print!("{}", table.to_text());
    Ok(())
}

fn evaluate(controller: &mut dyn Controller, args: &ScenarioArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let scenario = resolve_scenario(&cfg, args, None)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let records = run_scenario(controller, &cfg.eval_setup(), &scenario)?;
    write_records(&args.out, &records)?;
    let report = aggregate_named(&records, controller.name(), &scenario.name)?;
    write_atomic(&args.out.join("report.json"), &serde_json::to_vec_pretty(&report)?)?;
    write_report(&args.out, &Comparison { rows: vec![report] })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => {
            let cfg = load_config(a.config.as_deref())?;
            let path = train_to_dir(&cfg, &a.out, a.resume.as_deref())?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Eval(a) => match a.controller {
            ControllerKind::Policy => {
                let ck = a.checkpoint.as_deref().ok_or_else(|| {
                    Error::Config("--checkpoint is required for the policy controller".into())
                })?;
                evaluate(&mut policy(ck)?, &a.scenario)
            }
            ControllerKind::Baseline => {
                let cfg = load_config(a.scenario.config.as_deref())?;
                evaluate(&mut ApfPidController::new(cfg.baseline()), &a.scenario)
            }
        },
        Command::Baseline(a) => {
            let cfg = load_config(a.config.as_deref())?;
            evaluate(&mut ApfPidController::new(cfg.baseline()), &a)
        }
        Command::Compare(a) => {
            let cfg = load_config(a.scenario.config.as_deref())?;
            let names: Vec<Option<String>> = match &a.scenarios {
                Some(list) => list.split(',').map(|s| Some(s.trim().to_string())).collect(),
                None => vec![None],
            };
            let scenarios = names
                .iter()
                .map(|n| resolve_scenario(&cfg, &a.scenario, n.as_deref()))
                .collect::<Result<Vec<_>>>()?;
            let mut p = policy(&a.checkpoint)?;
            let mut b = ApfPidController::new(cfg.baseline());
            let table = compare(&mut [&mut p, &mut b], &scenarios, &cfg.eval_setup())?;
            fs::create_dir_all(&a.scenario.out).map_err(|e| Error::io(&a.scenario.out, e))?;
            write_report(&a.scenario.out, &table)
        }
        Command::Plotdata(a) => {
            let record: EpisodeRecord = serde_json::from_slice(&read(&a.record)?)?;
            write_atomic(&a.out, trajectory_csv(&record).as_bytes())
        }
    }
}
