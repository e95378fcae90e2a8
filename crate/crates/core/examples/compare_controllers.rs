//! Paired comparison of a checkpoint against the baseline:
//! `compare_controllers <checkpoint>`.

use std::path::PathBuf;

use swarmland::baseline::ApfPidController;
use swarmland::checkpoint::load_checkpoint;
use swarmland::config::RunConfig;
use swarmland::eval::{compare, PolicyController, Scenario};

fn main() -> swarmland::Result<()> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "runs/desk/policy.marl".into()));
    let cfg = RunConfig::default();
    let ck = load_checkpoint(&path)?;
    let mut policy = PolicyController::new(ck.net, ck.normalizer)?;
    let mut baseline = ApfPidController::new(cfg.baseline());
    let scenarios = vec![
        Scenario::by_name("static-floor", None, 1)?,
        Scenario::by_name("static-elevated", None, 2)?,
        Scenario::by_name("moving", None, 3)?,
    ];
    let table = compare(&mut [&mut policy, &mut baseline], &scenarios, &cfg.eval_setup())?;
    print!("{}", table.to_text());
    print!("{}", table.to_csv());
    Ok(())
}
