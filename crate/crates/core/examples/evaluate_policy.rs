//! Evaluate a saved checkpoint: `evaluate_policy <checkpoint> [scenario]`.

use std::path::PathBuf;

use swarmland::checkpoint::load_checkpoint;
use swarmland::config::RunConfig;
use swarmland::eval::{aggregate_named, landing_error, run_scenario, PolicyController, Scenario};

fn main() -> swarmland::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "runs/desk/policy.marl".into()));
    let name = args.next().unwrap_or_else(|| "static-floor".into());
    let ck = load_checkpoint(&path)?;
    println!("checkpoint trained for {} steps", ck.meta.total_timesteps);
    let mut policy = PolicyController::new(ck.net, ck.normalizer)?;
    let scenario = Scenario::by_name(&name, None, 1000)?;
    let records = run_scenario(&mut policy, &RunConfig::default().eval_setup(), &scenario)?;
    for r in &records {
        println!("seed {:>20}  {:?}  {:?}", r.seed, r.outcome, landing_error(r).ok());
    }
    let m = aggregate_named(&records, "policy", &name)?;
    println!("success {:.2}%  precision {:?} cm", m.success_rate, m.mean_landing_error);
    Ok(())
}
