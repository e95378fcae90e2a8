//! Potential-field + PID baseline on the static-floor scenario.

use swarmland::baseline::ApfPidController;
use swarmland::config::RunConfig;
use swarmland::eval::{aggregate_named, run_scenario, Scenario};

fn main() -> swarmland::Result<()> {
    let cfg = RunConfig::default();
    let scenario = Scenario::by_name("static-floor", Some(12), 7)?;
    let mut controller = ApfPidController::new(cfg.baseline());
    let records = run_scenario(&mut controller, &cfg.eval_setup(), &scenario)?;
    let m = aggregate_named(&records, "baseline", &scenario.name)?;
    println!(
        "success {:.2}%  precision {:?} cm  time {:?} s",
        m.success_rate, m.mean_landing_error, m.mean_landing_time
    );
    Ok(())
}
