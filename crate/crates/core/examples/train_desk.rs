//! Desk-scale PPO training. Pass the timestep budget as the first argument
//! (default: one update) and the output directory as the second.

use std::path::PathBuf;

use swarmland::cli::train_to_dir;
use swarmland::config::RunConfig;

fn main() -> swarmland::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = RunConfig::default();
    cfg.ppo.total_timesteps = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(cfg.ppo.batch_size() as u64);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "runs/desk".into());
    let path = train_to_dir(&cfg, &out, None)?;
    print!("{}", std::fs::read_to_string(out.join("training_log.csv")).unwrap_or_default());
    println!("checkpoint: {}", path.display());
    Ok(())
}
