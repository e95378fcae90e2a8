//! Reset the landing environment and fly both drones straight at their pads.

use swarmland::env::{EnvConfig, JointAction, LandingEnv, PlatformSpec};
use swarmland::sim::{SimParams, Vec3};

fn main() -> swarmland::Result<()> {
    let sim = SimParams {
        world_half_extent: 1.0,
        ..Default::default()
    };
    let mut env = LandingEnv::new(EnvConfig::default(), sim, PlatformSpec::StaticFloor)?;
    let obs = env.reset(42)?;
    println!("observation ({} values): {:?}", obs.len(), &obs.as_slice()[..13]);

    let mut total = 0.0;
    loop {
        let cmds: Vec<Vec3> = env
            .drones()
            .iter()
            .zip(env.pads())
            .map(|(d, pad)| (pad - d.position) * (1.0 / sim.v_max))
            .collect();
        let res = env.step(&JointAction::from_commands(&cmds))?;
        total += res.reward;
        if res.terminated || res.truncated {
            println!(
                "step {}: landed {:?}, collision {}, return {total:.3}",
                env.step_index(),
                res.info.landed,
                res.info.collision
            );
            break;
        }
    }
    Ok(())
}
