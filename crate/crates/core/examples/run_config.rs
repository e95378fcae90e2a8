//! Print the effective run configuration, after `MARL_*` overrides, and its
//! hash.

use swarmland::config::RunConfig;

fn main() -> swarmland::Result<()> {
    let cfg = RunConfig::default().with_overrides(std::env::vars())?;
    print!("{}", cfg.to_text());
    println!("# hash {}", cfg.hash());
    Ok(())
}
