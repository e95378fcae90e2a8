//! Scenario runner, episode records and success/precision/time metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::{min_pairwise_distance, EnvConfig, JointAction, LandingEnv, PlatformSpec};
use crate::error::{Error, Result};
use crate::io::derive_seed;
use crate::nn::ActorCritic;
use crate::ppo::RunningNorm;
use crate::sim::{SimParams, Vec3};

/// Anything that can fly the drones of a [`LandingEnv`].
pub trait Controller {
    fn name(&self) -> &str;
    /// Called once after every environment reset.
    fn reset(&mut self, env: &LandingEnv);
    fn act(&mut self, env: &LandingEnv) -> Result<JointAction>;
}

/// Deterministic trained policy: the action is the Gaussian mean.
#[derive(Debug, Clone)]
pub struct PolicyController {
    net: ActorCritic<f32>,
    norm: RunningNorm,
    name: String,
}

impl PolicyController {
    pub fn new(net: ActorCritic<f32>, norm: RunningNorm) -> Result<Self> {
        if norm.dim() != net.spec().obs_dim {
            return Err(Error::Shape(format!(
                "normalizer has {} dims, network expects {}",
                norm.dim(),
                net.spec().obs_dim
            )));
        }
        Ok(Self {
            net,
            norm,
            name: "policy".into(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Controller for PolicyController {
    fn name(&self) -> &str {
        &self.name
    }

    fn reset(&mut self, _env: &LandingEnv) {}

    fn act(&mut self, env: &LandingEnv) -> Result<JointAction> {
        let obs = self.norm.normalize(env.observation().as_slice());
        let out = self.net.forward(&obs, 1)?;
        Ok(JointAction(out.mean.iter().map(|&m| m as f64).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Episode `k` uses `platforms[k * platforms.len() / n_episodes]`, so
    /// the episodes are split into equal consecutive blocks.
    pub platforms: Vec<PlatformSpec>,
    pub n_episodes: usize,
    pub seed_base: u64,
}

/// Arm speeds swept by the `moving` scenario, m/s.
pub const MOVING_SPEEDS: [f64; 4] = [0.2, 0.3, 0.4, 0.5];

/// Height of the elevated pad above the floor, m.
pub const ELEVATED_HEIGHT: f64 = 0.5;

impl Scenario {
    pub fn new(name: impl Into<String>, platform: PlatformSpec, n_episodes: usize, seed_base: u64) -> Self {
        Self {
            name: name.into(),
            platforms: vec![platform],
            n_episodes,
            seed_base,
        }
    }

    /// Named scenarios: `static-floor`, `static-elevated`, `moving` (arc
    /// sweep at each of [`MOVING_SPEEDS`]), `moving-<speed>` and
    /// `linear-<speed>`. `n_episodes = None` picks the default count: 12
    /// for static scenarios, 2 per speed for `moving`, 20 otherwise.
    pub fn by_name(name: &str, n_episodes: Option<usize>, seed_base: u64) -> Result<Self> {
        let speed = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::Config(format!("bad speed in scenario `{name}`")))
        };
        let (platforms, default_n) = match name {
            "static-floor" | "static" => (vec![PlatformSpec::StaticFloor], 12),
            "static-elevated" => (
                vec![PlatformSpec::StaticElevated {
                    height: ELEVATED_HEIGHT,
                }],
                12,
            ),
            "moving" => (
                MOVING_SPEEDS
                    .iter()
                    .map(|&speed| PlatformSpec::ArcSweep { speed })
                    .collect::<Vec<_>>(),
                2 * MOVING_SPEEDS.len(),
            ),
            _ => {
                if let Some(s) = name.strip_prefix("moving-") {
                    (vec![PlatformSpec::ArcSweep { speed: speed(s)? }], 20)
                } else if let Some(s) = name.strip_prefix("linear-") {
                    (vec![PlatformSpec::Linear { speed: speed(s)? }], 20)
                } else {
                    return Err(Error::Config(format!("unknown scenario `{name}`")));
                }
            }
        };
        let s = Self {
            name: name.to_string(),
            platforms,
            n_episodes: n_episodes.unwrap_or(default_n),
            seed_base,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 {
            return Err(Error::Config("scenario needs at least one episode".into()));
        }
        if self.platforms.is_empty() {
            return Err(Error::Config("scenario has no platform".into()));
        }
        if self.name == "moving" {
            for p in &self.platforms {
                if let PlatformSpec::ArcSweep { speed } = p {
                    if !(0.2..=0.5).contains(speed) {
                        return Err(Error::Config(format!(
                            "moving scenario speed {speed} outside [0.2, 0.5] m/s"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn episode(&self, k: usize) -> (PlatformSpec, u64) {
        let block = (k * self.platforms.len() / self.n_episodes).min(self.platforms.len() - 1);
        (self.platforms[block].clone(), derive_seed(self.seed_base, k as u64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Timeout,
    Collision,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSample {
    pub position: Vec3,
    pub velocity: Vec3,
    pub pad: Vec3,
    pub landed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub t: f64,
    pub drones: Vec<DroneSample>,
    /// Team reward received on the transition into this state; 0 at t = 0.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub controller: String,
    pub seed: u64,
    pub platform: PlatformSpec,
    pub trajectory: Vec<StepSample>,
    pub outcome: Outcome,
    /// Drone positions at the step all drones were landed.
    pub touchdown: Option<Vec<Vec3>>,
    /// Pad centres at that same step.
    pub touchdown_pads: Option<Vec<Vec3>>,
    pub landing_time: Option<f64>,
}

/// Environment parameters shared by every episode of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSetup {
    pub sim: SimParams,
    pub env: EnvConfig,
}

fn sample(env: &LandingEnv, landed: &[bool], reward: f64) -> StepSample {
    let pads = env.pads();
    StepSample {
        t: env.time(),
        drones: env
            .drones()
            .iter()
            .zip(&pads)
            .zip(landed)
            .map(|((d, &pad), &landed)| DroneSample {
                position: d.position,
                velocity: d.velocity,
                pad,
                landed,
            })
            .collect(),
        reward,
    }
}

/// Runs one episode to termination or truncation.
pub fn run_episode(
    controller: &mut dyn Controller,
    setup: &EvalSetup,
    platform: &PlatformSpec,
    seed: u64,
) -> Result<EpisodeRecord> {
    let mut env = LandingEnv::new(setup.env.clone(), setup.sim, platform.clone())?;
    env.reset(seed)?;
    controller.reset(&env);
    let n = setup.env.n_drones;
    let mut trajectory = vec![sample(&env, &vec![false; n], 0.0)];
    let mut record = EpisodeRecord {
        controller: controller.name().to_string(),
        seed,
        platform: platform.clone(),
        trajectory: Vec::new(),
        outcome: Outcome::Timeout,
        touchdown: None,
        touchdown_pads: None,
        landing_time: None,
    };
    loop {
        let action = match controller.act(&env) {
            Ok(a) => a,
            Err(Error::Singular) => {
                record.outcome = Outcome::Collision;
                break;
            }
            Err(e) => return Err(e),
        };
        let res = env.step(&action)?;
        trajectory.push(sample(&env, &res.info.landed, res.reward));
        if res.info.collision {
            record.outcome = Outcome::Collision;
            break;
        }
        if res.terminated {
            if res.info.landed.iter().all(|&l| l) {
                let last = trajectory.last().expect("non-empty");
                record.outcome = Outcome::Success;
                record.touchdown = Some(last.drones.iter().map(|d| d.position).collect());
                record.touchdown_pads = Some(last.drones.iter().map(|d| d.pad).collect());
                record.landing_time = Some(env.time());
            } else {
                record.outcome = Outcome::OutOfBounds;
            }
            break;
        }
        if res.truncated {
            record.outcome = if res.info.out_of_bounds {
                Outcome::OutOfBounds
            } else {
                Outcome::Timeout
            };
            break;
        }
    }
    record.trajectory = trajectory;
    Ok(record)
}

/// Runs every episode of `scenario`.
pub fn run_scenario(
    controller: &mut dyn Controller,
    setup: &EvalSetup,
    scenario: &Scenario,
) -> Result<Vec<EpisodeRecord>> {
    scenario.validate()?;
    (0..scenario.n_episodes)
        .map(|k| {
            let (platform, seed) = scenario.episode(k);
            run_episode(controller, setup, &platform, seed)
        })
        .collect()
}

/// Horizontal distance from each drone's touchdown point to its pad centre,
/// in centimetres.
pub fn landing_error(record: &EpisodeRecord) -> Result<Vec<f64>> {
    match (&record.outcome, &record.touchdown, &record.touchdown_pads) {
        (Outcome::Success, Some(td), Some(pads)) => Ok(td
            .iter()
            .zip(pads)
            .map(|(&p, &c)| 100.0 * (p - c).norm_xy())
            .collect()),
        _ => Err(Error::NotLanded),
    }
}

/// Smallest inter-drone distance seen anywhere along the trajectory.
pub fn min_separation(record: &EpisodeRecord) -> f64 {
    record
        .trajectory
        .iter()
        .map(|s| min_pairwise_distance(&s.drones.iter().map(|d| d.position).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub controller: String,
    pub scenario: String,
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    /// Percent.
    pub success_rate: f64,
    /// cm, averaged over drones then successful episodes.
    pub mean_landing_error: Option<f64>,
    /// s, over successful episodes.
    pub mean_landing_time: Option<f64>,
    /// cm, one entry per drone.
    pub per_drone_errors: Vec<Option<f64>>,
}

/// Order-independent mean: sorts before summing.
fn mean(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn aggregate(records: &[EpisodeRecord]) -> Result<MetricsReport> {
    aggregate_named(records, "", "")
}

pub fn aggregate_named(records: &[EpisodeRecord], controller: &str, scenario: &str) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let n_drones = records[0].trajectory.first().map_or(0, |s| s.drones.len());
    let mut episode_errors = Vec::new();
    let mut per_drone = vec![Vec::new(); n_drones];
    let mut times = Vec::new();
    let mut successes = 0;
    let mut collisions = 0;
    for r in records {
        match r.outcome {
            Outcome::Success => {
                successes += 1;
                let errs = landing_error(r)?;
                episode_errors.push(errs.iter().sum::<f64>() / errs.len() as f64);
                for (i, e) in errs.into_iter().enumerate() {
                    if let Some(slot) = per_drone.get_mut(i) {
                        slot.push(e);
                    }
                }
                if let Some(t) = r.landing_time {
                    times.push(t);
                }
            }
            Outcome::Collision => collisions += 1,
            _ => {}
        }
    }
    Ok(MetricsReport {
        controller: controller.to_string(),
        scenario: scenario.to_string(),
        episodes: records.len(),
        successes,
        collisions,
        success_rate: 100.0 * successes as f64 / records.len() as f64,
        mean_landing_error: mean(episode_errors),
        mean_landing_time: mean(times),
        per_drone_errors: per_drone.into_iter().map(mean).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<MetricsReport>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

pub const COMPARISON_HEADER: &str = "controller,scenario,episodes,success_rate,precision_cm,time_s";

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(COMPARISON_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.2},{},{}",
                r.controller,
                r.scenario,
                r.episodes,
                r.success_rate,
                cell(r.mean_landing_error),
                cell(r.mean_landing_time)
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let header = ["controller", "scenario", "episodes", "success (%)", "precision (cm)", "time (s)"];
        let rows: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.controller.clone(),
                    r.scenario.clone(),
                    r.episodes.to_string(),
                    format!("{:.2}", r.success_rate),
                    cell(r.mean_landing_error),
                    cell(r.mean_landing_time),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = String::new();
        let line = |s: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(s, "{}", parts.join("  ").trim_end());
        };
        line(&mut s, &header);
        for row in &rows {
            line(&mut s, &row.each_ref().map(String::as_str));
        }
        s
    }
}

/// Evaluates every controller on every scenario with shared seeds, so each
/// controller faces the same initial conditions episode by episode.
pub fn compare(
    controllers: &mut [&mut dyn Controller],
    scenarios: &[Scenario],
    setup: &EvalSetup,
) -> Result<Comparison> {
    if controllers.is_empty() {
        return Err(Error::Config("compare needs at least one controller".into()));
    }
    let mut rows = Vec::new();
    for sc in scenarios {
        for c in controllers.iter_mut() {
            let records = run_scenario(&mut **c, setup, sc)?;
            rows.push(aggregate_named(&records, c.name(), &sc.name)?);
        }
    }
    Ok(Comparison { rows })
}

pub const TRAJECTORY_HEADER: &str = "t,drone,px,py,pz,vx,vy,vz,pad_x,pad_y,pad_z,reward,landed_flag";

/// One row per (step, drone).
pub fn trajectory_csv(record: &EpisodeRecord) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for step in &record.trajectory {
        for (i, d) in step.drones.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:.2},{},{},{},{},{},{},{},{},{},{},{},{}",
                step.t,
                i,
                d.position.x,
                d.position.y,
                d.position.z,
                d.velocity.x,
                d.velocity.y,
                d.velocity.z,
                d.pad.x,
                d.pad.y,
                d.pad.z,
                step.reward,
                u8::from(d.landed)
            );
        }
    }
    s
}
