//! Two-drone landing task as an episodic decision process.
//!
//! Each step takes one normalized velocity command per drone, advances the
//! simulator by one control period and returns the joint observation and a
//! single team reward. The team reward is the sum of per-drone shaping terms
//! plus a collision penalty and a bonus when every drone is landed at once.
//!
//! Episodes terminate when all drones are landed or two drones collide, and
//! are truncated at `max_episode_steps`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{
    default_pad_offsets, platform_pose, step_drone, DroneState, PlatformMotion, PlatformProfile,
    SimParams, Vec3, DEFAULT_PAD_RADIUS, DEFAULT_PAD_SPACING,
};

/// Values per drone in the observation: position (3), quaternion (4),
/// velocity (3), angular velocity (3).
pub const OBS_PER_DRONE: usize = 13;
pub const ACT_PER_DRONE: usize = 3;

const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub n_drones: usize,
    pub max_episode_steps: usize,
    /// Gain on per-step distance progress.
    pub alpha: f64,
    /// Gain on speed relative to the pad; non-positive.
    pub beta: f64,
    /// One-shot bonus when a drone first satisfies the landing predicate.
    pub c_land: f64,
    /// Magnitude of the collision penalty.
    pub alpha_c: f64,
    /// Bonus when all drones are landed in the same step.
    pub k_team: f64,
    pub d_collision: f64,
    pub land_radius: f64,
    pub land_speed_max: f64,
    pub land_alt_tol: f64,
    /// End the episode when a drone touches the world boundary.
    pub terminate_out_of_bounds: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_drones: 2,
            max_episode_steps: 600,
            alpha: 1.0,
            beta: -0.05,
            c_land: 5.0,
            alpha_c: 5.0,
            k_team: 10.0,
            d_collision: 0.15,
            land_radius: DEFAULT_PAD_RADIUS,
            land_speed_max: 0.3,
            land_alt_tol: 0.05,
            terminate_out_of_bounds: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 9] = [
            (self.n_drones >= 2, "n_drones must be >= 2"),
            (self.max_episode_steps >= 1, "max_episode_steps must be >= 1"),
            (self.alpha > 0.0, "alpha must be > 0"),
            (self.beta <= 0.0, "beta must be <= 0"),
            (self.alpha_c > 0.0, "alpha_c must be > 0"),
            (self.k_team >= 0.0, "k_team must be >= 0"),
            (self.d_collision > 0.0, "d_collision must be > 0"),
            (self.land_radius > 0.0, "land_radius must be > 0"),
            (
                self.land_speed_max > 0.0 && self.land_alt_tol > 0.0,
                "landing tolerances must be > 0",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.to_string()));
            }
        }
        if !self.c_land.is_finite() {
            return Err(Error::Config("c_land must be finite".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        OBS_PER_DRONE * self.n_drones
    }

    pub fn act_dim(&self) -> usize {
        ACT_PER_DRONE * self.n_drones
    }
}

/// How the landing platform is placed at reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlatformSpec {
    /// Training distribution: random static pads anywhere in the box, and
    /// with probability `moving_fraction` an arm sweep at a speed drawn from
    /// `[speed_min, speed_max]`.
    Randomized {
        moving_fraction: f64,
        speed_min: f64,
        speed_max: f64,
    },
    /// Pads on the floor of the world box.
    StaticFloor,
    /// Pads at a fixed height above the floor.
    StaticElevated { height: f64 },
    /// Pads on an arm sweeping between the angular limits; `speed` is the
    /// tangential speed of the arm tip in m/s.
    ArcSweep { speed: f64 },
    /// Pads translating horizontally at `speed` m/s in a random direction.
    Linear { speed: f64 },
    /// A fully specified profile, used verbatim.
    Fixed(PlatformProfile),
}

impl Default for PlatformSpec {
    fn default() -> Self {
        PlatformSpec::Randomized {
            moving_fraction: 0.3,
            speed_min: 0.2,
            speed_max: 0.5,
        }
    }
}

pub const ARM_RADIUS: f64 = 0.5;

/// Every sampled platform faces +x, so the pad-to-pad offset is fixed in
/// the world frame.
pub const PLATFORM_HEADING: f64 = 0.0;

impl PlatformSpec {
    fn sample(&self, rng: &mut ChaCha8Rng, half: f64, n: usize) -> Result<PlatformProfile> {
        let offsets = default_pad_offsets(n, DEFAULT_PAD_SPACING);
        let reach = offsets.iter().map(|o| o.norm()).fold(0.0, f64::max) + DEFAULT_PAD_RADIUS;
        let heading = PLATFORM_HEADING;
        let xy = |rng: &mut ChaCha8Rng, margin: f64| -> Result<(f64, f64)> {
            let lim = half - margin;
            if lim < 0.0 {
                return Err(Error::Config(format!(
                    "world half extent {half} too small for the platform footprint"
                )));
            }
            if lim == 0.0 {
                return Ok((0.0, 0.0));
            }
            Ok((rng.random_range(-lim..lim), rng.random_range(-lim..lim)))
        };
        let fixed = |origin: Vec3| PlatformProfile {
            motion: PlatformMotion::Static,
            origin,
            heading,
            pad_radius: DEFAULT_PAD_RADIUS,
            pad_offsets: offsets.clone(),
        };
        let profile = match self {
            PlatformSpec::StaticFloor => {
                let (x, y) = xy(rng, reach)?;
                fixed(Vec3::new(x, y, -half))
            }
            PlatformSpec::StaticElevated { height } => {
                let (x, y) = xy(rng, reach)?;
                fixed(Vec3::new(x, y, (-half + height).min(half)))
            }
            PlatformSpec::ArcSweep { speed } => self.arc(rng, half, reach, heading, *speed, &offsets)?,
            PlatformSpec::Linear { speed } => {
                let (x, y) = xy(rng, reach)?;
                let dir = Vec3::new(1.0, 0.0, 0.0).rotate_z(rng.random_range(-PI..PI));
                let z = rng.random_range(-half..0.0);
                PlatformProfile {
                    motion: PlatformMotion::Linear {
                        velocity: dir * *speed,
                    },
                    ..fixed(Vec3::new(x, y, z))
                }
            }
            PlatformSpec::Randomized {
                moving_fraction,
                speed_min,
                speed_max,
            } => {
                let moving = rng.random::<f64>() < *moving_fraction;
                if moving {
                    let speed = if speed_max > speed_min {
                        rng.random_range(*speed_min..*speed_max)
                    } else {
                        *speed_min
                    };
                    self.arc(rng, half, reach, heading, speed, &offsets)?
                } else {
                    let (x, y) = xy(rng, reach)?;
                    let z = rng.random_range(-half..half * 0.5);
                    fixed(Vec3::new(x, y, z))
                }
            }
            PlatformSpec::Fixed(p) => p.clone(),
        };
        profile.validate()?;
        Ok(profile)
    }

    fn arc(
        &self,
        rng: &mut ChaCha8Rng,
        half: f64,
        reach: f64,
        heading: f64,
        speed: f64,
        offsets: &[Vec3],
    ) -> Result<PlatformProfile> {
        let lim = half - reach - ARM_RADIUS;
        let (x, y) = if lim > 0.0 {
            (rng.random_range(-lim..lim), rng.random_range(-lim..lim))
        } else {
            (0.0, 0.0)
        };
        let z = rng.random_range(-half..0.0);
        let forward = rng.random::<bool>();
        let (start, rate) = if forward {
            (-PI / 2.0, speed / ARM_RADIUS)
        } else {
            (PI / 2.0, -speed / ARM_RADIUS)
        };
        Ok(PlatformProfile {
            motion: PlatformMotion::ArcSweep {
                arm_radius: ARM_RADIUS,
                angular_start: start,
                angular_rate: rate,
            },
            origin: Vec3::new(x, y, z),
            heading,
            pad_radius: DEFAULT_PAD_RADIUS,
            pad_offsets: offsets.to_vec(),
        })
    }
}

/// Flattened per-drone observations, `13 * n_drones` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointObservation(pub Vec<f64>);

impl JointObservation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Flattened normalized per-drone velocity commands in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAction(pub Vec<f64>);

impl JointAction {
    pub fn zeros(n_drones: usize) -> Self {
        JointAction(vec![0.0; ACT_PER_DRONE * n_drones])
    }

    pub fn from_commands(cmds: &[Vec3]) -> Self {
        JointAction(cmds.iter().flat_map(|c| c.to_array()).collect())
    }

    pub fn drone(&self, i: usize) -> Vec3 {
        let a = &self.0[ACT_PER_DRONE * i..ACT_PER_DRONE * (i + 1)];
        Vec3::new(a[0], a[1], a[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Distance of each drone to its pad centre after the step.
    pub distances: Vec<f64>,
    pub landed: Vec<bool>,
    pub collision: bool,
    pub out_of_bounds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: JointObservation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// Per-drone shaping reward: distance progress, speed penalty and the
/// landing bonus when `landed` marks the first landed step.
pub fn reward_individual(
    prev_dist: f64,
    cur_dist: f64,
    speed: f64,
    landed: bool,
    config: &EnvConfig,
) -> f64 {
    let bonus = if landed { config.c_land } else { 0.0 };
    config.alpha * (prev_dist - cur_dist) + config.beta * speed + bonus
}

pub fn reward_team(individual: &[f64], collision: bool, all_landed: bool, config: &EnvConfig) -> f64 {
    let mut r: f64 = individual.iter().sum();
    if collision {
        r -= config.alpha_c;
    }
    if all_landed {
        r += config.k_team;
    }
    r
}

/// True when any two drone centres are strictly closer than `d_collision`.
pub fn detect_collision(states: &[DroneState], d_collision: f64) -> bool {
    states.iter().enumerate().any(|(i, a)| {
        states[i + 1..]
            .iter()
            .any(|b| (a.position - b.position).norm() < d_collision)
    })
}

pub fn min_pairwise_distance(positions: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            best = best.min((*a - *b).norm());
        }
    }
    best
}

pub fn is_landed(drone: &DroneState, pad_center: Vec3, pad_velocity: Vec3, config: &EnvConfig) -> bool {
    let d = drone.position - pad_center;
    d.norm_xy() <= config.land_radius
        && d.z.abs() <= config.land_alt_tol
        && (drone.velocity - pad_velocity).norm() <= config.land_speed_max
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandingEnv {
    config: EnvConfig,
    sim: SimParams,
    spec: PlatformSpec,
    rng: ChaCha8Rng,
    drones: Vec<DroneState>,
    platform: PlatformProfile,
    step_index: usize,
    prev_dist: Vec<f64>,
    bonus_paid: Vec<bool>,
    active: bool,
}

impl LandingEnv {
    pub fn new(config: EnvConfig, sim: SimParams, spec: PlatformSpec) -> Result<Self> {
        config.validate()?;
        sim.validate()?;
        let n = config.n_drones;
        Ok(Self {
            platform: PlatformProfile::fixed(Vec3::ZERO, 0.0, n),
            config,
            sim,
            spec,
            rng: ChaCha8Rng::seed_from_u64(0),
            drones: vec![DroneState::default(); n],
            step_index: 0,
            prev_dist: vec![0.0; n],
            bonus_paid: vec![false; n],
            active: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn sim(&self) -> &SimParams {
        &self.sim
    }

    pub fn drones(&self) -> &[DroneState] {
        &self.drones
    }

    pub fn platform(&self) -> &PlatformProfile {
        &self.platform
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.sim.dt_control
    }

    pub fn pads(&self) -> Vec<Vec3> {
        platform_pose(&self.platform, self.time())
    }

    pub fn pad_velocities(&self) -> Vec<Vec3> {
        self.platform.pad_velocities(self.time())
    }

    pub fn set_platform_spec(&mut self, spec: PlatformSpec) {
        self.spec = spec;
    }

    /// Starts a new episode: samples the platform, then drone positions
    /// uniformly in the box with pairwise separation of at least
    /// `2 * d_collision`. Drones start at rest.
    pub fn reset(&mut self, seed: u64) -> Result<JointObservation> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let half = self.sim.world_half_extent;
        let n = self.config.n_drones;
        self.platform = self.spec.sample(&mut self.rng, half, n)?;
        if self.platform.pad_offsets.len() != n {
            return Err(Error::Config(format!(
                "platform has {} pads for {n} drones",
                self.platform.pad_offsets.len()
            )));
        }
        let sep = 2.0 * self.config.d_collision;
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cand: Vec<Vec3> = (0..n)
                .map(|_| {
                    Vec3::new(
                        self.rng.random_range(-half..=half),
                        self.rng.random_range(-half..=half),
                        self.rng.random_range(-half..=half),
                    )
                })
                .collect();
            if min_pairwise_distance(&cand) >= sep {
                placed = Some(cand);
                break;
            }
        }
        let positions = placed.ok_or(Error::Placement(PLACEMENT_ATTEMPTS))?;
        self.place(&positions)
    }

    /// Puts drones at rest at `positions` and restarts the episode clock
    /// without resampling the platform.
    pub fn place(&mut self, positions: &[Vec3]) -> Result<JointObservation> {
        if positions.len() != self.config.n_drones {
            return Err(Error::Shape(format!(
                "expected {} positions, got {}",
                self.config.n_drones,
                positions.len()
            )));
        }
        self.drones = positions.iter().map(|&p| DroneState::at_rest(p)).collect();
        self.step_index = 0;
        self.bonus_paid = vec![false; self.config.n_drones];
        let pads = self.pads();
        self.prev_dist = self
            .drones
            .iter()
            .zip(&pads)
            .map(|(d, p)| (d.position - *p).norm())
            .collect();
        self.active = true;
        Ok(self.observation())
    }

    /// Replaces the platform profile and restarts the clock at the current
    /// drone positions.
    pub fn set_platform(&mut self, platform: PlatformProfile) -> Result<JointObservation> {
        platform.validate()?;
        self.platform = platform;
        let positions: Vec<Vec3> = self.drones.iter().map(|d| d.position).collect();
        self.place(&positions)
    }

    pub fn observe(&self, drone_index: usize) -> Result<[f64; OBS_PER_DRONE]> {
        let n = self.config.n_drones;
        if drone_index >= n {
            return Err(Error::DroneIndex {
                index: drone_index,
                len: n,
            });
        }
        let pads = self.pads();
        let vels = self.pad_velocities();
        Ok(drone_observation(
            &self.drones[drone_index],
            pads[drone_index],
            vels[drone_index],
        ))
    }

    pub fn observation(&self) -> JointObservation {
        let pads = self.pads();
        let vels = self.pad_velocities();
        JointObservation(
            self.drones
                .iter()
                .enumerate()
                .flat_map(|(i, d)| drone_observation(d, pads[i], vels[i]))
                .collect(),
        )
    }

    pub fn step(&mut self, action: &JointAction) -> Result<StepResult> {
        if !self.active {
            return Err(Error::EpisodeOver);
        }
        let n = self.config.n_drones;
        if action.0.len() != ACT_PER_DRONE * n {
            return Err(Error::Shape(format!(
                "action has {} values, expected {}",
                action.0.len(),
                ACT_PER_DRONE * n
            )));
        }
        if action.0.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("action"));
        }

        let half = self.sim.world_half_extent;
        let mut out_of_bounds = false;
        for i in 0..n {
            let a = action.drone(i);
            let u = Vec3::new(a.x.clamp(-1.0, 1.0), a.y.clamp(-1.0, 1.0), a.z.clamp(-1.0, 1.0))
                * self.sim.v_max;
            let mut next = step_drone(&self.drones[i], u, &self.sim)?;
            let clamped = next.position.clamp_box(half);
            if clamped != next.position {
                out_of_bounds = true;
                for (p, c, v) in [
                    (next.position.x, clamped.x, &mut next.velocity.x),
                    (next.position.y, clamped.y, &mut next.velocity.y),
                    (next.position.z, clamped.z, &mut next.velocity.z),
                ] {
                    if p != c {
                        *v = 0.0;
                    }
                }
                next.position = clamped;
            }
            self.drones[i] = next;
        }
        self.step_index += 1;

        let pads = self.pads();
        let pad_vels = self.pad_velocities();
        let mut distances = Vec::with_capacity(n);
        let mut landed = Vec::with_capacity(n);
        let mut individual = Vec::with_capacity(n);
        for i in 0..n {
            let d = &self.drones[i];
            let dist = (d.position - pads[i]).norm();
            let speed = (d.velocity - pad_vels[i]).norm();
            let is_down = is_landed(d, pads[i], pad_vels[i], &self.config);
            let first = is_down && !self.bonus_paid[i];
            if first {
                self.bonus_paid[i] = true;
            }
            individual.push(reward_individual(
                self.prev_dist[i],
                dist,
                speed,
                first,
                &self.config,
            ));
            self.prev_dist[i] = dist;
            distances.push(dist);
            landed.push(is_down);
        }
        let collision = detect_collision(&self.drones, self.config.d_collision);
        let all_landed = landed.iter().all(|&l| l);
        let reward = reward_team(&individual, collision, all_landed, &self.config);

        let terminated =
            all_landed || collision || (out_of_bounds && self.config.terminate_out_of_bounds);
        let truncated = !terminated && self.step_index >= self.config.max_episode_steps;
        if terminated || truncated {
            self.active = false;
        }
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminated,
            truncated,
            info: StepInfo {
                distances,
                landed,
                collision,
                out_of_bounds,
            },
        })
    }
}

fn drone_observation(d: &DroneState, pad: Vec3, pad_vel: Vec3) -> [f64; OBS_PER_DRONE] {
    let p = d.position - pad;
    let v = d.velocity - pad_vel;
    let q = d.orientation;
    let w = d.angular_velocity;
    [
        p.x, p.y, p.z, q.w, q.x, q.y, q.z, v.x, v.y, v.z, w.x, w.y, w.z,
    ]
}
