//! Point-mass kinematics for velocity-commanded drones and parametric
//! landing-platform motion.
//!
//! Each drone tracks its commanded velocity through a first-order lag with
//! time constant `tau_track`, integrated with semi-implicit Euler at the
//! physics rate. Attitude is not modelled: orientation stays at identity and
//! angular velocity at zero, but both are carried in [`DroneState`] so the
//! observation layout matches a full rigid-body state.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_xy(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation about the world z axis.
    pub fn rotate_z(self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn clamp_box(self, half_extent: f64) -> Vec3 {
        Vec3::new(
            self.x.clamp(-half_extent, half_extent),
            self.y.clamp(-half_extent, half_extent),
            self.z.clamp(-half_extent, half_extent),
        )
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroneState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub orientation: Quat,
    pub angular_velocity: Vec3,
}

impl DroneState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Policy period in seconds.
    pub dt_control: f64,
    /// Integration step in seconds; `dt_control` is split into whole substeps.
    pub dt_physics: f64,
    pub v_max: f64,
    /// Velocity tracking time constant in seconds.
    pub tau_track: f64,
    pub world_half_extent: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt_control: 0.05,
            dt_physics: 0.01,
            v_max: 3.0,
            tau_track: 0.25,
            world_half_extent: 2.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.dt_physics > 0.0) {
            return bad("dt_physics must be > 0");
        }
        if !(self.dt_control >= self.dt_physics) {
            return bad("dt_control must be >= dt_physics");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be > 0");
        }
        if !(self.tau_track > 0.0) {
            return bad("tau_track must be > 0");
        }
        if !(self.world_half_extent > 0.0) {
            return bad("world_half_extent must be > 0");
        }
        Ok(())
    }

    pub fn substeps(&self) -> usize {
        ((self.dt_control / self.dt_physics).round() as usize).max(1)
    }
}

/// Scales `v` down onto the sphere of radius `v_max` if it lies outside it.
pub fn clamp_speed(v: Vec3, v_max: f64) -> Result<Vec3> {
    if !v.is_finite() {
        return Err(Error::NonFinite("velocity"));
    }
    if !(v_max > 0.0) || !v_max.is_finite() {
        return Err(Error::Config("v_max must be positive and finite".into()));
    }
    let speed = v.norm();
    if speed <= v_max {
        Ok(v)
    } else {
        Ok(v * (v_max / speed))
    }
}

/// Advances one drone by one control period under velocity command `u_cmd`.
pub fn step_drone(state: &DroneState, u_cmd: Vec3, params: &SimParams) -> Result<DroneState> {
    if !(params.dt_physics > 0.0) {
        return Err(Error::Config("dt_physics must be > 0".into()));
    }
    let target = clamp_speed(u_cmd, params.v_max)?;
    let blend = (params.dt_physics / params.tau_track).min(1.0);
    let mut next = *state;
    for _ in 0..params.substeps() {
        next.velocity = next.velocity + (target - next.velocity) * blend;
        next.position = next.position + next.velocity * params.dt_physics;
    }
    next.orientation = Quat::IDENTITY;
    next.angular_velocity = Vec3::ZERO;
    Ok(next)
}

pub const ARC_LIMIT: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlatformMotion {
    Static,
    Linear {
        velocity: Vec3,
    },
    /// Pad carried on the tip of an arm of length `arm_radius` rotating about
    /// the vertical axis through `origin`.
    ArcSweep {
        arm_radius: f64,
        angular_start: f64,
        angular_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformProfile {
    pub motion: PlatformMotion,
    pub origin: Vec3,
    pub heading: f64,
    pub pad_radius: f64,
    /// Pad centres in the platform frame, one per drone.
    pub pad_offsets: Vec<Vec3>,
}

pub const DEFAULT_PAD_RADIUS: f64 = 0.2;
pub const DEFAULT_PAD_SPACING: f64 = 0.5;

/// Pad offsets spread along the platform x axis with `spacing` between centres.
pub fn default_pad_offsets(n: usize, spacing: f64) -> Vec<Vec3> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n)
        .map(|i| Vec3::new((i as f64 - mid) * spacing, 0.0, 0.0))
        .collect()
}

impl PlatformProfile {
    pub fn fixed(origin: Vec3, heading: f64, n_pads: usize) -> Self {
        Self {
            motion: PlatformMotion::Static,
            origin,
            heading,
            pad_radius: DEFAULT_PAD_RADIUS,
            pad_offsets: default_pad_offsets(n_pads, DEFAULT_PAD_SPACING),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pad_radius > 0.0) {
            return Err(Error::Config("pad_radius must be > 0".into()));
        }
        if !self.origin.is_finite() || !self.heading.is_finite() {
            return Err(Error::NonFinite("platform origin"));
        }
        if let PlatformMotion::ArcSweep {
            arm_radius,
            angular_start,
            angular_rate,
        } = self.motion
        {
            if !(arm_radius >= 0.0) || !angular_start.is_finite() || !angular_rate.is_finite() {
                return Err(Error::Config("invalid arc sweep parameters".into()));
            }
        }
        Ok(())
    }

    /// Arm angle at time `t`, held at the sweep limits once reached.
    pub fn arc_angle(angular_start: f64, angular_rate: f64, t: f64) -> f64 {
        (angular_start + angular_rate * t).clamp(-ARC_LIMIT, ARC_LIMIT)
    }

    /// Frame origin and yaw of the pad carrier at time `t`.
    fn carrier(&self, t: f64) -> (Vec3, f64) {
        match self.motion {
            PlatformMotion::Static => (self.origin, self.heading),
            PlatformMotion::Linear { velocity } => (self.origin + velocity * t, self.heading),
            PlatformMotion::ArcSweep {
                arm_radius,
                angular_start,
                angular_rate,
            } => {
                let yaw = self.heading + Self::arc_angle(angular_start, angular_rate, t);
                let tip = self.origin + Vec3::new(arm_radius, 0.0, 0.0).rotate_z(yaw);
                (tip, yaw)
            }
        }
    }

    pub fn pad_velocities(&self, t: f64) -> Vec<Vec3> {
        match self.motion {
            PlatformMotion::Static => vec![Vec3::ZERO; self.pad_offsets.len()],
            PlatformMotion::Linear { velocity } => vec![velocity; self.pad_offsets.len()],
            PlatformMotion::ArcSweep {
                angular_start,
                angular_rate,
                ..
            } => {
                let raw = angular_start + angular_rate * t;
                if !(-ARC_LIMIT..=ARC_LIMIT).contains(&raw) {
                    return vec![Vec3::ZERO; self.pad_offsets.len()];
                }
                platform_pose(self, t)
                    .into_iter()
                    .map(|p| {
                        let r = p - self.origin;
                        Vec3::new(-angular_rate * r.y, angular_rate * r.x, 0.0)
                    })
                    .collect()
            }
        }
    }
}

/// World positions of every pad centre at time `t`.
pub fn platform_pose(profile: &PlatformProfile, t: f64) -> Vec<Vec3> {
    let (center, yaw) = profile.carrier(t.max(0.0));
    profile
        .pad_offsets
        .iter()
        .map(|o| center + o.rotate_z(yaw))
        .collect()
}
