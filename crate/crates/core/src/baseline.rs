//! Potential-field planner with PID velocity tracking.
//!
//! Each drone is attracted to its pad and repelled by neighbours closer than
//! `d0`. The planned velocity is tracked by a per-drone PID loop whose output
//! becomes the velocity command. Drones hover above their pad until the
//! horizontal error falls below the pad radius, then descend.

use serde::{Deserialize, Serialize};

use crate::env::{JointAction, LandingEnv};
use crate::error::{Error, Result};
use crate::eval::Controller;
use crate::sim::{clamp_speed, DroneState, SimParams, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApfParams {
    /// 1/s
    pub k_att: f64,
    /// m^3/s
    pub k_rep: f64,
    /// Repulsion activation distance, m.
    pub d0: f64,
    /// m/s
    pub v_cap: f64,
}

impl Default for ApfParams {
    fn default() -> Self {
        Self {
            k_att: 1.0,
            k_rep: 0.02,
            d0: 0.4,
            v_cap: 1.5,
        }
    }
}

impl ApfParams {
    pub fn validate(&self, d_collision: f64, v_max: f64) -> Result<()> {
        if !(self.k_att > 0.0 && self.k_rep > 0.0 && self.d0 > 0.0 && self.v_cap > 0.0) {
            return Err(Error::Config("APF gains, d0 and v_cap must be > 0".into()));
        }
        if self.d0 <= d_collision {
            return Err(Error::Config(format!(
                "APF d0 ({}) must exceed the collision distance ({d_collision})",
                self.d0
            )));
        }
        if self.v_cap > v_max {
            return Err(Error::Config(format!(
                "APF v_cap ({}) exceeds v_max ({v_max})",
                self.v_cap
            )));
        }
        Ok(())
    }
}

/// Desired velocity at `p`: linear attraction to `goal` plus inverse-distance
/// repulsion from every neighbour within `d0`, capped at `v_cap`.
pub fn apf_velocity(p: Vec3, goal: Vec3, others: &[Vec3], params: &ApfParams) -> Result<Vec3> {
    if !p.is_finite() || !goal.is_finite() || others.iter().any(|o| !o.is_finite()) {
        return Err(Error::NonFinite("apf input"));
    }
    let mut v = (goal - p) * params.k_att;
    for &o in others {
        let diff = p - o;
        let d = diff.norm();
        if d == 0.0 {
            return Err(Error::Singular);
        }
        if d < params.d0 {
            v += diff * (params.k_rep * (1.0 / d - 1.0 / params.d0) / (d * d) / d);
        }
    }
    clamp_speed(v, params.v_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    /// Per-axis bound on the integral accumulator.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            k_p: 1.2,
            k_i: 0.1,
            k_d: 0.05,
            integral_limit: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub gains: PidGains,
    pub integral: Vec3,
    pub prev_error: Vec3,
}

impl PidState {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: Vec3::ZERO,
            prev_error: Vec3::ZERO,
        }
    }
}

/// One PID update on the velocity error.
pub fn pid_step(target_v: Vec3, actual_v: Vec3, state: &PidState, dt: f64) -> Result<(Vec3, PidState)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("pid dt must be > 0, got {dt}")));
    }
    let g = state.gains;
    let e = target_v - actual_v;
    let lim = g.integral_limit;
    let acc = state.integral + e * dt;
    let integral = Vec3::new(acc.x.clamp(-lim, lim), acc.y.clamp(-lim, lim), acc.z.clamp(-lim, lim));
    let deriv = (e - state.prev_error) * (1.0 / dt);
    let cmd = e * g.k_p + integral * g.k_i + deriv * g.k_d;
    Ok((
        cmd,
        PidState {
            gains: g,
            integral,
            prev_error: e,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub apf: ApfParams,
    pub pid: PidGains,
    /// Height above the pad held until the drone is horizontally aligned.
    pub hover_height: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            apf: ApfParams::default(),
            pid: PidGains::default(),
            hover_height: 0.3,
        }
    }
}

/// Goal point for one drone under the hover-then-descend rule.
pub fn descent_goal(p: Vec3, pad: Vec3, pad_radius: f64, hover_height: f64) -> Vec3 {
    if (p - pad).norm_xy() < pad_radius {
        pad
    } else {
        pad + Vec3::new(0.0, 0.0, hover_height)
    }
}

/// Joint action for all drones; advances each drone's PID state.
pub fn baseline_controller(
    states: &[DroneState],
    pads: &[Vec3],
    pad_radius: f64,
    pids: &mut [PidState],
    params: &BaselineParams,
    sim: &SimParams,
) -> Result<JointAction> {
    if states.len() != pads.len() || states.len() != pids.len() {
        return Err(Error::Shape(format!(
            "{} drones, {} pads, {} pid loops",
            states.len(),
            pads.len(),
            pids.len()
        )));
    }
    let positions: Vec<Vec3> = states.iter().map(|s| s.position).collect();
    let mut cmds = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let others: Vec<Vec3> = positions
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &q)| q)
            .collect();
        let goal = descent_goal(s.position, pads[i], pad_radius, params.hover_height);
        let target = apf_velocity(s.position, goal, &others, &params.apf)?;
        let (cmd, next) = pid_step(target, s.velocity, &pids[i], sim.dt_control)?;
        pids[i] = next;
        cmds.push(cmd * (1.0 / sim.v_max));
    }
    let mut a = JointAction::from_commands(&cmds);
    a.0.iter_mut().for_each(|x| *x = x.clamp(-1.0, 1.0));
    Ok(a)
}

/// Stateful wrapper driving a [`LandingEnv`].
#[derive(Debug, Clone)]
pub struct ApfPidController {
    pub params: BaselineParams,
    pids: Vec<PidState>,
}

impl ApfPidController {
    pub fn new(params: BaselineParams) -> Self {
        Self {
            params,
            pids: Vec::new(),
        }
    }
}

impl Controller for ApfPidController {
    fn name(&self) -> &str {
        "baseline"
    }

    fn reset(&mut self, env: &LandingEnv) {
        self.pids = vec![PidState::new(self.params.pid); env.config().n_drones];
    }

    fn act(&mut self, env: &LandingEnv) -> Result<JointAction> {
        if self.pids.len() != env.config().n_drones {
            self.reset(env);
        }
        baseline_controller(
            env.drones(),
            &env.pads(),
            env.platform().pad_radius,
            &mut self.pids,
            &self.params,
            env.sim(),
        )
    }
}
