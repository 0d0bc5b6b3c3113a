//! Kinematic flat-output vehicle tracked by a PD loop.

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::planner::{rotate_z, FlatState, Trajectory, PSI_DOT_MAX, V_MAX};
use crate::{wrap_angle, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroneState {
    pub p: Vec3,
    pub psi: f64,
    pub v: Vec3,
    pub psi_dot: f64,
    pub time: f64,
}

impl DroneState {
    pub fn at_rest(p: Vec3, psi: f64) -> Self {
        Self::from_flat(&FlatState::at_rest(p, psi), 0.0)
    }

    pub fn from_flat(s: &FlatState, time: f64) -> Self {
        Self {
            p: s.p,
            psi: s.psi,
            v: s.v,
            psi_dot: s.psi_dot,
            time,
        }
    }

    pub fn flat(&self) -> FlatState {
        FlatState {
            p: self.p,
            psi: self.psi,
            v: self.v,
            psi_dot: self.psi_dot,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub kd: f64,
    pub kp_psi: f64,
    pub kd_psi: f64,
    /// Per-axis acceleration limit, m/s^2.
    pub a_max: f64,
    /// Yaw acceleration limit, rad/s^2.
    pub yaw_accel_max: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 4.0,
            kd: 3.0,
            kp_psi: 4.0,
            kd_psi: 2.5,
            a_max: 2.0,
            yaw_accel_max: 4.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        let all = [self.kp, self.kd, self.kp_psi, self.kd_psi, self.a_max, self.yaw_accel_max];
        if all.iter().all(|g| *g > 0.0 && g.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("gains must be positive: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    /// Execution horizon between replans, s.
    pub horizon: f64,
    pub robot_radius: f64,
    pub timeout: f64,
    pub goal_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            horizon: 0.5,
            robot_radius: 0.1,
            timeout: 60.0,
            goal_radius: 0.3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt <= horizon, got dt {} horizon {}",
                self.dt, self.horizon
            )));
        }
        if !(self.robot_radius >= 0.0 && self.timeout > 0.0 && self.goal_radius > 0.0) {
            return Err(Error::InvalidConfig(format!("bad simulation limits: {self:?}")));
        }
        Ok(())
    }

    /// Integration steps in one horizon of a trajectory lasting `duration`.
    pub fn steps(&self, duration: f64) -> usize {
        (self.horizon.min(duration) / self.dt).round() as usize
    }
}

/// Feedforward plus PD command at trajectory time `t`, before and after
/// the limits: `(accel, yaw_accel)`.
pub fn commanded_accel(state: &DroneState, traj: &Trajectory, t: f64, gains: &PidGains) -> (Vec3, f64) {
    let t = t.clamp(0.0, traj.duration());
    let pos = traj.eval(t, 0).expect("t clamped into domain");
    let vel = traj.eval(t, 1).expect("t clamped into domain");
    let acc = traj.eval(t, 2).expect("t clamped into domain");
    let a = acc.xyz + gains.kp * (pos.xyz - state.p) + gains.kd * (vel.xyz - state.v);
    let alpha = acc.psi + gains.kp_psi * wrap_angle(pos.psi - state.psi) + gains.kd_psi * (vel.psi - state.psi_dot);
    (a, alpha)
}

/// One semi-implicit Euler step tracking `traj` at time `t_traj`.
pub fn step_pid(state: &DroneState, traj: &Trajectory, t_traj: f64, gains: &PidGains, dt: f64) -> DroneState {
    if dt == 0.0 {
        return *state;
    }
    let (a, alpha) = commanded_accel(state, traj, t_traj, gains);
    let a = a.map(|x| x.clamp(-gains.a_max, gains.a_max));
    let alpha = alpha.clamp(-gains.yaw_accel_max, gains.yaw_accel_max);
    let mut v = state.v + a * dt;
    let speed = v.norm();
    if speed > V_MAX {
        v *= V_MAX / speed;
    }
    let psi_dot = (state.psi_dot + alpha * dt).clamp(-PSI_DOT_MAX, PSI_DOT_MAX);
    DroneState {
        p: state.p + v * dt,
        psi: wrap_angle(state.psi + psi_dot * dt),
        v,
        psi_dot,
        time: state.time + dt,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorizonEvent {
    Ok,
    Collision,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Horizon {
    /// States after each step; the last is the next replanning state.
    pub states: Vec<DroneState>,
    pub event: HorizonEvent,
}

impl Horizon {
    pub fn last(&self, fallback: &DroneState) -> DroneState {
        self.states.last().copied().unwrap_or(*fallback)
    }
}

/// Track `traj` from its start for one horizon, stopping at the first
/// state whose clearance drops below the robot radius.
pub fn simulate_horizon(
    state: &DroneState,
    traj: &Trajectory,
    sdf: &ScalarField,
    cfg: &SimConfig,
    gains: &PidGains,
) -> Horizon {
    let n = cfg.steps(traj.duration());
    let mut states = Vec::with_capacity(n);
    let mut s = *state;
    for k in 0..n {
        s = step_pid(&s, traj, k as f64 * cfg.dt, gains, cfg.dt);
        states.push(s);
        if sdf.sample(&s.p) < cfg.robot_radius {
            return Horizon {
                states,
                event: HorizonEvent::Collision,
            };
        }
    }
    Horizon {
        states,
        event: HorizonEvent::Ok,
    }
}

/// Express a world vector in the body frame (rotation by `-psi` about z).
pub fn to_body_frame(x: &Vec3, state: &DroneState) -> Vec3 {
    rotate_z(x, -state.psi)
}

pub fn to_world_frame(x: &Vec3, state: &DroneState) -> Vec3 {
    rotate_z(x, state.psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{plan_trajectory, Waypoint};
    use std::f64::consts::FRAC_PI_2;

    fn line(d: f64, t: f64) -> (DroneState, Trajectory) {
        let s = DroneState::at_rest(Vec3::new(1.0, 1.0, 1.0), 0.0);
        let traj = plan_trajectory(&s.flat(), &Waypoint::world(s.p + Vec3::new(d, 0.0, 0.0), 0.0), t).unwrap();
        (s, traj)
    }

    #[test]
    fn on_trajectory_command_is_feedforward() {
        let (_, traj) = line(1.0, 2.0);
        let pos = traj.eval(1.0, 0).unwrap();
        let vel = traj.eval(1.0, 1).unwrap();
        let s = DroneState {
            p: pos.xyz,
            psi: pos.psi,
            v: vel.xyz,
            psi_dot: vel.psi,
            time: 0.0,
        };
        let (a, alpha) = commanded_accel(&s, &traj, 1.0, &PidGains::default());
        let ff = traj.eval(1.0, 2).unwrap();
        assert_eq!(a, ff.xyz);
        assert_eq!(alpha, ff.psi);
    }

    #[test]
    fn zero_dt_is_identity() {
        let (s, traj) = line(1.0, 2.0);
        assert_eq!(step_pid(&s, &traj, 0.5, &PidGains::default(), 0.0), s);
    }

    #[test]
    fn hover_recovers_from_offset() {
        let (s, _) = line(0.0, 2.0);
        let hover = plan_trajectory(&s.flat(), &Waypoint::world(s.p, 0.0), 2.0).unwrap();
        let mut x = DroneState {
            p: s.p + Vec3::new(0.2, 0.0, 0.0),
            ..s
        };
        let gains = PidGains::default();
        let mut errs = vec![(x.p - s.p).norm()];
        for k in 0..50 {
            x = step_pid(&x, &hover, k as f64 * 0.02, &gains, 0.02);
            errs.push((x.p - s.p).norm());
        }
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn body_frame_rotation() {
        let s = DroneState::at_rest(Vec3::zeros(), 0.0);
        assert_eq!(to_body_frame(&Vec3::new(1.0, 2.0, 3.0), &s), Vec3::new(1.0, 2.0, 3.0));
        let s = DroneState::at_rest(Vec3::zeros(), FRAC_PI_2);
        assert!((to_body_frame(&Vec3::new(0.0, 1.0, 0.0), &s) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let s = DroneState::at_rest(Vec3::zeros(), 2.3);
        let x = Vec3::new(0.3, -1.2, 0.7);
        assert!((to_body_frame(&to_world_frame(&x, &s), &s) - x).norm() < 1e-12);
    }

    #[test]
    fn speed_stays_bounded() {
        let (s, traj) = line(2.0, 1.0);
        let mut x = s;
        for k in 0..50 {
            x = step_pid(&x, &traj, k as f64 * 0.02, &PidGains::default(), 0.02);
            assert!(x.v.norm() <= V_MAX + 1e-12);
            assert!(x.psi_dot.abs() <= PSI_DOT_MAX);
        }
    }
}
