//! Waypoint-to-trajectory planning in flat outputs `[x, y, z, psi]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::{wrap_angle, Vec3};

/// Speed bound of the vehicle, m/s.
pub const V_MAX: f64 = 1.0;
/// Yaw-rate bound of the vehicle, rad/s.
pub const PSI_DOT_MAX: f64 = 2.0;
pub const T_MIN: f64 = 1.0;
pub const T_MAX: f64 = 4.0;
/// Cruise speed used to pick a trajectory duration.
pub const V_DES: f64 = 0.5;
/// Default angular margin kept inside the camera cone.
pub const CONE_MARGIN: f64 = 0.1;
/// Condition estimate above which a boundary system is rejected.
const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatState {
    pub p: Vec3,
    pub psi: f64,
    pub v: Vec3,
    pub psi_dot: f64,
}

impl FlatState {
    pub fn at_rest(p: Vec3, psi: f64) -> Self {
        Self {
            p,
            psi: wrap_angle(psi),
            v: Vec3::zeros(),
            psi_dot: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    World,
    Body,
}

/// A 4-DOF target. In the body frame `w` is the offset from the vehicle
/// rotated by `-psi`, and `psi` is relative to the current heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    pub w: Vec3,
    pub psi: f64,
    pub frame: Frame,
}

impl Waypoint {
    pub fn world(w: Vec3, psi: f64) -> Self {
        Self {
            w,
            psi: wrap_angle(psi),
            frame: Frame::World,
        }
    }

    pub fn body(w: Vec3, psi: f64) -> Self {
        Self {
            w,
            psi: wrap_angle(psi),
            frame: Frame::Body,
        }
    }

    pub fn from_array(a: [f64; 4], frame: Frame) -> Self {
        Self {
            w: Vec3::new(a[0], a[1], a[2]),
            psi: wrap_angle(a[3]),
            frame,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w.x, self.w.y, self.w.z, self.psi]
    }

    /// Express in the world frame relative to `state`.
    pub fn to_world(&self, state: &FlatState) -> Self {
        match self.frame {
            Frame::World => *self,
            Frame::Body => Self::world(state.p + rotate_z(&self.w, state.psi), state.psi + self.psi),
        }
    }

    /// Express in the body frame of `state`.
    pub fn to_body(&self, state: &FlatState) -> Self {
        match self.frame {
            Frame::Body => *self,
            Frame::World => Self::body(rotate_z(&(self.w - state.p), -state.psi), self.psi - state.psi),
        }
    }
}

/// Rotate `v` by `angle` about +z.
pub fn rotate_z(v: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Pinhole depth camera rigidly mounted on the body. Positive `pitch`
/// tilts the optical axis down.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraModel {
    pub fov_h: f64,
    pub fov_v: f64,
    pub pitch: f64,
    pub max_range: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fov_h: 1.5,
            fov_v: 1.2,
            pitch: 0.0,
            max_range: 5.0,
            width: 32,
            height: 32,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::PI;
        let fov_ok = |f: f64| f > 0.0 && f < PI;
        if !fov_ok(self.fov_h) || !fov_ok(self.fov_v) {
            return Err(Error::InvalidConfig(format!(
                "camera fov must lie in (0, pi), got {} x {}",
                self.fov_h, self.fov_v
            )));
        }
        if self.width < 8 || self.height < 8 {
            return Err(Error::InvalidConfig(format!(
                "image must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.max_range > 0.0) || !self.pitch.is_finite() {
            return Err(Error::InvalidConfig("camera range and pitch must be finite, range positive".into()));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Clamp a body-frame waypoint into the camera cone, keeping its distance.
///
/// Azimuth is measured from body x toward body y; elevation from the
/// horizontal plane and centered on the optical axis. Directions behind
/// the vehicle first snap to the nearer lateral extreme.
pub fn clip_to_cone(w: &Waypoint, cam: &CameraModel, margin: f64) -> Result<Waypoint> {
    use std::f64::consts::FRAC_PI_2;
    assert_eq!(w.frame, Frame::Body, "clip_to_cone expects a body-frame waypoint");
    let half_h = cam.fov_h / 2.0 - margin;
    let half_v = cam.fov_v / 2.0 - margin;
    if margin < 0.0 || half_h <= 0.0 || half_v <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "cone margin {margin} leaves no room inside fov {} x {}",
            cam.fov_h, cam.fov_v
        )));
    }
    let r = w.w.norm();
    if r < 1e-6 {
        return Err(Error::ZeroWaypoint);
    }
    let mut az = w.w.y.atan2(w.w.x);
    if az.abs() > FRAC_PI_2 {
        az = FRAC_PI_2.copysign(az);
    }
    let az = az.clamp(-half_h, half_h);
    let el = w.w.z.atan2(w.w.x.hypot(w.w.y));
    let axis = -cam.pitch;
    let el = el.clamp(axis - half_v, axis + half_v);
    let flat = r * el.cos();
    Ok(Waypoint::body(
        Vec3::new(flat * az.cos(), flat * az.sin(), r * el.sin()),
        w.psi,
    ))
}

/// Duration for reaching `w` (world frame) at cruise speed, clamped to
/// `[T_MIN, T_MAX]`.
pub fn duration_heuristic(state: &FlatState, w: &Waypoint) -> f64 {
    debug_assert_eq!(w.frame, Frame::World);
    ((w.w - state.p).norm() / V_DES).clamp(T_MIN, T_MAX)
}

/// Flat outputs or one of their time derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatOutput {
    pub xyz: Vec3,
    pub psi: f64,
}

/// Degree-7 position polynomials and a cubic yaw, ascending powers of `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    coeffs_xyz: [[f64; 8]; 3],
    coeffs_psi: [f64; 4],
    duration: f64,
}

impl Trajectory {
    pub fn from_coeffs(coeffs_xyz: [[f64; 8]; 3], coeffs_psi: [f64; 4], duration: f64) -> Self {
        Self {
            coeffs_xyz,
            coeffs_psi,
            duration,
        }
    }

    pub fn coeffs_xyz(&self) -> &[[f64; 8]; 3] {
        &self.coeffs_xyz
    }

    pub fn coeffs_psi(&self) -> &[f64; 4] {
        &self.coeffs_psi
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// `order`-th derivative of the flat outputs at `t`. Yaw is returned
    /// unwrapped.
    pub fn eval(&self, t: f64, order: usize) -> Result<FlatOutput> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::OutOfDomain {
                t,
                duration: self.duration,
            });
        }
        if order > 4 {
            return Err(Error::InvalidConfig(format!("derivative order {order} exceeds 4")));
        }
        Ok(FlatOutput {
            xyz: Vec3::new(
                horner(&self.coeffs_xyz[0], t, order),
                horner(&self.coeffs_xyz[1], t, order),
                horner(&self.coeffs_xyz[2], t, order),
            ),
            psi: horner(&self.coeffs_psi, t, order),
        })
    }

    /// `integral_0^T |p''''(t)|^2 dt`, exact.
    pub fn snap_cost(&self) -> f64 {
        let t = self.duration;
        let mut total = 0.0;
        for c in &self.coeffs_xyz {
            // Snap coefficients s_j of t^j, j = 0..=3.
            let s: Vec<f64> = (4..8).map(|k| c[k] * falling(k, 4)).collect();
            for i in 0..4 {
                for j in 0..4 {
                    let n = (i + j + 1) as i32;
                    total += s[i] * s[j] * t.powi(n) / n as f64;
                }
            }
        }
        total
    }
}

/// `k (k-1) ... (k-m+1)`.
fn falling(k: usize, m: usize) -> f64 {
    (0..m).map(|i| (k - i) as f64).product()
}

/// `m`-th derivative of `sum c_k t^k`.
pub fn horner(c: &[f64], t: f64, m: usize) -> f64 {
    let n = c.len();
    if m >= n {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in (m..n).rev() {
        acc = acc * t + c[k] * falling(k, m);
    }
    acc
}

/// Matrix of `d^m/dt^m [1, t, ..., t^(n-1)]` for `m < n/2` at `t = 0`,
/// then at `t = duration`.
fn boundary_matrix(n: usize, duration: f64) -> DMatrix<f64> {
    let half = n / 2;
    DMatrix::from_fn(n, n, |i, k| {
        let (t, m) = if i < half { (0.0, i) } else { (duration, i - half) };
        if k < m {
            0.0
        } else {
            falling(k, m) * t.powi((k - m) as i32)
        }
    })
}

/// Solve the boundary system once per right-hand side (columns of `rhs`).
/// The `t = 0` rows are diagonal, so the low coefficients come out in
/// closed form and only the end block goes through LU.
fn solve_boundary(duration: f64, rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = rhs.nrows();
    let half = n / 2;
    let a = boundary_matrix(n, duration);
    let sv = a.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let mut c = DMatrix::zeros(n, rhs.ncols());
    for m in 0..half {
        for j in 0..rhs.ncols() {
            c[(m, j)] = rhs[(m, j)] / falling(m, m);
        }
    }
    let low = c.rows(0, half).into_owned();
    let tail = rhs.rows(half, half) - a.view((half, 0), (half, half)) * low;
    let high = a
        .view((half, half), (half, half))
        .into_owned()
        .lu()
        .solve(&tail)
        .ok_or(Error::SingularSystem { condition })?;
    c.rows_mut(half, half).copy_from(&high);
    Ok(c)
}

/// Rest-at-the-end trajectory from `state` to the world-frame waypoint
/// `w` over `duration` seconds. Initial acceleration and jerk are zero.
pub fn plan_trajectory(state: &FlatState, w: &Waypoint, duration: f64) -> Result<Trajectory> {
    debug_assert_eq!(w.frame, Frame::World);
    if !duration.is_finite() || !state.p.iter().chain(state.v.iter()).chain(w.w.iter()).all(|x| x.is_finite()) {
        return Err(Error::InvalidConfig("non-finite planning input".into()));
    }
    let rhs = DMatrix::from_fn(8, 3, |i, a| match i {
        0 => state.p[a],
        1 => state.v[a],
        4 => w.w[a],
        _ => 0.0,
    });
    let pos = solve_boundary(duration, rhs)?;
    let target = state.psi + wrap_angle(w.psi - state.psi);
    let yaw = solve_boundary(duration, DMatrix::from_column_slice(4, 1, &[state.psi, state.psi_dot, target, 0.0]))?;
    let mut coeffs_xyz = [[0.0; 8]; 3];
    for (a, dst) in coeffs_xyz.iter_mut().enumerate() {
        dst.copy_from_slice(pos.column(a).as_slice());
    }
    let mut coeffs_psi = [0.0; 4];
    coeffs_psi.copy_from_slice(yaw.as_slice());
    Ok(Trajectory::from_coeffs(coeffs_xyz, coeffs_psi, duration))
}
