//! Raycast depth camera and the policy observation vector.

use crate::error::{Error, Result};
use crate::planner::{rotate_z, CameraModel};
use crate::vehicle::{to_body_frame, DroneState};
use crate::world::VoxelGrid;
use crate::Vec3;

/// Scalars appended after the depth pixels: goal (3), velocity (3), yaw rate.
pub const EXTRA_FEATURES: usize = 7;

/// Row-major depth in meters; row 0 is the top of the image, column 0 its
/// left (+y body) edge.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// World-frame unit ray through the center of pixel `(row, col)`.
pub fn pixel_ray(cam: &CameraModel, psi: f64, row: usize, col: usize) -> Vec3 {
    let fx = (cam.width as f64 / 2.0) / (cam.fov_h / 2.0).tan();
    let fy = (cam.height as f64 / 2.0) / (cam.fov_v / 2.0).tan();
    let u = col as f64 + 0.5 - cam.width as f64 / 2.0;
    let v = row as f64 + 0.5 - cam.height as f64 / 2.0;
    let d = Vec3::new(1.0, -u / fx, -v / fy);
    let (s, c) = cam.pitch.sin_cos();
    let pitched = Vec3::new(c * d.x + s * d.z, d.y, -s * d.x + c * d.z);
    rotate_z(&pitched, psi).normalize()
}

/// Distance along the unit ray `dir` from `p` to the first face of an
/// occupied cell, by exact voxel traversal. `None` when nothing is hit
/// within `max_range` or the ray leaves the grid.
pub fn cast_ray(grid: &VoxelGrid, p: &Vec3, dir: &Vec3, max_range: f64) -> Option<f64> {
    let h = grid.voxel();
    let dims = grid.dims();
    // Lattice coordinates where cell i spans [i - 0.5, i + 0.5).
    let q = grid.lattice_coords(p);
    let mut cell = [0isize; 3];
    let mut step = [0isize; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        cell[a] = (q[a] + 0.5).floor() as isize;
        if dir[a] > 0.0 {
            step[a] = 1;
            t_max[a] = (cell[a] as f64 + 0.5 - q[a]) * h / dir[a];
            t_delta[a] = h / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            t_max[a] = (q[a] - (cell[a] as f64 - 0.5)) * h / -dir[a];
            t_delta[a] = h / -dir[a];
        }
    }
    let inside = |c: &[isize; 3]| (0..3).all(|a| c[a] >= 0 && c[a] < dims[a] as isize);
    loop {
        let a = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        let t = t_max[a];
        if t > max_range {
            return None;
        }
        cell[a] += step[a];
        t_max[a] += t_delta[a];
        if !inside(&cell) {
            return None;
        }
        if grid.occupied([cell[0] as usize, cell[1] as usize, cell[2] as usize]) {
            return Some(t);
        }
    }
}

pub fn render_depth(grid: &VoxelGrid, state: &DroneState, cam: &CameraModel) -> Result<DepthImage> {
    match grid.cell_at(&state.p) {
        Some(c) if !grid.occupied(c) => {}
        _ => return Err(Error::CameraInObstacle),
    }
    let mut data = Vec::with_capacity(cam.pixels());
    for row in 0..cam.height {
        for col in 0..cam.width {
            let dir = pixel_ray(cam, state.psi, row, col);
            let d = cast_ray(grid, &state.p, &dir, cam.max_range).unwrap_or(cam.max_range);
            data.push(d.clamp(0.0, cam.max_range));
        }
    }
    Ok(DepthImage {
        width: cam.width,
        height: cam.height,
        data,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    pub depth: DepthImage,
    pub rel_goal: Vec3,
    pub rel_vel: Vec3,
    pub psi_dot: f64,
    /// Expert waypoint in the body frame `[x, y, z, psi]`.
    pub label: Option<[f64; 4]>,
}

impl ObservationRecord {
    pub fn dim(&self) -> usize {
        self.depth.data.len() + EXTRA_FEATURES
    }

    /// Depth row-major, then relative goal, relative velocity, yaw rate.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.depth.data);
        v.extend(self.rel_goal.iter());
        v.extend(self.rel_vel.iter());
        v.push(self.psi_dot);
        v
    }
}

pub fn make_observation(state: &DroneState, goal: &Vec3, depth: DepthImage) -> ObservationRecord {
    ObservationRecord {
        depth,
        rel_goal: to_body_frame(&(goal - state.p), state),
        rel_vel: to_body_frame(&state.v, state),
        psi_dot: state.psi_dot,
        label: None,
    }
}
