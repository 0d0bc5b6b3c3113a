//! Privileged sampling expert: scores cone-clipped candidate waypoints
//! with an obstacle, progress and heading cost and keeps the cheapest.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{astar_path, optimal_heading, GridPath, ScalarField};
use crate::planner::{
    clip_to_cone, duration_heuristic, plan_trajectory, CameraModel, Trajectory, Waypoint, CONE_MARGIN,
};
use crate::rng::{self, Stream};
use crate::vehicle::{to_body_frame, DroneState};
use crate::world::{Cell, VoxelGrid};
use crate::{wrap_angle, Vec3};

/// Progress cost for candidates ending where the goal is unreachable.
pub const UNREACHABLE_COST: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub d_cutoff: f64,
    /// Number of intervals `M`; the cost samples `M + 1` times.
    pub n_cost_samples: usize,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.2,
            d_cutoff: 0.4,
            n_cost_samples: 20,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.lambda3 < 0.0 {
            return Err(Error::InvalidConfig("cost weights must be non-negative".into()));
        }
        if !(self.d_cutoff > 0.0) || self.n_cost_samples < 2 {
            return Err(Error::InvalidConfig("need d_cutoff > 0 and at least 2 cost samples".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub n_candidates: usize,
    /// Distance along the grid path to the biased sampling center, m.
    pub lookahead: f64,
    pub sigma_pos: f64,
    pub frac_biased: f64,
    pub yaw_noise: f64,
    /// Range band for the unbiased candidates, m.
    pub min_range: f64,
    pub max_range: f64,
    /// Obstacle clearance demanded of the guiding grid path, m.
    pub path_clearance: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_candidates: 100,
            lookahead: 1.5,
            sigma_pos: 0.3,
            frac_biased: 0.7,
            yaw_noise: 0.3,
            min_range: 0.5,
            max_range: 3.0,
            path_clearance: 0.3,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 || !(0.0..=1.0).contains(&self.frac_biased) {
            return Err(Error::InvalidConfig("need n_candidates >= 1 and frac_biased in [0, 1]".into()));
        }
        if !(self.min_range > 0.0 && self.min_range <= self.max_range) || self.sigma_pos < 0.0 || self.yaw_noise < 0.0 {
            return Err(Error::InvalidConfig(format!("bad sampler ranges: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpertConfig {
    pub weights: CostWeights,
    pub sampler: SamplerConfig,
    pub camera: CameraModel,
    /// Candidates whose trajectory comes closer than this to an obstacle
    /// are not chosen, m.
    pub min_clearance: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            sampler: SamplerConfig::default(),
            camera: CameraModel::default(),
            min_clearance: 0.25,
        }
    }
}

/// Spacing of the clearance check along a candidate trajectory, s.
const CLEARANCE_STEP: f64 = 0.05;

/// Smallest obstacle distance along `traj`, sampled every
/// `CLEARANCE_STEP` seconds and at the end.
pub fn trajectory_clearance(traj: &Trajectory, sdf: &ScalarField) -> f64 {
    let n = (traj.duration() / CLEARANCE_STEP).ceil() as usize;
    (0..=n)
        .map(|k| {
            let t = if k == n { traj.duration() } else { k as f64 * CLEARANCE_STEP };
            sdf.sample(&traj.eval(t, 0).expect("sample time inside trajectory").xyz)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBreakdown {
    pub j_obs: f64,
    pub j_dist: f64,
    pub j_angle: f64,
    pub total: f64,
}

/// Read-only privileged view of one episode: occupancy, obstacle distance
/// and the goal potential.
#[derive(Clone, Copy)]
pub struct Privileged<'a> {
    pub grid: &'a VoxelGrid,
    pub sdf: &'a ScalarField,
    pub potential: &'a ScalarField,
}

pub fn trajectory_cost(
    traj: &Trajectory,
    sdf: &ScalarField,
    potential: &ScalarField,
    weights: &CostWeights,
) -> CostBreakdown {
    let m = weights.n_cost_samples;
    let t_end = traj.duration();
    let mut j_obs: f64 = 0.0;
    let mut angle_sum = 0.0;
    let mut first = Vec3::zeros();
    let mut last = Vec3::zeros();
    for k in 0..=m {
        let t = if k == m { t_end } else { k as f64 * t_end / m as f64 };
        let x = traj.eval(t, 0).expect("sample time inside trajectory");
        if k == 0 {
            first = x.xyz;
        }
        last = x.xyz;
        j_obs = j_obs.max(weights.d_cutoff - sdf.sample(&x.xyz));
        if let Ok(heading) = optimal_heading(potential, &x.xyz) {
            angle_sum += wrap_angle(x.psi - heading).abs();
        }
    }
    let end = potential.sample(&last);
    let j_dist = if end.is_finite() {
        let start = potential.sample_finite(&first);
        let start = if start.is_finite() { start } else { 0.0 };
        end * end - start * start
    } else {
        UNREACHABLE_COST
    };
    let j_angle = angle_sum / (m + 1) as f64;
    CostBreakdown {
        j_obs,
        j_dist,
        j_angle,
        total: weights.lambda1 * j_obs + weights.lambda2 * j_dist + weights.lambda3 * j_angle,
    }
}

/// Point `dist` meters along the polyline `pts`, or its end.
fn along(pts: &[Vec3], dist: f64) -> Vec3 {
    let mut left = dist;
    for w in pts.windows(2) {
        let seg = (w[1] - w[0]).norm();
        if seg >= left && seg > 0.0 {
            return w[0] + (w[1] - w[0]) * (left / seg);
        }
        left -= seg;
    }
    *pts.last().expect("nonempty polyline")
}

/// Body-frame candidate waypoints around the grid path, clipped into the
/// camera cone. The path polyline runs from the vehicle through the cell
/// centers after the first and ends at `goal` when given.
pub fn sample_candidates(
    state: &DroneState,
    path: &GridPath,
    grid: &VoxelGrid,
    goal: Option<&Vec3>,
    cam: &CameraModel,
    cfg: &SamplerConfig,
    rng: &mut Stream,
) -> Result<Vec<Waypoint>> {
    if path.cells.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut pts = vec![state.p];
    pts.extend(path.cells.iter().skip(1).map(|c| grid.center(*c)));
    if let Some(g) = goal {
        pts.push(*g);
    }
    let center = along(&pts, cfg.lookahead);
    let n_biased = (cfg.frac_biased * cfg.n_candidates as f64).floor() as usize;
    let half_h = cam.fov_h / 2.0 - CONE_MARGIN;
    let half_v = cam.fov_v / 2.0 - CONE_MARGIN;
    let mut out = Vec::with_capacity(cfg.n_candidates);
    for i in 0..cfg.n_candidates {
        let body = if i < n_biased {
            let jitter = Vec3::new(
                rng::normal(rng, cfg.sigma_pos),
                rng::normal(rng, cfg.sigma_pos),
                rng::normal(rng, cfg.sigma_pos),
            );
            to_body_frame(&(center + jitter - state.p), state)
        } else {
            let r = rng::uniform(rng, cfg.min_range, cfg.max_range);
            let az = rng::uniform(rng, -half_h, half_h);
            let el = rng::uniform(rng, -cam.pitch - half_v, -cam.pitch + half_v);
            Vec3::new(r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin())
        };
        let body = if body.norm() < 1e-6 {
            Vec3::new(cfg.min_range, 0.0, 0.0)
        } else {
            body
        };
        let clipped = clip_to_cone(&Waypoint::body(body, 0.0), cam, CONE_MARGIN)?;
        let yaw = clipped.w.y.atan2(clipped.w.x) + rng::normal(rng, cfg.yaw_noise);
        out.push(Waypoint::body(clipped.w, yaw));
    }
    Ok(out)
}

/// Free cell used as the grid-path start for a vehicle at `p`: its own
/// cell, or the nearest free neighbor when the center has drifted into an
/// occupied cell.
pub fn start_cell(grid: &VoxelGrid, p: &Vec3) -> Option<Cell> {
    let c = grid.cell_at(&grid.clamp_to_hull(p))?;
    if !grid.occupied(c) {
        return Some(c);
    }
    grid.neighbors26(c)
        .filter(|n| !grid.occupied(*n))
        .min_by(|a, b| {
            let da = (grid.center(*a) - p).norm();
            let db = (grid.center(*b) - p).norm();
            da.total_cmp(&db).then_with(|| grid.index(*a).cmp(&grid.index(*b)))
        })
}

/// Grid path from the vehicle to the goal. The clearance requirement is
/// relaxed to what the start cell offers, then dropped entirely.
pub fn guide_path(world: &Privileged, p: &Vec3, goal: &Vec3, clearance: f64) -> Result<GridPath> {
    let start = start_cell(world.grid, p).ok_or(Error::NoPath { clearance })?;
    let target = world.grid.cell_at(goal).ok_or(Error::GoalInObstacle)?;
    let relaxed = clearance.min(world.sdf.value(start));
    astar_path(world.grid, world.sdf, start, target, relaxed)
        .or_else(|_| astar_path(world.grid, world.sdf, start, target, 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpertChoice {
    /// Selected waypoint in the world frame.
    pub waypoint: Waypoint,
    pub cost: CostBreakdown,
    pub index: usize,
    pub trajectory: Trajectory,
}

/// Lowest-cost candidate among those with a reachable endpoint and a
/// trajectory keeping `min_clearance` (or the current clearance, if
/// smaller), ties to the lower index.
pub fn expert_waypoint(
    state: &DroneState,
    world: &Privileged,
    goal: &Vec3,
    cfg: &ExpertConfig,
    rng: &mut Stream,
) -> Result<ExpertChoice> {
    let path = guide_path(world, &state.p, goal, cfg.sampler.path_clearance)?;
    let candidates = sample_candidates(state, &path, world.grid, Some(goal), &cfg.camera, &cfg.sampler, rng)?;
    let flat = state.flat();
    let floor = cfg.min_clearance.min(world.sdf.sample(&state.p));
    let scored: Vec<Result<(Waypoint, Trajectory, CostBreakdown, bool)>> = candidates
        .par_iter()
        .map(|c| {
            let w = c.to_world(&flat);
            let traj = plan_trajectory(&flat, &w, duration_heuristic(&flat, &w))?;
            let cost = trajectory_cost(&traj, world.sdf, world.potential, &cfg.weights);
            let usable = cost.j_dist != UNREACHABLE_COST && trajectory_clearance(&traj, world.sdf) >= floor;
            Ok((w, traj, cost, usable))
        })
        .collect();
    let mut best: Option<(usize, Waypoint, Trajectory, CostBreakdown)> = None;
    for (i, s) in scored.into_iter().enumerate() {
        let (w, traj, cost, usable) = s?;
        if usable && best.as_ref().is_none_or(|b| cost.total < b.3.total) {
            best = Some((i, w, traj, cost));
        }
    }
    let (index, waypoint, trajectory, cost) = best.ok_or(Error::AllCandidatesUnreachable)?;
    Ok(ExpertChoice {
        waypoint,
        cost,
        index,
        trajectory,
    })
}

/// Turn in place toward the guide path for when
/// no candidate is usable. The returned waypoint is in the world frame.
pub fn recovery_waypoint(state: &DroneState, world: &Privileged, goal: &Vec3, cfg: &ExpertConfig) -> Result<Waypoint> {
    let path = guide_path(world, &state.p, goal, cfg.sampler.path_clearance)?;
    let mut pts = vec![state.p];
    pts.extend(path.cells.iter().skip(1).map(|c| world.grid.center(*c)));
    pts.push(*goal);
    let d = along(&pts, cfg.sampler.lookahead) - state.p;
    let turn = if d.x.hypot(d.y) > 1e-9 {
        wrap_angle(d.y.atan2(d.x) - state.psi)
    } else {
        0.0
    };
    Ok(Waypoint::world(state.p, state.psi + turn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_sdf, fmm_potential};
    use crate::planner::FlatState;
    use crate::world::{gen_scene, SceneKind, ScenePreset};

    fn room() -> (VoxelGrid, ScalarField) {
        let g = gen_scene(1, ScenePreset::new(SceneKind::Empty, 0.0), [40, 40, 20], 0.25).unwrap().0;
        let sdf = build_sdf(&g);
        (g, sdf)
    }

    #[test]
    fn hinge_is_zero_when_clear() {
        let (g, sdf) = room();
        let goal = g.center([28, 20, 10]);
        let pot = fmm_potential(&g, &goal).unwrap();
        let s = FlatState::at_rest(g.center([16, 20, 10]), 0.0);
        let traj = plan_trajectory(&s, &Waypoint::world(g.center([20, 20, 10]), 0.0), 2.0).unwrap();
        let c = trajectory_cost(&traj, &sdf, &pot, &CostWeights::default());
        assert_eq!(c.j_obs, 0.0);
        assert!(c.j_dist < 0.0);
        let w = CostWeights::default();
        assert_eq!(c.total, w.lambda1 * c.j_obs + w.lambda2 * c.j_dist + w.lambda3 * c.j_angle);
        // Flying straight at the goal with the nose on the descent heading.
        assert!(c.j_angle < 0.05, "{c:?}");
    }

    #[test]
    fn hinge_and_progress_arithmetic() {
        // Constant fields make each term easy to read off.
        let (g, _) = room();
        let traj = plan_trajectory(
            &FlatState::at_rest(Vec3::new(4.0, 5.0, 2.5), 0.0),
            &Waypoint::world(Vec3::new(5.0, 5.0, 2.5), 0.0),
            2.0,
        )
        .unwrap();
        let sdf = ScalarField::new(&g, vec![0.1; g.len()]);
        let pot = ScalarField::new(
            &g,
            (0..g.len())
                .map(|i| {
                    let x = g.center(g.cell_of_index(i)).x;
                    // 3 at x = 4, 1 at x = 5.
                    11.0 - 2.0 * x
                })
                .collect(),
        );
        let c = trajectory_cost(&traj, &sdf, &pot, &CostWeights::default());
        assert!((c.j_obs - 0.3).abs() < 1e-12);
        assert!((c.j_dist + 8.0).abs() < 1e-9);
    }

    #[test]
    fn sampler_counts_and_determinism() {
        let (g, sdf) = room();
        let goal = Vec3::new(7.0, 5.0, 2.5);
        let pot = fmm_potential(&g, &goal).unwrap();
        let world = Privileged {
            grid: &g,
            sdf: &sdf,
            potential: &pot,
        };
        let s = DroneState::at_rest(Vec3::new(4.0, 5.0, 2.5), 0.3);
        let path = guide_path(&world, &s.p, &goal, 0.3).unwrap();
        let cam = CameraModel::default();
        let cfg = SamplerConfig::default();
        let a = sample_candidates(&s, &path, &g, Some(&goal), &cam, &cfg, &mut rng::stream(4)).unwrap();
        let b = sample_candidates(&s, &path, &g, Some(&goal), &cam, &cfg, &mut rng::stream(4)).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        for w in &a {
            let az = w.w.y.atan2(w.w.x);
            let el = w.w.z.atan2(w.w.x.hypot(w.w.y));
            assert!(az.abs() <= cam.fov_h / 2.0 - CONE_MARGIN + 1e-12);
            assert!(el.abs() <= cam.fov_v / 2.0 - CONE_MARGIN + 1e-12);
        }
        let degenerate = SamplerConfig {
            frac_biased: 1.0,
            sigma_pos: 0.0,
            yaw_noise: 0.0,
            ..cfg
        };
        let c = sample_candidates(&s, &path, &g, Some(&goal), &cam, &degenerate, &mut rng::stream(4)).unwrap();
        assert!(c.iter().all(|w| *w == c[0]));
        assert!(matches!(
            sample_candidates(
                &s,
                &GridPath {
                    cells: vec![],
                    length: 0.0
                },
                &g,
                None,
                &cam,
                &cfg,
                &mut rng::stream(4)
            ),
            Err(Error::EmptyPath)
        ));
    }

    #[test]
    fn polyline_walk() {
        let pts = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 0.0)];
        assert_eq!(along(&pts, 0.5), Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(along(&pts, 2.0), Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(along(&pts, 9.0), pts[2]);
    }
}
