//! Episode orchestration: perceive, pick a waypoint, clip, plan, track for
//! one horizon, repeat. Also evaluation metrics and their CSV forms.

mod csv;

pub use csv::{episodes_csv, metrics_csv, parse_trace_csv, trace_csv, EPISODES_HEADER, METRICS_HEADER, TRACE_HEADER};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expert::{expert_waypoint, recovery_waypoint, ExpertConfig, Privileged};
use crate::fields::{astar_path, build_sdf, fmm_potential, ScalarField};
use crate::learner::MlpPolicy;
use crate::perception::{make_observation, render_depth};
use crate::planner::{clip_to_cone, duration_heuristic, plan_trajectory, Waypoint, CONE_MARGIN};
use crate::rng::{self, Stream, MIXING_SALT};
use crate::vehicle::{simulate_horizon, DroneState, HorizonEvent, PidGains, SimConfig};
use crate::world::VoxelGrid;
use crate::Vec3;

/// Clearance required at episode start and goal, m.
pub const ENDPOINT_CLEARANCE: f64 = 0.3;
pub const MIN_GEODESIC: f64 = 2.0;
pub const MAX_GEODESIC: f64 = 8.0;
pub const MAX_ATTEMPTS: usize = 10_000;

/// An occupancy grid with its obstacle distance field.
#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub grid: VoxelGrid,
    pub sdf: ScalarField,
}

impl Scene {
    pub fn new(name: impl Into<String>, grid: VoxelGrid) -> Self {
        let sdf = build_sdf(&grid);
        Self {
            name: name.into(),
            grid,
            sdf,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSpec {
    /// Index into the scene set.
    pub scene: usize,
    pub start: DroneState,
    pub goal: Vec3,
    pub seed: u64,
    pub max_time: f64,
    pub geodesic: f64,
    /// Length of the clearance-respecting grid path, m.
    pub astar_len: f64,
}

/// The single success predicate.
pub fn reached_goal(p: &Vec3, goal: &Vec3, radius: f64) -> bool {
    (p - goal).norm() <= radius
}

/// Rejection-sample a start/goal pair with clearance, reachability and a
/// geodesic distance in range. Also returns the goal potential.
pub fn sample_episode_spec(
    scene: &Scene,
    scene_index: usize,
    seed: u64,
    max_time: f64,
    r: &mut Stream,
) -> Result<(EpisodeSpec, ScalarField)> {
    let g = &scene.grid;
    let cells: Vec<usize> = (0..g.len())
        .filter(|&i| !g.occupied_index(i) && scene.sdf.value_index(i) >= ENDPOINT_CLEARANCE)
        .collect();
    let no_valid = |attempts| Error::NoValidEpisode { attempts };
    if cells.len() < 2 {
        return Err(no_valid(0));
    }
    let component = components(g, &scene.sdf, ENDPOINT_CLEARANCE);
    for _ in 0..MAX_ATTEMPTS {
        let a = cells[rng::below(r, cells.len())];
        let b = cells[rng::below(r, cells.len())];
        let yaw = rng::uniform(r, -std::f64::consts::PI, std::f64::consts::PI);
        let (ca, cb) = (g.cell_of_index(a), g.cell_of_index(b));
        let (start, goal) = (g.center(ca), g.center(cb));
        if a == b || component[a] != component[b] || (start - goal).norm() > MAX_GEODESIC {
            continue;
        }
        let potential = fmm_potential(g, &goal)?;
        let geodesic = potential.value_index(a);
        if !(MIN_GEODESIC..=MAX_GEODESIC).contains(&geodesic) {
            continue;
        }
        let path = astar_path(g, &scene.sdf, ca, cb, ENDPOINT_CLEARANCE)?;
        let spec = EpisodeSpec {
            scene: scene_index,
            start: DroneState::at_rest(start, yaw),
            goal,
            seed,
            max_time,
            geodesic,
            astar_len: path.length,
        };
        return Ok((spec, potential));
    }
    Err(no_valid(MAX_ATTEMPTS))
}

/// 26-connected component labels over cells with at least `clearance`;
/// other cells get `usize::MAX`.
fn components(g: &VoxelGrid, sdf: &ScalarField, clearance: f64) -> Vec<usize> {
    let ok = |i: usize| !g.occupied_index(i) && sdf.value_index(i) >= clearance;
    let mut label = vec![usize::MAX; g.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for seed in 0..g.len() {
        if !ok(seed) || label[seed] != usize::MAX {
            continue;
        }
        label[seed] = next;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            for n in g.neighbors26(g.cell_of_index(i)) {
                let j = g.index(n);
                if ok(j) && label[j] == usize::MAX {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Who picks the waypoint at each replanning step.
#[derive(Clone, Copy, Debug)]
pub enum Actor<'a> {
    Expert,
    Policy(&'a MlpPolicy),
    /// Expert with probability `alpha`, policy otherwise, drawn per step.
    Mixed { policy: &'a MlpPolicy, alpha: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub gains: PidGains,
    pub expert: ExpertConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.gains.validate()?;
        self.expert.weights.validate()?;
        self.expert.sampler.validate()?;
        self.expert.camera.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
    NoPath,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
            Outcome::NoPath => "no_path",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Outcome::Success, Outcome::Collision, Outcome::Timeout, Outcome::NoPath]
            .into_iter()
            .find(|o| o.as_str() == s)
    }
}

/// One replanning step: the state it started from and the executed
/// world-frame waypoint.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub state: DroneState,
    pub waypoint: Option<Waypoint>,
    pub event: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub time: f64,
    pub path_len: f64,
    pub astar_len: f64,
    /// Replanning rows followed by one row for the final state.
    pub trace: Vec<TraceRow>,
}

/// Observation vector and body-frame expert label for one step.
pub type Record = (Vec<f64>, [f64; 4]);

/// Fly one episode. When `records` is given, every replanning step appends
/// its observation with the expert's waypoint as the label.
pub fn run_episode(
    actor: &Actor,
    scene: &Scene,
    spec: &EpisodeSpec,
    potential: &ScalarField,
    cfg: &RunConfig,
    r: &mut Stream,
    mut records: Option<&mut Vec<Record>>,
) -> Result<EpisodeResult> {
    let world = Privileged {
        grid: &scene.grid,
        sdf: &scene.sdf,
        potential,
    };
    let cam = &cfg.expert.camera;
    let mut coin = rng::stream(spec.seed ^ MIXING_SALT);
    let mut state = spec.start;
    let mut trace = Vec::new();
    let mut path_len = 0.0;
    let mut local = Vec::new();
    let outcome = loop {
        if reached_goal(&state.p, &spec.goal, cfg.sim.goal_radius) {
            break Outcome::Success;
        }
        if state.time >= spec.max_time {
            break Outcome::Timeout;
        }
        let needs_obs = records.is_some() || !matches!(actor, Actor::Expert);
        let obs = if needs_obs {
            match render_depth(&scene.grid, &state, cam) {
                Ok(depth) => Some(make_observation(&state, &spec.goal, depth).to_vector()),
                Err(Error::CameraInObstacle) => break Outcome::Collision,
                Err(e) => return Err(e),
            }
        } else {
            match scene.grid.cell_at(&state.p) {
                Some(c) if !scene.grid.occupied(c) => None,
                _ => break Outcome::Collision,
            }
        };
        let use_expert = match actor {
            Actor::Expert => true,
            Actor::Policy(_) => false,
            Actor::Mixed { alpha, .. } => rng::bernoulli(&mut coin, *alpha),
        };
        let needs_expert = use_expert || records.is_some();
        let expert = if needs_expert {
            let choice = match expert_waypoint(&state, &world, &spec.goal, &cfg.expert, r) {
                Ok(c) => Ok(c.waypoint),
                Err(Error::AllCandidatesUnreachable) => recovery_waypoint(&state, &world, &spec.goal, &cfg.expert),
                Err(e) => Err(e),
            };
            match choice {
                Ok(w) => Some(w),
                Err(Error::NoPath { .. } | Error::GoalInObstacle) => break Outcome::NoPath,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let flat = state.flat();
        if let (Some(o), Some(c)) = (&obs, &expert) {
            if records.is_some() {
                local.push((o.clone(), c.to_body(&flat).to_array()));
            }
        }
        let body = match (use_expert, actor, &expert) {
            (true, _, Some(c)) => c.to_body(&flat),
            (_, Actor::Policy(p) | Actor::Mixed { policy: p, .. }, _) => {
                let out = p.forward(obs.as_ref().expect("observation rendered for policy"))?;
                Waypoint::body(Vec3::new(out[0], out[1], out[2]), out[3])
            }
            _ => unreachable!("expert chosen without an expert waypoint"),
        };
        let executed = if body.w.iter().all(|v| v.is_finite()) && body.psi.is_finite() {
            match clip_to_cone(&body, cam, CONE_MARGIN) {
                Ok(c) => c.to_world(&flat),
                Err(Error::ZeroWaypoint) => Waypoint::world(state.p, state.psi + body.psi),
                Err(e) => return Err(e),
            }
        } else {
            Waypoint::world(state.p, state.psi)
        };
        let (next, event) = advance(&state, &executed, scene, cfg)?;
        trace.push(TraceRow {
            state,
            waypoint: Some(executed),
            event: "replan".into(),
        });
        let mut prev = state.p;
        for s in &next {
            path_len += (s.p - prev).norm();
            prev = s.p;
        }
        state = next.last().copied().unwrap_or(state);
        if event == HorizonEvent::Collision {
            break Outcome::Collision;
        }
    };
    trace.push(TraceRow {
        state,
        waypoint: None,
        event: outcome.as_str().into(),
    });
    if let Some(out) = records.as_deref_mut() {
        if outcome != Outcome::NoPath {
            out.append(&mut local);
        } else {
            log::info!("episode seed {} has no expert path; {} records dropped", spec.seed, local.len());
        }
    }
    Ok(EpisodeResult {
        outcome,
        time: state.time,
        path_len,
        astar_len: spec.astar_len,
        trace,
    })
}

/// Plan to a world-frame waypoint and track it for one horizon.
fn advance(state: &DroneState, w: &Waypoint, scene: &Scene, cfg: &RunConfig) -> Result<(Vec<DroneState>, HorizonEvent)> {
    let flat = state.flat();
    let traj = plan_trajectory(&flat, w, duration_heuristic(&flat, w))?;
    let h = simulate_horizon(state, &traj, &scene.sdf, &cfg.sim, &cfg.gains);
    Ok((h.states, h.event))
}

/// Re-fly the recorded waypoints from the first trace state; returns the
/// state reached after each replanning row.
pub fn replay_trace(trace: &[TraceRow], scene: &Scene, cfg: &RunConfig) -> Result<Vec<DroneState>> {
    let mut out = Vec::new();
    let Some(first) = trace.first() else {
        return Ok(out);
    };
    let mut state = first.state;
    for row in trace {
        let Some(w) = &row.waypoint else { break };
        let (next, _) = advance(&state, w, scene, cfg)?;
        state = next.last().copied().unwrap_or(state);
        out.push(state);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub no_path: usize,
    pub success_rate: f64,
    /// Mean over successes; 0 when there are none.
    pub mean_time: f64,
    /// Mean executed-to-grid path length ratio over successes.
    pub mean_path_ratio: f64,
}

impl Metrics {
    pub fn from_results(results: &[EpisodeResult]) -> Self {
        let count = |o| results.iter().filter(|r| r.outcome == o).count();
        let wins: Vec<&EpisodeResult> = results.iter().filter(|r| r.outcome == Outcome::Success).collect();
        let mean = |f: &dyn Fn(&EpisodeResult) -> f64| {
            if wins.is_empty() {
                0.0
            } else {
                wins.iter().map(|r| f(r)).sum::<f64>() / wins.len() as f64
            }
        };
        let episodes = results.len();
        let successes = wins.len();
        Metrics {
            episodes,
            successes,
            collisions: count(Outcome::Collision),
            timeouts: count(Outcome::Timeout),
            no_path: count(Outcome::NoPath),
            success_rate: if episodes == 0 { 0.0 } else { successes as f64 / episodes as f64 },
            mean_time: mean(&|r| r.time),
            mean_path_ratio: mean(&|r| if r.astar_len > 0.0 { r.path_len / r.astar_len } else { 1.0 }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub specs: Vec<EpisodeSpec>,
    pub results: Vec<EpisodeResult>,
}

/// Run `n` episodes with seeds `seed ^ i`, cycling through `scenes`.
pub fn evaluate(actor: &Actor, scenes: &[Scene], n: usize, seed: u64, cfg: &RunConfig) -> Result<Evaluation> {
    if n == 0 || scenes.is_empty() {
        return Err(Error::InvalidConfig("evaluation needs at least one episode and one scene".into()));
    }
    cfg.validate()?;
    let runs: Vec<Result<(EpisodeSpec, EpisodeResult)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = seed ^ i as u64;
            let k = i % scenes.len();
            let mut r = rng::stream(s);
            let (spec, pot) = sample_episode_spec(&scenes[k], k, s, cfg.sim.timeout, &mut r)?;
            let res = run_episode(actor, &scenes[k], &spec, &pot, cfg, &mut r, None)?;
            Ok((spec, res))
        })
        .collect();
    let mut specs = Vec::with_capacity(n);
    let mut results = Vec::with_capacity(n);
    for run in runs {
        let (spec, res) = run?;
        specs.push(spec);
        results.push(res);
    }
    Ok(Evaluation {
        metrics: Metrics::from_results(&results),
        specs,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{gen_scene, SceneKind, ScenePreset};

    fn empty_scene() -> Scene {
        let (g, _) = gen_scene(1, ScenePreset::new(SceneKind::Empty, 0.0), [40, 40, 20], 0.25).unwrap();
        Scene::new("empty", g)
    }

    #[test]
    fn spec_invariants_hold() {
        let sc = empty_scene();
        let mut r = rng::stream(3);
        let (spec, pot) = sample_episode_spec(&sc, 0, 3, 60.0, &mut r).unwrap();
        assert!((MIN_GEODESIC..=MAX_GEODESIC).contains(&spec.geodesic));
        assert_eq!(pot.sample(&spec.start.p), spec.geodesic);
        assert!(sc.sdf.sample(&spec.start.p) >= 0.3 && sc.sdf.sample(&spec.goal) >= 0.3);
        let again = sample_episode_spec(&sc, 0, 3, 60.0, &mut rng::stream(3)).unwrap().0;
        assert_eq!(spec, again);
    }

    #[test]
    fn sealed_pockets_have_no_episode() {
        // Thin slabs every 5 cells leave only small closed rooms.
        let mut g = VoxelGrid::new([16, 16, 12], 0.25, Vec3::repeat(0.125)).unwrap();
        for i in 0..g.len() {
            let c = g.cell_of_index(i);
            if c.iter().any(|&v| v % 5 == 0) || c[0] == 15 || c[1] == 15 || c[2] == 11 {
                g.set(c, true);
            }
        }
        let sc = Scene::new("pockets", g);
        assert!(matches!(
            sample_episode_spec(&sc, 0, 1, 60.0, &mut rng::stream(1)),
            Err(Error::NoValidEpisode { .. })
        ));
    }

    #[test]
    fn metrics_partition_counts() {
        let row = |o| EpisodeResult {
            outcome: o,
            time: 2.0,
            path_len: 3.0,
            astar_len: 2.0,
            trace: vec![],
        };
        let m = Metrics::from_results(&[row(Outcome::Success), row(Outcome::Timeout), row(Outcome::Success)]);
        assert_eq!((m.episodes, m.successes, m.timeouts), (3, 2, 1));
        assert!((m.success_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.mean_path_ratio, 1.5);
        let all = Metrics::from_results(&[row(Outcome::Success)]);
        assert_eq!(all.success_rate, 1.0);
    }
}
