mod common;

use common::tracking_error;
use waypt3d::fields::build_sdf;
use waypt3d::planner::{duration_heuristic, plan_trajectory, Waypoint, V_MAX};
use waypt3d::rng;
use waypt3d::vehicle::{simulate_horizon, DroneState, HorizonEvent, PidGains, SimConfig};
use waypt3d::world::{gen_scene, SceneKind, ScenePreset, VoxelGrid};
use waypt3d::Vec3;

fn empty_room() -> VoxelGrid {
    gen_scene(3, ScenePreset::new(SceneKind::Empty, 0.0), [40, 40, 20], 0.25).unwrap().0
}

#[test]
fn horizon_in_empty_room_has_25_states() {
    let g = empty_room();
    let sdf = build_sdf(&g);
    let s = DroneState::at_rest(Vec3::new(3.0, 5.0, 2.5), 0.0);
    let w = Waypoint::world(Vec3::new(5.0, 5.0, 2.5), 0.0);
    let traj = plan_trajectory(&s.flat(), &w, duration_heuristic(&s.flat(), &w)).unwrap();
    let h = simulate_horizon(&s, &traj, &sdf, &SimConfig::default(), &PidGains::default());
    assert_eq!(h.event, HorizonEvent::Ok);
    assert_eq!(h.states.len(), 25);
    assert!((h.states[24].time - 0.5).abs() < 1e-12);
    for st in &h.states {
        assert!(sdf.sample(&st.p) >= 0.1);
    }
}

#[test]
fn flying_into_slab_collides() {
    let mut g = empty_room();
    for y in 0..40 {
        for z in 0..20 {
            g.set([20, y, z], true);
        }
    }
    let sdf = build_sdf(&g);
    let s = DroneState::at_rest(Vec3::new(4.0, 5.0, 2.5), 0.0);
    let w = Waypoint::world(Vec3::new(6.5, 5.0, 2.5), 0.0);
    let traj = plan_trajectory(&s.flat(), &w, 3.0).unwrap();
    let cfg = SimConfig {
        horizon: 5.0,
        ..SimConfig::default()
    };
    let h = simulate_horizon(&s, &traj, &sdf, &cfg, &PidGains::default());
    assert_eq!(h.event, HorizonEvent::Collision);
    assert!(sdf.sample(&h.states.last().unwrap().p) < 0.1);
    for st in &h.states[..h.states.len() - 1] {
        assert!(sdf.sample(&st.p) >= 0.1);
    }
}

#[test]
fn tracking_error_below_ten_centimeters() {
    let mut r = rng::stream(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dir = Vec3::new(rng::normal(&mut r, 1.0), rng::normal(&mut r, 1.0), rng::normal(&mut r, 1.0)).normalize();
        let d = rng::uniform(&mut r, 0.05, 2.0);
        let s = DroneState::at_rest(Vec3::new(5.0, 5.0, 2.5), rng::uniform(&mut r, -3.0, 3.0));
        let w = Waypoint::world(s.p + d * dir, rng::uniform(&mut r, -3.0, 3.0));
        let traj = plan_trajectory(&s.flat(), &w, duration_heuristic(&s.flat(), &w)).unwrap();
        worst = worst.max(tracking_error(&s, &traj, 0.02));
    }
    assert!(worst < 0.1, "worst tracking error {worst}");
}

#[test]
fn simulation_is_deterministic_and_bounded() {
    let g = gen_scene(5, ScenePreset::new(SceneKind::Corner, 0.5), [40, 40, 20], 0.25).unwrap().0;
    let sdf = build_sdf(&g);
    let s = DroneState::at_rest(Vec3::new(2.0, 2.0, 2.0), 0.4);
    let w = Waypoint::world(Vec3::new(3.5, 3.0, 2.2), -1.0);
    let traj = plan_trajectory(&s.flat(), &w, 1.5).unwrap();
    let cfg = SimConfig::default();
    let a = simulate_horizon(&s, &traj, &sdf, &cfg, &PidGains::default());
    let b = simulate_horizon(&s, &traj, &sdf, &cfg, &PidGains::default());
    assert_eq!(a, b);
    assert!(a.states.iter().all(|x| x.v.norm() <= V_MAX + 1e-12));
}
