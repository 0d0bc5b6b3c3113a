use waypt3d::fields::build_sdf;
use waypt3d::perception::{pixel_ray, render_depth};
use waypt3d::planner::CameraModel;
use waypt3d::rng;
use waypt3d::vehicle::DroneState;
use waypt3d::world::{gen_scene, sample_free_point_in, SceneKind, ScenePreset, VoxelGrid};
use waypt3d::Vec3;

/// Entry parameter of the segment `p + dir * [t0, t1]` into the axis-aligned
/// box `[lo, hi]`, by the slab method.
fn slab_entry(p: &Vec3, dir: &Vec3, t0: f64, t1: f64, lo: &Vec3, hi: &Vec3) -> Option<f64> {
    let (mut a, mut b) = (t0, t1);
    for k in 0..3 {
        if dir[k] == 0.0 {
            if p[k] < lo[k] || p[k] > hi[k] {
                return None;
            }
            continue;
        }
        let u = (lo[k] - p[k]) / dir[k];
        let v = (hi[k] - p[k]) / dir[k];
        a = a.max(u.min(v));
        b = b.min(u.max(v));
    }
    (a <= b).then_some(a)
}

/// Distance to the first occupied cell by marching in steps of h/20. Each
/// step also tests the boxes of every cell its segment can touch, so thin
/// corner clips between samples are not skipped.
fn march(grid: &VoxelGrid, p: &Vec3, dir: &Vec3, max_range: f64) -> f64 {
    let h = grid.voxel();
    let step = h / 20.0;
    let dims = grid.dims();
    let mut t = 0.0;
    while t <= max_range {
        let t1 = t + step;
        let qa = grid.lattice_coords(&(p + dir * t));
        let qb = grid.lattice_coords(&(p + dir * t1));
        let mut best: Option<f64> = None;
        let lo: Vec<isize> = (0..3).map(|k| (qa[k].min(qb[k]) + 0.5).floor() as isize).collect();
        let hi: Vec<isize> = (0..3).map(|k| (qa[k].max(qb[k]) + 0.5).floor() as isize).collect();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let c = [x, y, z];
                    if (0..3).any(|k| c[k] < 0 || c[k] >= dims[k] as isize) {
                        return best.unwrap_or(max_range).min(max_range);
                    }
                    let cell = [x as usize, y as usize, z as usize];
                    if !grid.occupied(cell) {
                        continue;
                    }
                    let center = grid.center(cell);
                    let half = Vec3::repeat(h / 2.0);
                    if let Some(e) = slab_entry(p, dir, t, t1, &(center - half), &(center + half)) {
                        best = Some(best.map_or(e, |b: f64| b.min(e)));
                    }
                }
            }
        }
        if let Some(b) = best {
            return b.min(max_range);
        }
        t = t1;
    }
    max_range
}

#[test]
fn dda_agrees_with_ray_marching() {
    let cam = CameraModel {
        width: 12,
        height: 10,
        ..CameraModel::default()
    };
    let mut r = rng::stream(31);
    for pose in 0..100u64 {
        let kind = SceneKind::ALL[(pose % 6) as usize];
        let g = gen_scene(pose, ScenePreset::new(kind, 0.6), [32, 32, 16], 0.25).unwrap().0;
        let sdf = build_sdf(&g);
        let p = sample_free_point_in(&g, &sdf, &mut r, 0.25).unwrap()
            + Vec3::new(
                rng::uniform(&mut r, -0.1, 0.1),
                rng::uniform(&mut r, -0.1, 0.1),
                rng::uniform(&mut r, -0.1, 0.1),
            );
        let s = DroneState::at_rest(p, rng::uniform(&mut r, -3.14, 3.14));
        let img = render_depth(&g, &s, &cam).unwrap();
        for row in 0..cam.height {
            for col in 0..cam.width {
                let dir = pixel_ray(&cam, s.psi, row, col);
                let oracle = march(&g, &p, &dir, cam.max_range).min(cam.max_range);
                let got = img.at(row, col);
                assert!((got - oracle).abs() <= g.voxel(), "pose {pose} pixel {row},{col}: {got} vs {oracle}");
                assert!((0.0..=cam.max_range).contains(&got));
            }
        }
    }
}

#[test]
fn mirrored_scene_mirrors_image() {
    let (g, _) = gen_scene(12, ScenePreset::new(SceneKind::Mixed, 1.0), [40, 41, 20], 0.25).unwrap();
    let [nx, ny, nz] = g.dims();
    let mut m = g.clone();
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                m.set([x, ny - 1 - y, z], g.occupied([x, y, z]));
            }
        }
    }
    let axis = g.origin().y + (ny - 1) as f64 / 2.0 * g.voxel();
    let cam = CameraModel::default();
    let sdf = build_sdf(&g);
    let mut checked = 0;
    for x in [1.0, 2.3, 4.1, 6.0] {
        for z in [0.8, 1.6, 2.9] {
            let p = Vec3::new(x, axis, z);
            if sdf.sample(&p) < 0.2 {
                continue;
            }
            let s = DroneState::at_rest(p, 0.0);
            let a = render_depth(&g, &s, &cam).unwrap();
            let b = render_depth(&m, &s, &cam).unwrap();
            for row in 0..cam.height {
                for col in 0..cam.width {
                    assert_eq!(a.at(row, col), b.at(row, cam.width - 1 - col));
                }
            }
            checked += 1;
        }
    }
    assert!(checked >= 4);
}

#[test]
fn longer_range_never_shortens_pixels() {
    let g = gen_scene(4, ScenePreset::new(SceneKind::Corner, 0.5), [40, 40, 20], 0.25).unwrap().0;
    let sdf = build_sdf(&g);
    let mut r = rng::stream(2);
    for _ in 0..10 {
        let p = sample_free_point_in(&g, &sdf, &mut r, 0.3).unwrap();
        let s = DroneState::at_rest(p, rng::uniform(&mut r, -3.0, 3.0));
        let mut prev: Option<Vec<f64>> = None;
        for range in [1.0, 2.5, 5.0, 9.0] {
            let cam = CameraModel {
                max_range: range,
                ..CameraModel::default()
            };
            let img = render_depth(&g, &s, &cam).unwrap();
            if let Some(pv) = &prev {
                assert!(img.data.iter().zip(pv).all(|(a, b)| a >= b));
            }
            prev = Some(img.data);
        }
    }
}
