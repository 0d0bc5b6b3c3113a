//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use waypt3d::world::{Cell, VoxelGrid};

/// 26-connected Dijkstra distances (meters) from `source` over cells
/// accepted by `passable`. Distances are tracked as step counts per kind
/// and converted at the end, so equal-length routes compare bit-exactly.
pub fn dijkstra26(grid: &VoxelGrid, source: Cell, passable: impl Fn(Cell) -> bool) -> Vec<f64> {
    let n = grid.len();
    let h = grid.voxel();
    let weight = [1.0, 2f64.sqrt(), 3f64.sqrt()];
    let mut dist = vec![f64::INFINITY; n];
    let mut counts = vec![[0u64; 3]; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let si = grid.index(source);
    dist[si] = 0.0;
    heap.push(Reverse((Key(0.0), si)));
    while let Some(Reverse((Key(d), i))) = heap.pop() {
        if done[i] {
            continue;
        }
        done[i] = true;
        let c = grid.cell_of_index(i);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let k = (dx != 0) as usize + (dy != 0) as usize + (dz != 0) as usize;
                    if k == 0 {
                        continue;
                    }
                    let nb = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                    if (0..3).any(|a| nb[a] < 0 || nb[a] >= grid.dims()[a] as i64) {
                        continue;
                    }
                    let nb = [nb[0] as usize, nb[1] as usize, nb[2] as usize];
                    if !passable(nb) {
                        continue;
                    }
                    let j = grid.index(nb);
                    let nd = d + weight[k - 1];
                    if nd < dist[j] {
                        dist[j] = nd;
                        let mut cnt = counts[i];
                        cnt[k - 1] += 1;
                        counts[j] = cnt;
                        heap.push(Reverse((Key(nd), j)));
                    }
                }
            }
        }
    }
    dist.iter()
        .zip(&counts)
        .map(|(d, c)| {
            if d.is_finite() {
                h * (c[0] as f64 + c[1] as f64 * 2f64.sqrt() + c[2] as f64 * 3f64.sqrt())
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

#[derive(PartialEq, PartialOrd, Clone, Copy)]
pub struct Key(pub f64);
impl Eq for Key {}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// O(n * m) squared distance (cell units) to the nearest occupied center.
pub fn brute_force_sdf2(grid: &VoxelGrid) -> Vec<u64> {
    let occupied: Vec<Cell> = (0..grid.len())
        .filter(|&i| grid.occupied_index(i))
        .map(|i| grid.cell_of_index(i))
        .collect();
    (0..grid.len())
        .map(|i| {
            let c = grid.cell_of_index(i);
            occupied
                .iter()
                .map(|o| {
                    (0..3)
                        .map(|a| (c[a] as i64 - o[a] as i64).pow(2) as u64)
                        .sum::<u64>()
                })
                .min()
                .unwrap_or(u64::MAX)
        })
        .collect()
}

/// Random occupancy grid with the given density.
pub fn random_grid(seed: u64, dims: [usize; 3], density: f64) -> VoxelGrid {
    let mut r = waypt3d::rng::stream(seed);
    let cells = (0..dims[0] * dims[1] * dims[2])
        .map(|_| waypt3d::rng::bernoulli(&mut r, density))
        .collect();
    VoxelGrid::with_cells(dims, 0.25, waypt3d::Vec3::zeros(), cells).unwrap()
}

/// Largest per-layer relative error between analytic parameter gradients
/// and central finite differences of the loss, over one random minibatch.
pub fn gradient_check(seed: u64, dims: &[usize], batch: usize) -> f64 {
    use ndarray::Array2;
    use waypt3d::learner::init_policy;
    use waypt3d::rng;

    let mut r = rng::stream(seed ^ 0x5eed);
    let mut p = init_policy(seed, dims).unwrap();
    for b in &mut p.biases {
        b.mapv_inplace(|_| rng::uniform(&mut r, -0.5, 0.5));
    }
    let n_in = dims[0];
    let n_out = *dims.last().unwrap();
    let x = Array2::from_shape_simple_fn((batch, n_in), || rng::uniform(&mut r, -2.0, 2.0));
    let y = Array2::from_shape_simple_fn((batch, n_out), || rng::uniform(&mut r, -1.0, 1.0));
    let (_, g) = p.loss_and_grads(x.view(), y.view()).unwrap();
    let loss = |q: &waypt3d::learner::MlpPolicy| q.loss_and_grads(x.view(), y.view()).unwrap().0;
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let rel = |a: &[f64], n: &[f64]| {
        let diff = a.iter().zip(n).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|u| u * u).sum::<f64>().sqrt();
        let nn = n.iter().map(|u| u * u).sum::<f64>().sqrt();
        diff / na.max(nn).max(1e-12)
    };
    for l in 0..p.weights.len() {
        let mut num = Vec::new();
        for k in 0..p.weights[l].len() {
            let mut q = p.clone();
            let v = q.weights[l].as_slice_mut().unwrap();
            let w0 = v[k];
            v[k] = w0 + eps;
            let up = loss(&q);
            q.weights[l].as_slice_mut().unwrap()[k] = w0 - eps;
            num.push((up - loss(&q)) / (2.0 * eps));
        }
        worst = worst.max(rel(g.dw[l].as_slice().unwrap(), &num));
        let mut num = Vec::new();
        for k in 0..p.biases[l].len() {
            let mut q = p.clone();
            q.biases[l][k] += eps;
            let up = loss(&q);
            q.biases[l][k] -= 2.0 * eps;
            num.push((up - loss(&q)) / (2.0 * eps));
        }
        worst = worst.max(rel(g.db[l].as_slice().unwrap(), &num));
    }
    worst
}

/// Train on 100 copies of one random record with batch 64 until `steps`
/// optimizer steps have run; returns the final dataset MSE.
pub fn overfit_one_record(seed: u64, steps: usize, lr: f64) -> f64 {
    use waypt3d::learner::{init_policy, train, Dataset, TrainConfig, DEFAULT_DIMS};
    use waypt3d::rng;

    let mut r = rng::stream(seed);
    let obs: Vec<f64> = (0..DEFAULT_DIMS[0]).map(|_| rng::uniform(&mut r, 0.0, 5.0)).collect();
    let label = [1.2, -0.4, 0.3, 0.6];
    let mut d = Dataset::new(obs.len());
    for _ in 0..100 {
        d.push(&obs, label).unwrap();
    }
    let p = init_policy(seed, &DEFAULT_DIMS).unwrap();
    let cfg = TrainConfig {
        lr,
        epochs: steps / 2,
        seed,
        ..TrainConfig::default()
    };
    let (q, _) = train(&p, &d, &cfg).unwrap();
    q.loss(&d).unwrap()
}

/// Random planner instance: moving start, nearby waypoint, duration in
/// the allowed band.
pub fn random_instance(r: &mut waypt3d::rng::Stream) -> (waypt3d::planner::FlatState, waypt3d::planner::Waypoint, f64) {
    use waypt3d::planner::{FlatState, Waypoint, T_MAX, T_MIN, V_MAX};
    use waypt3d::rng::{self, Stream};
    use waypt3d::Vec3;

    let u = |r: &mut Stream, a: f64| rng::uniform(r, -a, a);
    let mut v = Vec3::new(u(r, 1.0), u(r, 1.0), u(r, 1.0));
    if v.norm() > V_MAX {
        v *= V_MAX / v.norm();
    }
    let s = FlatState {
        p: Vec3::new(u(r, 5.0), u(r, 5.0), u(r, 2.0)),
        psi: u(r, std::f64::consts::PI),
        v,
        psi_dot: u(r, 2.0),
    };
    let w = Waypoint::world(s.p + Vec3::new(u(r, 3.0), u(r, 3.0), u(r, 1.0)), u(r, 4.0));
    (s, w, rng::uniform(r, T_MIN, T_MAX))
}


pub fn boundary_residual(
    s: &waypt3d::planner::FlatState,
    w: &waypt3d::planner::Waypoint,
    traj: &waypt3d::planner::Trajectory,
) -> f64 {
    use waypt3d::wrap_angle;

    let t = traj.duration();
    let e = |t, k| traj.eval(t, k).unwrap();
    let mut worst: f64 = 0.0;
    worst = worst.max((e(0.0, 0).xyz - s.p).amax());
    worst = worst.max((e(0.0, 1).xyz - s.v).amax());
    worst = worst.max(e(0.0, 2).xyz.amax()).max(e(0.0, 3).xyz.amax());
    worst = worst.max((e(t, 0).xyz - w.w).amax());
    for k in 1..4 {
        worst = worst.max(e(t, k).xyz.amax());
    }
    worst = worst.max((e(0.0, 0).psi - s.psi).abs());
    worst = worst.max((e(0.0, 1).psi - s.psi_dot).abs());
    worst = worst.max(wrap_angle(e(t, 0).psi - w.psi).abs());
    worst.max(e(t, 1).psi.abs())
}


/// Snap-minimizing degree-11 polynomial under the same boundary conditions,
/// on normalized time with a 200-interval Simpson rule, solved through the
/// KKT system. Returns the snap cost in real time.
pub fn qp_snap_cost(p0: f64, v0: f64, p1: f64, duration: f64) -> f64 {
    use nalgebra::{DMatrix, DVector};

    const N: usize = 12;
    let falling = |k: usize, m: usize| (0..m).map(|i| (k - i) as f64).product::<f64>();
    let row = |tau: f64, m: usize| -> DVector<f64> {
        DVector::from_fn(N, |k, _| if k < m { 0.0 } else { falling(k, m) * tau.powi((k - m) as i32) })
    };
    let intervals = 200;
    let mut q = DMatrix::<f64>::zeros(N, N);
    for i in 0..=intervals {
        let tau = i as f64 / intervals as f64;
        let wgt = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } / (3.0 * intervals as f64);
        let s = row(tau, 4);
        q += wgt * &s * s.transpose();
    }
    // Boundary values in normalized time: d^m/dtau^m = T^m d^m/dt^m.
    let mut a = DMatrix::<f64>::zeros(8, N);
    let b = DVector::from_vec(vec![p0, v0 * duration, 0.0, 0.0, p1, 0.0, 0.0, 0.0]);
    for m in 0..4 {
        a.set_row(m, &row(0.0, m).transpose());
        a.set_row(4 + m, &row(1.0, m).transpose());
    }
    let mut kkt = DMatrix::<f64>::zeros(N + 8, N + 8);
    kkt.view_mut((0, 0), (N, N)).copy_from(&(2.0 * &q));
    kkt.view_mut((0, N), (N, 8)).copy_from(&a.transpose());
    kkt.view_mut((N, 0), (8, N)).copy_from(&a);
    let mut rhs = DVector::<f64>::zeros(N + 8);
    rhs.rows_mut(N, 8).copy_from(&b);
    let sol = kkt.lu().solve(&rhs).expect("kkt solvable");
    let c = sol.rows(0, N).into_owned();
    (c.transpose() * &q * &c)[(0, 0)] / duration.powi(7)
}


/// Largest distance between the tracked position and the reference over
/// the whole trajectory, stepping at `dt`.
pub fn tracking_error(
    start: &waypt3d::vehicle::DroneState,
    traj: &waypt3d::planner::Trajectory,
    dt: f64,
) -> f64 {
    use waypt3d::vehicle::{step_pid, PidGains};

    let gains = PidGains::default();
    let n = (traj.duration() / dt).round() as usize;
    let mut s = *start;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        s = step_pid(&s, traj, k as f64 * dt, &gains, dt);
        let t = ((k + 1) as f64 * dt).min(traj.duration());
        worst = worst.max((s.p - traj.eval(t, 0).unwrap().xyz).norm());
    }
    worst
}

