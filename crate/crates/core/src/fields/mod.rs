//! Privileged geometric fields over a voxel world: obstacle distance, goal
//! potential, descent headings, and clearance-aware grid paths.

mod astar;
mod fmm;
mod sdf;

pub use astar::{astar_path, GridPath};
pub use fmm::fmm_potential;
pub use sdf::{build_sdf, squared_distance_cells};

use crate::error::{Error, Result};
use crate::world::{Cell, VoxelGrid};
use crate::Vec3;

/// Marker for cells not reachable through free space.
pub const UNREACHABLE: f64 = f64::INFINITY;

/// Per-cell reals on the lattice of a [`VoxelGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    dims: [usize; 3],
    voxel: f64,
    origin: Vec3,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &VoxelGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field size must match grid");
        Self {
            dims: grid.dims(),
            voxel: grid.voxel(),
            origin: grid.origin(),
            values,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel(&self) -> f64 {
        self.voxel
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn value(&self, c: Cell) -> f64 {
        self.values[self.index(c)]
    }

    #[inline]
    pub fn value_index(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Base corner and fractional offsets for a trilinear lookup, with the
    /// point clamped to the hull of cell centers.
    fn corners(&self, p: &Vec3) -> ([usize; 3], [f64; 3]) {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a];
            let q = ((p[a] - self.origin[a]) / self.voxel).clamp(0.0, (n - 1) as f64);
            let i = (q.floor() as usize).min(n - 2);
            base[a] = i;
            frac[a] = q - i as f64;
        }
        (base, frac)
    }

    fn for_each_corner(&self, p: &Vec3, mut f: impl FnMut(f64, f64)) {
        let (base, frac) = self.corners(p);
        for k in 0..8 {
            let mut w = 1.0;
            let mut c = base;
            for a in 0..3 {
                if (k >> a) & 1 == 1 {
                    c[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w > 0.0 {
                f(w, self.value(c));
            }
        }
    }

    /// Trilinear interpolation, clamped to the lattice hull. Any
    /// contributing corner that is [`UNREACHABLE`] makes the result
    /// unreachable.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let mut acc = 0.0;
        let mut blocked = false;
        self.for_each_corner(p, |w, v| {
            if v.is_finite() {
                acc += w * v;
            } else {
                blocked = true;
            }
        });
        if blocked {
            UNREACHABLE
        } else {
            acc
        }
    }

    /// Trilinear interpolation over the finite corners only, renormalized.
    /// Unreachable only when every contributing corner is.
    pub fn sample_finite(&self, p: &Vec3) -> f64 {
        let mut acc = 0.0;
        let mut weight = 0.0;
        self.for_each_corner(p, |w, v| {
            if v.is_finite() {
                acc += w * v;
                weight += w;
            }
        });
        if weight > 0.0 {
            acc / weight
        } else {
            UNREACHABLE
        }
    }
}

/// Central-difference step for heading gradients, in voxels.
const HEADING_STEP: f64 = 0.5;

/// Horizontal descent direction of a potential at `p`, as a yaw angle in
/// `(-pi, pi]`.
pub fn optimal_heading(potential: &ScalarField, p: &Vec3) -> Result<f64> {
    let d = HEADING_STEP * potential.voxel;
    let mut g = [0.0; 2];
    for (a, ga) in g.iter_mut().enumerate() {
        let mut e = Vec3::zeros();
        e[a] = d;
        let hi = potential.sample(&(p + e));
        let lo = potential.sample(&(p - e));
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::UndefinedHeading);
        }
        *ga = (hi - lo) / (2.0 * d);
    }
    if g[0].hypot(g[1]) < 1e-9 {
        return Err(Error::UndefinedHeading);
    }
    Ok(crate::wrap_angle((-g[1]).atan2(-g[0])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{gen_scene, SceneKind, ScenePreset};
    use std::f64::consts::FRAC_PI_2;

    fn empty() -> VoxelGrid {
        gen_scene(
            1,
            ScenePreset::new(SceneKind::Empty, 0.0),
            [40, 40, 20],
            0.25,
        )
        .unwrap()
        .0
    }

    #[test]
    fn trilinear_reproduces_linear_field() {
        let g = empty();
        let values: Vec<f64> = (0..g.len())
            .map(|i| {
                let c = g.center(g.cell_of_index(i));
                1.0 + 2.0 * c.x - 0.5 * c.y + 0.25 * c.z
            })
            .collect();
        let f = ScalarField::new(&g, values);
        for p in [Vec3::new(1.1, 2.37, 0.9), Vec3::new(4.01, 3.3, 2.2)] {
            let expect = 1.0 + 2.0 * p.x - 0.5 * p.y + 0.25 * p.z;
            assert!((f.sample(&p) - expect).abs() < 1e-12);
        }
        // Clamped outside the hull.
        let outside = f.sample(&Vec3::new(-5.0, 0.125, 0.125));
        assert!((outside - f.value([0, 0, 0])).abs() < 1e-12);
    }

    #[test]
    fn unreachable_corner_blocks_sample() {
        let g = empty();
        let mut values = vec![1.0; g.len()];
        values[g.index([5, 5, 5])] = UNREACHABLE;
        let f = ScalarField::new(&g, values);
        let between = (g.center([5, 5, 5]) + g.center([6, 6, 6])) / 2.0;
        assert_eq!(f.sample(&between), UNREACHABLE);
        assert_eq!(f.sample_finite(&between), 1.0);
        // A zero-weight corner does not contribute.
        assert_eq!(f.sample(&g.center([6, 6, 6])), 1.0);
    }

    #[test]
    fn heading_points_at_goal() {
        let g = empty();
        let goal = g.center([20, 20, 10]);
        let pot = fmm_potential(&g, &goal).unwrap();
        let west = goal - Vec3::new(2.0, 0.0, 0.0);
        assert!(optimal_heading(&pot, &west).unwrap().abs() < 0.05);
        let south = goal - Vec3::new(0.0, 2.0, 0.0);
        assert!((optimal_heading(&pot, &south).unwrap() - FRAC_PI_2).abs() < 0.05);
        let east = goal + Vec3::new(2.0, 0.0, 0.0);
        let h = optimal_heading(&pot, &east).unwrap();
        assert!((h.abs() - std::f64::consts::PI).abs() < 0.05);
        assert!(h > -std::f64::consts::PI && h <= std::f64::consts::PI);
    }

    #[test]
    fn heading_undefined_at_goal_and_in_walls() {
        let g = empty();
        let goal = g.center([20, 20, 10]);
        let pot = fmm_potential(&g, &goal).unwrap();
        assert!(matches!(
            optimal_heading(&pot, &goal),
            Err(Error::UndefinedHeading)
        ));
        assert!(matches!(
            optimal_heading(&pot, &g.center([0, 10, 10])),
            Err(Error::UndefinedHeading)
        ));
    }

    #[test]
    fn heading_is_a_descent_direction() {
        let (g, _) = gen_scene(
            4,
            ScenePreset::new(SceneKind::Corner, 0.3),
            [40, 40, 20],
            0.25,
        )
        .unwrap();
        let sdf = build_sdf(&g);
        let goal = g.center([30, 30, 8]);
        let pot = fmm_potential(&g, &goal).unwrap();
        let mut r = crate::rng::stream(5);
        let mut checked = 0;
        for _ in 0..400 {
            let p = crate::world::sample_free_point_in(&g, &sdf, &mut r, 0.5).unwrap()
                + Vec3::new(
                    crate::rng::uniform(&mut r, -0.1, 0.1),
                    crate::rng::uniform(&mut r, -0.1, 0.1),
                    0.0,
                );
            let Ok(theta) = optimal_heading(&pot, &p) else {
                continue;
            };
            let here = pot.sample(&p);
            if here < 1.0 {
                continue;
            }
            let step = p + 0.5 * g.voxel() * Vec3::new(theta.cos(), theta.sin(), 0.0);
            assert!(pot.sample(&step) < here, "no descent at {p:?}");
            checked += 1;
        }
        assert!(checked > 200);
    }
}
