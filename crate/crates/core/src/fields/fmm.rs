//! First-order fast marching for the unit-speed eikonal equation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{ScalarField, UNREACHABLE};
use crate::error::{Error, Result};
use crate::world::VoxelGrid;
use crate::Vec3;

#[derive(Clone, Copy, PartialEq)]
enum State {
    Far,
    Trial,
    Known,
}

/// Min-heap entry ordered by value, then by linear index.
#[derive(PartialEq)]
struct Front {
    value: f64,
    index: usize,
}

impl Eq for Front {}

impl Ord for Front {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Orthogonal direction triples drawn from the 26-neighborhood. The first
/// is the axis frame; the others pair one axis with the two face diagonals
/// of the perpendicular plane.
const STENCILS: [[[isize; 3]; 3]; 4] = [
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    [[1, 0, 0], [0, 1, 1], [0, 1, -1]],
    [[0, 1, 0], [1, 0, 1], [1, 0, -1]],
    [[0, 0, 1], [1, 1, 0], [1, -1, 0]],
];

/// Upwind solution of `sum_i ((u - a_i) / s_i)^2 = 1` over the directions
/// with a known upwind value, growing the active set in order of `a_i`.
fn solve_upwind(mut terms: [(f64, f64); 3]) -> f64 {
    terms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mut wa, mut wb, mut wc) = (0.0, 0.0, 0.0);
    let mut u = UNREACHABLE;
    for (k, &(a, s)) in terms.iter().enumerate() {
        if !a.is_finite() || (k > 0 && u <= a) {
            break;
        }
        let w = 1.0 / (s * s);
        wa += w;
        wb += w * a;
        wc += w * a * a;
        let disc = wb * wb - wa * (wc - 1.0);
        u = (wb + disc.max(0.0).sqrt()) / wa;
    }
    u
}

/// Cells within this many voxels of the goal that see it directly start
/// from their exact distance.
const SEED_RADIUS: f64 = 4.0;

/// Geodesic distance to `goal` through free cells.
///
/// Occupied cells and free cells cut off from the goal keep [`UNREACHABLE`].
pub fn fmm_potential(grid: &VoxelGrid, goal: &Vec3) -> Result<ScalarField> {
    let seed_radius = SEED_RADIUS;
    let goal_cell = grid.cell_at(goal).ok_or(Error::GoalInObstacle)?;
    if grid.occupied(goal_cell) {
        return Err(Error::GoalInObstacle);
    }
    let dims = grid.dims();
    let h = grid.voxel();
    let mut values = vec![UNREACHABLE; grid.len()];
    let mut state = vec![State::Far; grid.len()];
    let mut heap = BinaryHeap::new();
    let start = grid.index(goal_cell);
    values[start] = 0.0;
    state[start] = State::Trial;
    heap.push(Front {
        value: 0.0,
        index: start,
    });
    let mut frozen = vec![false; grid.len()];
    frozen[start] = true;
    let r = seed_radius.ceil() as isize;
    let center = grid.center(goal_cell);
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let off = [dx, dy, dz];
                let mut c = goal_cell;
                let mut inside = true;
                for a in 0..3 {
                    let v = goal_cell[a] as isize + off[a];
                    if v < 0 || v >= dims[a] as isize {
                        inside = false;
                        break;
                    }
                    c[a] = v as usize;
                }
                let dist_cells = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                if !inside || dist_cells == 0.0 || dist_cells > seed_radius {
                    continue;
                }
                if !line_of_sight(grid, &center, &grid.center(c)) {
                    continue;
                }
                let i = grid.index(c);
                values[i] = dist_cells * h;
                state[i] = State::Trial;
                frozen[i] = true;
                heap.push(Front {
                    value: values[i],
                    index: i,
                });
            }
        }
    }

    while let Some(Front { value, index }) = heap.pop() {
        if state[index] == State::Known || value > values[index] {
            continue;
        }
        state[index] = State::Known;
        let c = grid.cell_of_index(index);
        for n in grid.neighbors26(c) {
            let ni = grid.index(n);
            if grid.occupied_index(ni) || state[ni] == State::Known || frozen[ni] {
                continue;
            }
            let mut u = UNREACHABLE;
            for stencil in &STENCILS {
                let mut terms = [(UNREACHABLE, 1.0); 3];
                for (slot, d) in terms.iter_mut().zip(stencil) {
                    let spacing = h * ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt();
                    slot.1 = spacing;
                    for sign in [-1isize, 1] {
                        let mut m = [0usize; 3];
                        let mut inside = true;
                        for ax in 0..3 {
                            let w = n[ax] as isize + sign * d[ax];
                            if w < 0 || w >= dims[ax] as isize {
                                inside = false;
                                break;
                            }
                            m[ax] = w as usize;
                        }
                        if inside {
                            let mi = grid.index(m);
                            if state[mi] == State::Known {
                                slot.0 = slot.0.min(values[mi]);
                            }
                        }
                    }
                }
                u = u.min(solve_upwind(terms));
            }
            if u < values[ni] {
                values[ni] = u;
                state[ni] = State::Trial;
                heap.push(Front {
                    value: u,
                    index: ni,
                });
            }
        }
    }
    Ok(ScalarField::new(grid, values))
}

/// Every cell touched by the segment (sampled at a tenth of a voxel) is free.
fn line_of_sight(grid: &VoxelGrid, a: &Vec3, b: &Vec3) -> bool {
    let steps = ((b - a).norm() / grid.voxel() * 10.0).ceil().max(1.0) as usize;
    (0..=steps).all(|k| {
        let p = a + (b - a) * (k as f64 / steps as f64);
        grid.cell_at(&p).is_some_and(|c| !grid.occupied(c))
    })
}
