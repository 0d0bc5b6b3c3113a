//! 26-connected A* over cells with sufficient obstacle clearance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::ScalarField;
use crate::error::{Error, Result};
use crate::world::{Cell, VoxelGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// Metric length in meters.
    pub length: f64,
}

impl GridPath {
    /// Length from per-kind step counts (axis, face-diagonal, body-diagonal),
    /// so equal-length paths give bit-identical lengths.
    pub fn metric_length(cells: &[Cell], voxel: f64) -> f64 {
        let mut counts = [0u64; 3];
        for w in cells.windows(2) {
            let k = (0..3).filter(|&a| w[0][a] != w[1][a]).count();
            if k > 0 {
                counts[k - 1] += 1;
            }
        }
        step_length(counts, voxel)
    }
}

pub(crate) fn step_length(counts: [u64; 3], voxel: f64) -> f64 {
    voxel * (counts[0] as f64 + counts[1] as f64 * 2f64.sqrt() + counts[2] as f64 * 3f64.sqrt())
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 26-connected path from `start` to `goal` through free cells
/// whose obstacle distance is at least `min_clearance`.
pub fn astar_path(
    grid: &VoxelGrid,
    sdf: &ScalarField,
    start: Cell,
    goal: Cell,
    min_clearance: f64,
) -> Result<GridPath> {
    let passable = |c: Cell| !grid.occupied(c) && sdf.value(c) >= min_clearance;
    let no_path = Error::NoPath {
        clearance: min_clearance,
    };
    if !passable(start) || !passable(goal) {
        return Err(no_path);
    }
    let h = grid.voxel();
    let goal_pos = grid.center(goal);
    let heuristic = |c: Cell| (grid.center(c) - goal_pos).norm();

    let n = grid.len();
    let mut g_cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let si = grid.index(start);
    let gi = grid.index(goal);
    g_cost[si] = 0.0;
    open.push(Open {
        f: heuristic(start),
        index: si,
    });

    while let Some(Open { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == gi {
            let mut cells = vec![goal];
            let mut cur = gi;
            while cur != si {
                cur = parent[cur];
                cells.push(grid.cell_of_index(cur));
            }
            cells.reverse();
            let length = GridPath::metric_length(&cells, h);
            return Ok(GridPath { cells, length });
        }
        let c = grid.cell_of_index(index);
        for nb in grid.neighbors26(c) {
            let ni = grid.index(nb);
            if closed[ni] || !passable(nb) {
                continue;
            }
            let k = (0..3).filter(|&a| nb[a] != c[a]).count();
            let step = h * [1.0, 2f64.sqrt(), 3f64.sqrt()][k - 1];
            let cand = g_cost[index] + step;
            if cand < g_cost[ni] {
                g_cost[ni] = cand;
                parent[ni] = index;
                open.push(Open {
                    f: cand + heuristic(nb),
                    index: ni,
                });
            }
        }
    }
    Err(no_path)
}
