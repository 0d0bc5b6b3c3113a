//! Voxel worlds: the occupancy lattice, scene presets, and scene files.

mod gen;
mod io;

use std::fmt;
use std::str::FromStr;

pub use gen::gen_scene;
pub use io::{format_real, load_scene, parse_scene, save_scene, write_scene};

use crate::error::{Error, Result};
use crate::fields::{build_sdf, ScalarField};
use crate::rng::{self, Stream};
use crate::Vec3;

pub type Cell = [usize; 3];

/// Occupancy lattice. Cell `(x, y, z)` has its center at
/// `origin + h * (x, y, z)` and linear index `x + nx * (y + ny * z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    voxel: f64,
    origin: Vec3,
    cells: Vec<bool>,
}

impl VoxelGrid {
    /// Empty (all free) grid. Use [`VoxelGrid::with_cells`] or
    /// [`rasterize`] to populate it.
    pub fn new(dims: [usize; 3], voxel: f64, origin: Vec3) -> Result<Self> {
        if dims.iter().any(|&n| n < 4) {
            return Err(Error::InvalidDims(format!(
                "every axis needs at least 4 cells, got {dims:?}"
            )));
        }
        if !(voxel > 0.0 && voxel.is_finite()) {
            return Err(Error::InvalidDims(format!(
                "voxel edge must be > 0, got {voxel}"
            )));
        }
        Ok(Self {
            dims,
            voxel,
            origin,
            cells: vec![false; dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn with_cells(
        dims: [usize; 3],
        voxel: f64,
        origin: Vec3,
        cells: Vec<bool>,
    ) -> Result<Self> {
        let mut grid = Self::new(dims, voxel, origin)?;
        if cells.len() != grid.cells.len() {
            return Err(Error::DimMismatch {
                expected: grid.cells.len(),
                got: cells.len(),
            });
        }
        grid.cells = cells;
        Ok(grid)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel(&self) -> f64 {
        self.voxel
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn cell_of_index(&self, i: usize) -> Cell {
        let [nx, ny, _] = self.dims;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    #[inline]
    pub fn occupied(&self, c: Cell) -> bool {
        self.cells[self.index(c)]
    }

    #[inline]
    pub fn occupied_index(&self, i: usize) -> bool {
        self.cells[i]
    }

    pub fn set(&mut self, c: Cell, occupied: bool) {
        let i = self.index(c);
        self.cells[i] = occupied;
    }

    pub fn center(&self, c: Cell) -> Vec3 {
        self.origin + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.voxel
    }

    /// Continuous lattice coordinates of a world point (cell centers at integers).
    pub fn lattice_coords(&self, p: &Vec3) -> Vec3 {
        (p - self.origin) / self.voxel
    }

    /// Cell whose Voronoi box contains `p`, if inside the grid.
    pub fn cell_at(&self, p: &Vec3) -> Option<Cell> {
        let q = self.lattice_coords(p);
        let mut c = [0usize; 3];
        for a in 0..3 {
            let r = q[a].round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            c[a] = r as usize;
        }
        Some(c)
    }

    /// Clamp a world point into the convex hull of cell centers.
    pub fn clamp_to_hull(&self, p: &Vec3) -> Vec3 {
        let mut q = *p;
        for a in 0..3 {
            let lo = self.origin[a];
            let hi = self.origin[a] + (self.dims[a] - 1) as f64 * self.voxel;
            q[a] = q[a].clamp(lo, hi);
        }
        q
    }

    pub fn in_hull(&self, p: &Vec3) -> bool {
        (0..3).all(|a| {
            let lo = self.origin[a];
            let hi = self.origin[a] + (self.dims[a] - 1) as f64 * self.voxel;
            p[a] >= lo && p[a] <= hi
        })
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.cells.iter().filter(|&&o| o).count() as f64 / self.cells.len() as f64
    }

    pub fn boundary_closed(&self) -> bool {
        let [nx, ny, nz] = self.dims;
        (0..self.len()).all(|i| {
            let [x, y, z] = self.cell_of_index(i);
            let on_boundary =
                x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1;
            !on_boundary || self.cells[i]
        })
    }

    /// Neighbors within the 26-neighborhood that lie inside the grid.
    pub fn neighbors26(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let dims = self.dims;
        (0..27).filter_map(move |k| {
            if k == 13 {
                return None;
            }
            let d = [k % 3, (k / 3) % 3, k / 9];
            let mut n = [0usize; 3];
            for a in 0..3 {
                let v = c[a] as isize + d[a] as isize - 1;
                if v < 0 || v >= dims[a] as isize {
                    return None;
                }
                n[a] = v as usize;
            }
            Some(n)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SceneKind {
    Empty,
    Doorway,
    Corner,
    Table,
    Overhang,
    Mixed,
}

impl SceneKind {
    pub const ALL: [SceneKind; 6] = [
        SceneKind::Empty,
        SceneKind::Doorway,
        SceneKind::Corner,
        SceneKind::Table,
        SceneKind::Overhang,
        SceneKind::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SceneKind::Empty => "empty",
            SceneKind::Doorway => "doorway",
            SceneKind::Corner => "corner",
            SceneKind::Table => "table",
            SceneKind::Overhang => "overhang",
            SceneKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scene preset `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenePreset {
    pub kind: SceneKind,
    /// Amount of extra free-standing furniture, in `[0, 1]`.
    pub clutter: f64,
}

impl ScenePreset {
    pub fn new(kind: SceneKind, clutter: f64) -> Self {
        Self { kind, clutter }
    }
}

/// Axis-aligned box in world meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AaBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl AaBox {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] > self.min[a] && p[a] < self.max[a])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneMeta {
    pub seed: u64,
    pub preset: ScenePreset,
    pub boxes: Vec<AaBox>,
}

/// A cell is occupied iff its center lies strictly inside some box.
pub fn rasterize(dims: [usize; 3], voxel: f64, origin: Vec3, boxes: &[AaBox]) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::new(dims, voxel, origin)?;
    for b in boxes {
        let lo = grid.lattice_coords(&b.min);
        let hi = grid.lattice_coords(&b.max);
        let mut range: [std::ops::Range<usize>; 3] = [0..0, 0..0, 0..0];
        for a in 0..3 {
            let first = lo[a].floor().max(0.0) as usize;
            let end = (hi[a].ceil().max(-1.0) + 1.0).min(dims[a] as f64) as usize;
            range[a] = first..end.max(first);
        }
        for z in range[2].clone() {
            for y in range[1].clone() {
                for x in range[0].clone() {
                    let c = [x, y, z];
                    if b.contains(&grid.center(c)) {
                        grid.set(c, true);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Uniformly pick a free cell center whose obstacle distance is at least
/// `clearance`.
pub fn sample_free_point(grid: &VoxelGrid, rng: &mut Stream, clearance: f64) -> Result<Vec3> {
    let sdf = build_sdf(grid);
    sample_free_point_in(grid, &sdf, rng, clearance)
}

/// As [`sample_free_point`], reusing a precomputed distance field.
pub fn sample_free_point_in(
    grid: &VoxelGrid,
    sdf: &ScalarField,
    rng: &mut Stream,
    clearance: f64,
) -> Result<Vec3> {
    let candidates: Vec<usize> = (0..grid.len())
        .filter(|&i| !grid.occupied_index(i) && sdf.value_index(i) >= clearance)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoFreeSpace { clearance });
    }
    let pick = candidates[rng::below(rng, candidates.len())];
    Ok(grid.center(grid.cell_of_index(pick)))
}
