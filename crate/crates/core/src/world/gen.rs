//! Synthetic indoor scenes built from axis-aligned boxes.
//!
//! Geometry is laid out in whole cells and converted to meters with faces on
//! cell boundaries, so cell centers sit half a voxel away from every face.

use super::io::canonical;
use super::{rasterize, AaBox, SceneKind, SceneMeta, ScenePreset, VoxelGrid};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::Vec3;

const DOOR_WIDTH: f64 = 0.75;
const DOOR_HEIGHT: f64 = 2.0;
const TABLE_HEIGHT: f64 = 0.75;
const OVERHANG_GAP: f64 = 1.0;
const MAX_CLUTTER_ITEMS: f64 = 6.0;
const PLACEMENT_TRIES: usize = 64;

/// Inclusive cell-index box.
#[derive(Clone, Copy, Debug)]
struct CellBox {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl CellBox {
    fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        debug_assert!((0..3).all(|a| lo[a] <= hi[a]));
        Self { lo, hi }
    }

    fn to_meters(self, origin: Vec3, h: f64) -> AaBox {
        let mut min = Vec3::zeros();
        let mut max = Vec3::zeros();
        for a in 0..3 {
            min[a] = canonical(origin[a] + (self.lo[a] as f64 - 0.5) * h);
            max[a] = canonical(origin[a] + (self.hi[a] as f64 + 0.5) * h);
        }
        AaBox { min, max }
    }

    fn dilated(self, margin: usize, dims: [usize; 3]) -> Self {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for a in 0..3 {
            lo[a] = lo[a].saturating_sub(margin);
            hi[a] = (hi[a] + margin).min(dims[a] - 1);
        }
        Self { lo, hi }
    }

    fn intersects(&self, other: &CellBox) -> bool {
        (0..3).all(|a| self.lo[a] <= other.hi[a] && other.lo[a] <= self.hi[a])
    }
}

/// Axis-indexed builder: `along(a, b, z)` places coordinates given per role.
fn cell3(axis_a: usize, va: usize, vb: usize, vz: usize) -> [usize; 3] {
    let mut c = [0; 3];
    c[axis_a] = va;
    c[1 - axis_a] = vb;
    c[2] = vz;
    c
}

fn boxes_along(axis_a: usize, a: (usize, usize), b: (usize, usize), z: (usize, usize)) -> CellBox {
    CellBox::new(cell3(axis_a, a.0, b.0, z.0), cell3(axis_a, a.1, b.1, z.1))
}

struct Layout {
    dims: [usize; 3],
    h: f64,
    boxes: Vec<CellBox>,
    /// Regions clutter must stay out of.
    keep_out: Vec<CellBox>,
}

impl Layout {
    fn cells(&self, meters: f64) -> usize {
        ((meters / self.h).round() as usize).max(1)
    }

    fn push(&mut self, b: CellBox, margin: usize) {
        self.keep_out.push(b.dilated(margin, self.dims));
        self.boxes.push(b);
    }

    fn rand_int(rng: &mut Stream, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            lo
        } else {
            lo + rng::below(rng, hi - lo + 1)
        }
    }

    /// Interior wall position near the middle of `axis`.
    fn mid(&self, rng: &mut Stream, axis: usize) -> usize {
        let n = self.dims[axis];
        let jitter = n / 8;
        Self::rand_int(rng, n / 2 - jitter, n / 2 + jitter - 1)
    }

    fn boundary(&mut self) {
        let [nx, ny, nz] = self.dims;
        let (mx, my, mz) = (nx - 1, ny - 1, nz - 1);
        let shells = [
            CellBox::new([0, 0, 0], [mx, my, 0]),
            CellBox::new([0, 0, mz], [mx, my, mz]),
            CellBox::new([0, 0, 0], [0, my, mz]),
            CellBox::new([mx, 0, 0], [mx, my, mz]),
            CellBox::new([0, 0, 0], [mx, 0, mz]),
            CellBox::new([0, my, 0], [mx, my, mz]),
        ];
        self.boxes.extend(shells);
        // Side walls keep clutter two cells away; floor and ceiling may be touched.
        for b in &shells[2..] {
            self.keep_out.push(b.dilated(2, self.dims));
        }
    }

    fn doorway(&mut self, rng: &mut Stream) {
        let axis = rng::below(rng, 2);
        let other = 1 - axis;
        let nb = self.dims[other];
        let top = self.dims[2] - 2;
        let w = self.mid(rng, axis);
        let thick = self.cells(0.25);
        let door_w = self.cells(DOOR_WIDTH).max(3);
        let door_h = self.cells(DOOR_HEIGHT).max(3).min(top - 1);
        let d0 = Self::rand_int(rng, 2, nb - 3 - door_w);
        let d1 = d0 + door_w - 1;
        let wa = (w, w + thick - 1);
        let margin = 3;
        self.push(boxes_along(axis, wa, (1, d0 - 1), (1, top)), margin);
        self.push(boxes_along(axis, wa, (d1 + 1, nb - 2), (1, top)), margin);
        self.push(boxes_along(axis, wa, (d0, d1), (door_h + 1, top)), margin);
        // Approach corridor through the door.
        let corridor = boxes_along(
            axis,
            (
                w.saturating_sub(4),
                (w + thick + 3).min(self.dims[axis] - 1),
            ),
            (d0.saturating_sub(1), d1 + 1),
            (1, door_h),
        );
        self.keep_out.push(corridor);
    }

    fn corner(&mut self, rng: &mut Stream) {
        let axis = rng::below(rng, 2);
        let other = 1 - axis;
        let nb = self.dims[other];
        let top = self.dims[2] - 2;
        let w = self.mid(rng, axis);
        let thick = self.cells(0.25);
        let frac = rng::uniform(rng, 0.55, 0.7);
        let reach = ((nb as f64 * frac).round() as usize).clamp(2, nb - 5);
        let b = if rng::bernoulli(rng, 0.5) {
            (1, reach)
        } else {
            (nb - 1 - reach, nb - 2)
        };
        self.push(boxes_along(axis, (w, w + thick - 1), b, (1, top)), 3);
    }

    /// A counter-height slab running wall to wall, on legs.
    fn table(&mut self, rng: &mut Stream) {
        let axis = rng::below(rng, 2);
        let other = 1 - axis;
        let nb = self.dims[other];
        let depth = self.cells(rng::uniform(rng, 1.0, 1.75)).max(2);
        let a0 = self.mid(rng, axis).saturating_sub(depth / 2).max(2);
        let a1 = a0 + depth - 1;
        let kt = self.cells(TABLE_HEIGHT).saturating_sub(1).max(2);
        self.push(boxes_along(axis, (a0, a1), (1, nb - 2), (kt, kt)), 2);
        for &ea in &[a0, a1] {
            for &eb in &[1, nb / 2, nb - 2] {
                self.boxes
                    .push(boxes_along(axis, (ea, ea), (eb, eb), (1, kt - 1)));
            }
        }
    }

    /// A ceiling-attached soffit running wall to wall.
    fn overhang(&mut self, rng: &mut Stream) {
        let axis = rng::below(rng, 2);
        let other = 1 - axis;
        let nb = self.dims[other];
        let top = self.dims[2] - 2;
        let depth = self.cells(rng::uniform(rng, 1.0, 1.75)).max(2);
        let a0 = self.mid(rng, axis).saturating_sub(depth / 2).max(2);
        let a1 = a0 + depth - 1;
        let kb = (1 + self.cells(OVERHANG_GAP)).min(top);
        self.push(boxes_along(axis, (a0, a1), (1, nb - 2), (kb, top)), 2);
    }

    /// Free-standing table for mixed scenes.
    fn small_table(&mut self, rng: &mut Stream) {
        let kt = self.cells(TABLE_HEIGHT).saturating_sub(1).max(2);
        let sx = self.cells(1.5).max(3);
        let sy = self.cells(1.0).max(2);
        self.place(rng, [sx, sy, kt], |lo, hi| {
            let mut parts = vec![CellBox::new([lo[0], lo[1], kt], [hi[0], hi[1], kt])];
            for x in [lo[0], hi[0]] {
                for y in [lo[1], hi[1]] {
                    parts.push(CellBox::new([x, y, 1], [x, y, kt - 1]));
                }
            }
            parts
        });
    }

    fn clutter(&mut self, rng: &mut Stream, amount: f64) {
        let items = (amount.clamp(0.0, 1.0) * MAX_CLUTTER_ITEMS).round() as usize;
        let top = self.dims[2] - 2;
        for _ in 0..items {
            if rng::bernoulli(rng, 0.4) {
                let s = self.cells(rng::uniform(rng, 0.25, 0.5));
                self.place(rng, [s, s, top], |lo, hi| vec![CellBox::new(lo, hi)]);
            } else {
                let sx = self.cells(rng::uniform(rng, 0.5, 1.0));
                let sy = self.cells(rng::uniform(rng, 0.5, 1.0));
                let sz = self.cells(rng::uniform(rng, 0.5, 1.5)).min(top - 1);
                self.place(rng, [sx, sy, sz], |lo, hi| vec![CellBox::new(lo, hi)]);
            }
        }
    }

    /// Rejection-place a floor-standing footprint of `size` cells clear of
    /// every keep-out region.
    fn place(
        &mut self,
        rng: &mut Stream,
        size: [usize; 3],
        parts: impl Fn([usize; 3], [usize; 3]) -> Vec<CellBox>,
    ) {
        for _ in 0..PLACEMENT_TRIES {
            let mut lo = [0, 0, 1];
            let mut fits = true;
            for a in 0..2 {
                let n = self.dims[a];
                if size[a] + 6 > n {
                    fits = false;
                    break;
                }
                lo[a] = Self::rand_int(rng, 1, n - 1 - size[a]);
            }
            if !fits {
                return;
            }
            let hi = [lo[0] + size[0] - 1, lo[1] + size[1] - 1, size[2]];
            let footprint = CellBox::new(lo, hi);
            if self.keep_out.iter().any(|k| k.intersects(&footprint)) {
                continue;
            }
            for p in parts(lo, hi) {
                self.boxes.push(p);
            }
            self.keep_out.push(footprint.dilated(2, self.dims));
            return;
        }
    }
}

/// Generate a closed room for `preset`. Deterministic in all arguments.
pub fn gen_scene(
    seed: u64,
    preset: ScenePreset,
    dims: [usize; 3],
    voxel: f64,
) -> Result<(VoxelGrid, SceneMeta)> {
    if dims[0] < 16 || dims[1] < 16 || dims[2] < 12 {
        return Err(Error::InvalidDims(format!(
            "scene dims must be >= 16x16x12, got {dims:?}"
        )));
    }
    if !(0.05..=0.5).contains(&voxel) {
        return Err(Error::InvalidDims(format!(
            "voxel must be in [0.05, 0.5] m, got {voxel}"
        )));
    }
    let h = canonical(voxel);
    let origin = Vec3::repeat(canonical(h / 2.0));
    let mut rng = rng::stream(seed);
    let mut layout = Layout {
        dims,
        h,
        boxes: Vec::new(),
        keep_out: Vec::new(),
    };
    layout.boundary();
    match preset.kind {
        SceneKind::Empty => {}
        SceneKind::Doorway => layout.doorway(&mut rng),
        SceneKind::Corner => layout.corner(&mut rng),
        SceneKind::Table => layout.table(&mut rng),
        SceneKind::Overhang => layout.overhang(&mut rng),
        SceneKind::Mixed => {
            layout.corner(&mut rng);
            layout.small_table(&mut rng);
        }
    }
    if preset.kind != SceneKind::Empty {
        layout.clutter(&mut rng, preset.clutter);
    }
    let boxes: Vec<AaBox> = layout
        .boxes
        .iter()
        .map(|b| b.to_meters(origin, h))
        .collect();
    let grid = rasterize(dims, h, origin, &boxes)?;
    debug_assert!(grid.occupied_fraction() < 0.6);
    let meta = SceneMeta {
        seed,
        preset: ScenePreset::new(preset.kind, canonical(preset.clutter)),
        boxes,
    };
    Ok((grid, meta))
}
