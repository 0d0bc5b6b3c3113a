//! Exact Euclidean distance transform (separable lower-envelope method).

use super::ScalarField;
use crate::world::VoxelGrid;

const FAR: f64 = 1e20;

/// Squared distance of `f` samples to the lower envelope of parabolas
/// rooted at each sample, in place.
fn envelope_1d(f: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>, out: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    out.clear();
    v.push(0);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let r = *v.last().expect("envelope nonempty");
            let s = (fq - (f[r] + (r * r) as f64)) / (2.0 * q as f64 - 2.0 * r as f64);
            if s <= z[v.len() - 1] && v.len() > 1 {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                let last = z.len() - 1;
                z[last] = s;
                z.push(f64::INFINITY);
                break;
            }
        }
    }
    let mut k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let r = v[k];
        let d = q as f64 - r as f64;
        out.push(d * d + f[r]);
    }
    f.copy_from_slice(out);
}

/// Squared distance, in cell units, from every cell center to the nearest
/// occupied cell center. `u64::MAX` when the grid has no occupied cell.
pub fn squared_distance_cells(grid: &VoxelGrid) -> Vec<u64> {
    let [nx, ny, nz] = grid.dims();
    let mut d: Vec<f64> = grid
        .cells()
        .iter()
        .map(|&occ| if occ { 0.0 } else { FAR })
        .collect();
    let (mut v, mut z, mut out) = (Vec::new(), Vec::new(), Vec::new());
    let mut line = Vec::new();
    let strides = [1, nx, nx * ny];
    for (axis, &len) in [nx, ny, nz].iter().enumerate() {
        let stride = strides[axis];
        for start in 0..grid.len() {
            // Visit each line once, from its first cell.
            if (start / stride) % len != 0 {
                continue;
            }
            line.clear();
            line.extend((0..len).map(|k| d[start + k * stride]));
            envelope_1d(&mut line, &mut v, &mut z, &mut out);
            for (k, &val) in line.iter().enumerate() {
                d[start + k * stride] = val;
            }
        }
    }
    d.into_iter()
        .map(|x| if x >= FAR / 2.0 { u64::MAX } else { x as u64 })
        .collect()
}

/// Distance in meters from each cell center to the nearest occupied cell
/// center; zero on occupied cells.
pub fn build_sdf(grid: &VoxelGrid) -> ScalarField {
    let h = grid.voxel();
    let values = squared_distance_cells(grid)
        .into_iter()
        .map(|d2| {
            if d2 == u64::MAX {
                f64::INFINITY
            } else {
                (d2 as f64).sqrt() * h
            }
        })
        .collect();
    ScalarField::new(grid, values)
}
