//! Text scene format (`VOXSCENE 1`): header, box list, run-length occupancy.

use std::fmt::Write as _;
use std::path::Path;

use super::{AaBox, SceneKind, SceneMeta, ScenePreset, VoxelGrid};
use crate::error::{Error, Result};
use crate::Vec3;

const MAGIC: &str = "VOXSCENE";
const VERSION: u32 = 1;

/// Format a real with 6 significant digits, `%g` style.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let fixed = format!("{:.*}", (5 - exp) as usize, v);
        trim_fraction(&fixed).to_string()
    } else {
        format!("{}e{}", trim_fraction(mantissa), exp)
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The value a real takes after a trip through the file format.
pub(crate) fn canonical(v: f64) -> f64 {
    format_real(v).parse().expect("formatted real parses")
}

pub fn write_scene(grid: &VoxelGrid, meta: &SceneMeta) -> String {
    let mut out = String::new();
    let [nx, ny, nz] = grid.dims();
    let o = grid.origin();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "dims {nx} {ny} {nz}");
    let _ = writeln!(out, "voxel {}", format_real(grid.voxel()));
    let _ = writeln!(
        out,
        "origin {} {} {}",
        format_real(o.x),
        format_real(o.y),
        format_real(o.z)
    );
    let _ = writeln!(out, "seed {}", meta.seed);
    let _ = writeln!(
        out,
        "preset {} {}",
        meta.preset.kind,
        format_real(meta.preset.clutter)
    );
    let _ = writeln!(out, "boxes {}", meta.boxes.len());
    for b in &meta.boxes {
        let v: Vec<String> = b
            .min
            .iter()
            .chain(b.max.iter())
            .map(|&x| format_real(x))
            .collect();
        let _ = writeln!(out, "{}", v.join(" "));
    }
    out.push_str("rle\n");
    let cells = grid.cells();
    let mut i = 0;
    while i < cells.len() {
        let bit = cells[i];
        let run = cells[i..].iter().take_while(|&&c| c == bit).count();
        let _ = writeln!(out, "{run} {}", bit as u8);
        i += run;
    }
    out.push_str("end\n");
    out
}

pub fn save_scene(grid: &VoxelGrid, meta: &SceneMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_scene(grid, meta)).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<(VoxelGrid, SceneMeta)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.split_whitespace().collect()))
            }
            None => Err(Error::format_line(self.last + 1, "unexpected end of file")),
        }
    }

    /// Next line, which must start with `key` and carry exactly `n` fields.
    fn keyed(&mut self, key: &str, n: usize) -> Result<(usize, Vec<&'a str>)> {
        let (no, fields) = self.next_line()?;
        if fields.first() != Some(&key) || fields.len() != n + 1 {
            return Err(Error::format_line(
                no,
                format!("expected `{key}` with {n} value(s)"),
            ));
        }
        Ok((no, fields[1..].to_vec()))
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::format_line(line, format!("invalid number `{s}`")))
}

pub fn parse_scene(text: &str) -> Result<(VoxelGrid, SceneMeta)> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (no, head) = lines.next_line()?;
    if head.len() != 2 || head[0] != MAGIC {
        return Err(Error::format_line(no, "missing VOXSCENE header"));
    }
    let version: u32 = num(no, head[1])?;
    if version != VERSION {
        return Err(Error::format_line(
            no,
            format!("unsupported version {version}"),
        ));
    }
    let (no, d) = lines.keyed("dims", 3)?;
    let dims = [num(no, d[0])?, num(no, d[1])?, num(no, d[2])?];
    let (no, v) = lines.keyed("voxel", 1)?;
    let voxel: f64 = num(no, v[0])?;
    let (no, o) = lines.keyed("origin", 3)?;
    let origin = Vec3::new(num(no, o[0])?, num(no, o[1])?, num(no, o[2])?);
    let (no, s) = lines.keyed("seed", 1)?;
    let seed: u64 = num(no, s[0])?;
    let (no, p) = lines.keyed("preset", 2)?;
    let kind: SceneKind = p[0]
        .parse()
        .map_err(|e: String| Error::format_line(no, e))?;
    let clutter: f64 = num(no, p[1])?;
    let (no, k) = lines.keyed("boxes", 1)?;
    let count: usize = num(no, k[0])?;
    let mut boxes = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let (no, f) = lines.next_line()?;
        if f.len() != 6 {
            return Err(Error::format_line(no, "box line needs 6 reals"));
        }
        let v: Vec<f64> = f.iter().map(|s| num(no, s)).collect::<Result<_>>()?;
        boxes.push(AaBox {
            min: Vec3::new(v[0], v[1], v[2]),
            max: Vec3::new(v[3], v[4], v[5]),
        });
    }
    let (no, r) = lines.next_line()?;
    if r != ["rle"] {
        return Err(Error::format_line(no, "expected `rle`"));
    }
    let total = dims
        .iter()
        .try_fold(1usize, |acc: usize, &n: &usize| acc.checked_mul(n))
        .ok_or_else(|| Error::format_line(2, "dims overflow"))?;
    let mut cells = Vec::with_capacity(total.min(1 << 26));
    loop {
        let (no, f) = lines.next_line()?;
        if f == ["end"] {
            if cells.len() != total {
                return Err(Error::format_line(
                    no,
                    format!("run lengths sum to {}, expected {total}", cells.len()),
                ));
            }
            break;
        }
        if f.len() != 2 {
            return Err(Error::format_line(no, "run line needs `<count> <0|1>`"));
        }
        let run: usize = num(no, f[0])?;
        let bit = match f[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::format_line(
                    no,
                    format!("invalid cell bit `{other}`"),
                ))
            }
        };
        if run == 0 || cells.len() + run > total {
            return Err(Error::format_line(
                no,
                format!("run lengths exceed {total} cells"),
            ));
        }
        cells.resize(cells.len() + run, bit);
    }
    if let Ok((no, _)) = lines.next_line() {
        return Err(Error::format_line(no, "trailing content after `end`"));
    }
    let grid = VoxelGrid::with_cells(dims, voxel, origin, cells).map_err(|e| match e {
        Error::InvalidDims(m) => Error::format_line(2, m),
        other => other,
    })?;
    let meta = SceneMeta {
        seed,
        preset: ScenePreset::new(kind, clutter),
        boxes,
    };
    Ok((grid, meta))
}
