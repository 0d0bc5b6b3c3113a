//! Little-endian binary files: `WPNN` policies and `WPDS` datasets.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Dataset, MlpPolicy, LABEL_DIM};
use crate::error::{Error, Result};

const POLICY_MAGIC: &[u8; 4] = b"WPNN";
const DATASET_MAGIC: &[u8; 4] = b"WPDS";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vals: impl IntoIterator<Item = f64>) {
    for v in vals {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn to_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidConfig(format!("{what} {n} does not fit in u32")))
}

/// Cursor over a byte slice that reports truncation by offset.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let out = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(out)
            }
            None => Err(Error::format_offset(
                self.bytes.len(),
                format!("truncated: need {n} more bytes at byte {}", self.pos),
            )),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::format_offset(self.pos, "length overflow"))?;
        let b = self.take(bytes)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(Error::format_offset(0, format!("bad magic, expected {:?}", std::str::from_utf8(magic).unwrap())));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(Error::format_offset(4, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format_offset(self.pos, "trailing bytes"));
        }
        Ok(())
    }
}

pub fn write_policy(p: &MlpPolicy) -> Result<Vec<u8>> {
    p.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(POLICY_MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, to_u32(p.weights.len(), "layer count")?);
    for (w, b) in p.weights.iter().zip(&p.biases) {
        put_u32(&mut out, to_u32(w.ncols(), "layer input")?);
        put_u32(&mut out, to_u32(w.nrows(), "layer output")?);
        put_f32s(&mut out, w.iter().copied());
        put_f32s(&mut out, b.iter().copied());
    }
    put_f32s(&mut out, p.shift.iter().copied());
    put_f32s(&mut out, p.scale.iter().copied());
    Ok(out)
}

pub fn read_policy(bytes: &[u8]) -> Result<MlpPolicy> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(POLICY_MAGIC)?;
    let layers = r.u32()? as usize;
    if layers == 0 {
        return Err(Error::format_offset(8, "policy has no layers"));
    }
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        let at = r.pos;
        let n_in = r.u32()? as usize;
        let n_out = r.u32()? as usize;
        if n_in == 0 || n_out == 0 {
            return Err(Error::format_offset(at, "empty layer"));
        }
        if l > 0 && n_in != weights.last().map(|w: &Array2<f64>| w.nrows()).unwrap_or(0) {
            return Err(Error::format_offset(at, format!("layer {l} input {n_in} breaks the chain")));
        }
        let w = r.f32s(n_in.checked_mul(n_out).ok_or_else(|| Error::format_offset(at, "layer too large"))?)?;
        let b = r.f32s(n_out)?;
        weights.push(Array2::from_shape_vec((n_out, n_in), w.into_iter().map(f64::from).collect()).expect("sized"));
        biases.push(Array1::from_vec(b.into_iter().map(f64::from).collect()));
    }
    let n = weights[0].ncols();
    let at = r.pos;
    let shift = Array1::from_vec(r.f32s(n)?.into_iter().map(f64::from).collect());
    let scale = Array1::from_vec(r.f32s(n)?.into_iter().map(f64::from).collect());
    r.finish()?;
    let p = MlpPolicy {
        weights,
        biases,
        shift,
        scale,
    };
    p.validate().map_err(|e| Error::format_offset(at, e.to_string()))?;
    Ok(p)
}

pub fn write_dataset(d: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + 4 * (d.obs.len() + d.labels.len()));
    out.extend_from_slice(DATASET_MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, to_u32(d.len(), "record count")?);
    put_u32(&mut out, to_u32(d.obs_dim, "observation size")?);
    put_u32(&mut out, LABEL_DIM as u32);
    for i in 0..d.len() {
        let (o, l) = d.record(i);
        for v in o.iter().chain(l) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(DATASET_MAGIC)?;
    let count = r.u32()? as usize;
    let obs_dim = r.u32()? as usize;
    let label_dim = r.u32()? as usize;
    if label_dim != LABEL_DIM {
        return Err(Error::format_offset(16, format!("label size {label_dim}, expected {LABEL_DIM}")));
    }
    let mut d = Dataset::new(obs_dim);
    for _ in 0..count {
        let rec = r.f32s(obs_dim + LABEL_DIM)?;
        d.obs.extend_from_slice(&rec[..obs_dim]);
        d.labels.extend_from_slice(&rec[obs_dim..]);
    }
    r.finish()?;
    Ok(d)
}

pub fn save_policy(p: &MlpPolicy, path: &Path) -> Result<()> {
    std::fs::write(path, write_policy(p)?).map_err(|e| Error::io(path, e))
}

pub fn load_policy(path: &Path) -> Result<MlpPolicy> {
    read_policy(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, write_dataset(d)?).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
