//! Versioned little-endian binary container for a spec plus its parameters.
//!
//! Layout: 8-byte magic `LTSPARAM`, `u32` format version, `u64` input_dim,
//! `u8` activation tag, `u64` depth, `depth x u64` widths, `2 x u64` head
//! widths, `u64` value count, then the raw `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, ModelSpec, ParamVector};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LTSPARAM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub(crate) fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn put_f64s(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    put_u64(w, vs.len() as u64)?;
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn get_f64s(r: &mut impl Read, limit: usize) -> Result<Vec<f64>> {
    let n = get_u64(r)? as usize;
    if n > limit {
        return Err(Error::Format(format!("array length {n} exceeds limit {limit}")));
    }
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

pub(crate) fn write_spec(w: &mut impl Write, spec: &ModelSpec) -> Result<()> {
    put_u64(w, spec.input_dim as u64)?;
    w.write_all(&[match spec.activation {
        Activation::Relu => 0u8,
        Activation::Tanh => 1u8,
    }])?;
    put_u64(w, spec.depth() as u64)?;
    for &width in &spec.trunk_widths {
        put_u64(w, width as u64)?;
    }
    put_u64(w, spec.head_dims.0 as u64)?;
    put_u64(w, spec.head_dims.1 as u64)?;
    Ok(())
}

pub(crate) fn read_spec(r: &mut impl Read) -> Result<ModelSpec> {
    let input_dim = get_u64(r)? as usize;
    let mut tag = [0u8];
    r.read_exact(&mut tag)?;
    let activation = match tag[0] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        t => return Err(Error::Format(format!("unknown activation tag {t}"))),
    };
    let depth = get_u64(r)? as usize;
    if depth > 1 << 16 {
        return Err(Error::Format(format!("implausible trunk depth {depth}")));
    }
    let trunk_widths = (0..depth).map(|_| get_u64(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let head_dims = (get_u64(r)? as usize, get_u64(r)? as usize);
    let spec = ModelSpec { input_dim, trunk_widths, activation, head_dims };
    spec.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(spec)
}

pub(crate) fn check_magic(r: &mut impl Read, magic: &[u8; 8], version: u32) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let found = u32::from_le_bytes(v);
    if found != version {
        return Err(Error::Format(format!("unsupported format version {found}")));
    }
    Ok(())
}

pub fn write_checkpoint(w: &mut impl Write, spec: &ModelSpec, params: &ParamVector) -> Result<()> {
    if !params.is_consistent_with(spec) {
        return Err(Error::Structure("parameter layout does not match model spec".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    write_spec(w, spec)?;
    put_f64s(w, params.values())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(ModelSpec, ParamVector)> {
    check_magic(r, MAGIC, CHECKPOINT_VERSION)?;
    let spec = read_spec(r)?;
    let values = get_f64s(r, spec.total_params())?;
    let params = ParamVector::from_values(&spec, values).map_err(|e| Error::Format(e.to_string()))?;
    Ok((spec, params))
}

pub fn save_checkpoint(path: &Path, spec: &ModelSpec, params: &ParamVector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, spec, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelSpec, ParamVector)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
