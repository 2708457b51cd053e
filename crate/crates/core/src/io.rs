//! Field files: a flat little-endian binary plus a JSON sidecar.
//!
//! Binary layout: `n`, `nx`, `nt` as `u64`, `dt` as `f64`, `ambient_dim` as
//! `u64`, then `(nt + 1) · nxⁿ · ambient_dim` `f64` values ordered by slice,
//! spatial node (row-major) and component. Cauchy data uses the same layout
//! with `nt = 1` and `dt = 0`: slice 0 holds `φ`, slice 1 holds `ψ`.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CauchyData, GeometryError, TargetManifold};
use crate::mesh::{Grid, GridError, SpaceTimeField, TimeScale, Torus};

pub const FIELD_KIND: &str = "space_time_field";
pub const CAUCHY_KIND: &str = "cauchy_data";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: String,
    pub target: TargetManifold,
    pub time_scale: Option<TimeScale>,
    pub eps: Option<f64>,
    pub n: usize,
    pub nx: usize,
    pub nt: usize,
    pub dt: f64,
    pub ambient_dim: usize,
    pub fixed_slices: usize,
    /// Binary file, relative to the sidecar's directory.
    pub data_file: String,
    /// Cauchy data sidecar the field was solved with, relative as above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy_file: Option<String>,
    /// Free-form extras (for instance frozen bound constants).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

fn write_binary(path: &Path, header: (usize, usize, usize, f64, usize), values: &[f64]) -> Result<(), IoError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let (n, nx, nt, dt, dim) = header;
    for v in [n as u64, nx as u64, nt as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&dt.to_le_bytes())?;
    w.write_all(&(dim as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Binary {
    n: usize,
    nx: usize,
    nt: usize,
    dt: f64,
    dim: usize,
    values: Vec<f64>,
}

fn read_binary(path: &Path) -> Result<Binary, IoError> {
    let mut bytes = Vec::new();
    BufReader::new(fs::File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 40 || bytes.len() % 8 != 0 {
        return Err(IoError::Format(format!("{} bytes is not a field file", bytes.len())));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().expect("8 bytes") };
    let n = u64::from_le_bytes(word(0)) as usize;
    let nx = u64::from_le_bytes(word(1)) as usize;
    let nt = u64::from_le_bytes(word(2)) as usize;
    let dt = f64::from_le_bytes(word(3));
    let dim = u64::from_le_bytes(word(4)) as usize;
    let values: Vec<f64> = (5..bytes.len() / 8).map(|k| f64::from_le_bytes(word(k))).collect();
    let expected = (nt + 1)
        .checked_mul(nx.checked_pow(n as u32).unwrap_or(usize::MAX))
        .and_then(|v| v.checked_mul(dim));
    if expected != Some(values.len()) {
        return Err(IoError::Format(format!(
            "header n={n} nx={nx} nt={nt} dim={dim} does not match {} values",
            values.len()
        )));
    }
    Ok(Binary { n, nx, nt, dt, dim, values })
}

fn sidecar_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes `stem.bin` and `stem.json`; returns the sidecar path.
pub fn save_field(
    stem: &Path,
    field: &SpaceTimeField,
    eps: f64,
    fixed_slices: usize,
    cauchy_file: Option<String>,
    extra: Option<serde_json::Value>,
) -> Result<PathBuf, IoError> {
    let (json, bin) = sidecar_paths(stem);
    let g = &field.grid;
    write_binary(&bin, (g.torus.dim(), g.torus.nx(), g.nt, g.dt, field.dim()), &field.values)?;
    let sidecar = Sidecar {
        kind: FIELD_KIND.into(),
        target: field.target,
        time_scale: Some(g.time_scale),
        eps: Some(eps),
        n: g.torus.dim(),
        nx: g.torus.nx(),
        nt: g.nt,
        dt: g.dt,
        ambient_dim: field.dim(),
        fixed_slices,
        data_file: file_name(&bin),
        cauchy_file,
        extra,
    };
    fs::write(&json, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(json)
}

/// Reads a field from its JSON sidecar.
pub fn load_field(json: &Path) -> Result<(SpaceTimeField, Sidecar), IoError> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(json)?)?;
    if sidecar.kind != FIELD_KIND {
        return Err(IoError::Format(format!("expected a {FIELD_KIND}, found {}", sidecar.kind)));
    }
    let dir = json.parent().unwrap_or(Path::new("."));
    let bin = read_binary(&dir.join(&sidecar.data_file))?;
    if (bin.n, bin.nx, bin.nt, bin.dim) != (sidecar.n, sidecar.nx, sidecar.nt, sidecar.ambient_dim)
        || bin.dt.to_bits() != sidecar.dt.to_bits()
        || bin.dim != sidecar.target.ambient_dim()
    {
        return Err(IoError::Format("binary header disagrees with the sidecar".into()));
    }
    let scale = sidecar
        .time_scale
        .ok_or_else(|| IoError::Format("field sidecar lacks a time scale".into()))?;
    let eps = sidecar.eps.ok_or_else(|| IoError::Format("field sidecar lacks eps".into()))?;
    let torus = Torus::new(bin.n, bin.nx)?;
    let grid = Grid::new(torus, bin.nt, bin.dt, scale, eps)?;
    let field = SpaceTimeField::new(grid, sidecar.target, bin.values)?;
    Ok((field, sidecar))
}

/// Writes Cauchy data as `stem.bin` and `stem.json`; returns the sidecar path.
pub fn save_cauchy(stem: &Path, data: &CauchyData) -> Result<PathBuf, IoError> {
    let (json, bin) = sidecar_paths(stem);
    let mut values = data.phi.clone();
    values.extend_from_slice(&data.psi);
    write_binary(&bin, (data.torus.dim(), data.torus.nx(), 1, 0.0, data.dim()), &values)?;
    let sidecar = Sidecar {
        kind: CAUCHY_KIND.into(),
        target: data.target,
        time_scale: None,
        eps: None,
        n: data.torus.dim(),
        nx: data.torus.nx(),
        nt: 1,
        dt: 0.0,
        ambient_dim: data.dim(),
        fixed_slices: 0,
        data_file: file_name(&bin),
        cauchy_file: None,
        extra: None,
    };
    fs::write(&json, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(json)
}

/// Reads and validates Cauchy data from its JSON sidecar.
pub fn load_cauchy(json: &Path) -> Result<CauchyData, IoError> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(json)?)?;
    if sidecar.kind != CAUCHY_KIND {
        return Err(IoError::Format(format!("expected {CAUCHY_KIND}, found {}", sidecar.kind)));
    }
    let dir = json.parent().unwrap_or(Path::new("."));
    let bin = read_binary(&dir.join(&sidecar.data_file))?;
    if bin.nt != 1 || bin.dim != sidecar.target.ambient_dim() {
        return Err(IoError::Format("cauchy data must have two slices of target size".into()));
    }
    let torus = Torus::new(bin.n, bin.nx)?;
    let half = bin.values.len() / 2;
    let (phi, psi) = bin.values.split_at(half);
    Ok(CauchyData::from_stored(torus, sidecar.target, phi.to_vec(), psi.to_vec())?)
}
