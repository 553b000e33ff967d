//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `PHNL` |
//! | 4     | format version (`u32`, currently 1) |
//! | 4 × 4 | `d`, `n_x`, `n_max`, `q` as `u32` |
//! | 3 × 8 | `L`, `alpha`, `omega` as `f64` |
//! | 2     | x tag (0 physical, 1 Fourier), y tag (0 nodes, 1 Hermite) |
//! | rest  | `(re, im)` pairs of `f64`, plane-major with x fastest |

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use super::{DomainConfig, Field, Grid, XSpace, YSpace};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PHNL";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 16 + 24 + 2;

pub fn encode(field: &Field) -> Vec<u8> {
    let dom = field.domain();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * field.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [dom.d, dom.n_x, dom.n_max, dom.q] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in [dom.l, dom.alpha, dom.omega] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(match field.x_space() {
        XSpace::Physical => 0,
        XSpace::Fourier => 1,
    });
    out.push(match field.y_space() {
        YSpace::Nodes => 0,
        YSpace::Hermite => 1,
    });
    for c in field.data() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

/// Decodes a snapshot; `grid` is reused when its domain matches the header.
pub fn decode(bytes: &[u8], grid: Option<&Arc<Grid>>, origin: &Path) -> Result<Field> {
    let bad = |reason: &str| Error::Format { path: origin.to_path_buf(), reason: reason.to_string() };
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("missing PHNL magic"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let domain = DomainConfig {
        d: u32_at(8) as usize,
        n_x: u32_at(12) as usize,
        n_max: u32_at(16) as usize,
        q: u32_at(20) as usize,
        l: f64_at(24),
        alpha: f64_at(32),
        omega: f64_at(40),
    };
    let x_space = match bytes[48] {
        0 => XSpace::Physical,
        1 => XSpace::Fourier,
        _ => return Err(bad("unknown x tag")),
    };
    let y_space = match bytes[49] {
        0 => YSpace::Nodes,
        1 => YSpace::Hermite,
        _ => return Err(bad("unknown y tag")),
    };
    let grid = match grid {
        Some(g) if g.domain() == &domain => g.clone(),
        _ => Grid::new(domain)?,
    };
    let body = &bytes[HEADER_LEN..];
    if body.len() % 16 != 0 {
        return Err(bad("payload is not a whole number of complex values"));
    }
    let data: Vec<Complex64> = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Field::from_data(&grid, data, x_space, y_space).map_err(|e| bad(&e.to_string()))
}

pub fn write(field: &Field, path: &Path) -> Result<()> {
    crate::io::atomic_write(path, &encode(field))
}

pub fn read(path: &Path, grid: Option<&Arc<Grid>>) -> Result<Field> {
    let bytes = std::fs::read(path)?;
    decode(&bytes, grid, path)
}
