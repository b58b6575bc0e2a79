//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                      |
//! |-------|------------------------------|
//! | 4     | magic `SFPM`                 |
//! | 4     | format version (`u32`, = 1)  |
//! | 4     | dimension `d` (`u32`)        |
//! | 4     | points per axis `n` (`u32`)  |
//! | 8     | side length `L` (`f64`)      |
//! | 8     | `alpha` (`f64`)              |
//! | 8     | `m` (`f64`)                  |
//! | 8     | time `t` (`f64`)             |
//! | 8 n^d | values (`f64`, row-major)    |

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Field, LatticeGrid};

pub const MAGIC: [u8; 4] = *b"SFPM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 48;

/// A field together with the equation parameters it was produced under.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub alpha: f64,
    pub m: f64,
}

pub fn encode(field: &Field, alpha: f64, m: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.points_per_dim() as u32).to_le_bytes());
    for v in [g.side_length(), alpha, m, field.time()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write(w: &mut impl Write, field: &Field, alpha: f64, m: f64) -> Result<()> {
    w.write_all(&encode(field, alpha, m))?;
    Ok(())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err(Error::Io("not a snapshot file".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Io(format!("unsupported snapshot version {version}")));
    }
    let grid = LatticeGrid::new(
        u32_at(bytes, 8) as usize,
        u32_at(bytes, 12) as usize,
        f64_at(bytes, 16),
    )?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(Error::Io(format!(
            "snapshot body has {} bytes, expected {}",
            body.len(),
            8 * grid.len()
        )));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Snapshot {
        field: Field::new(grid, values)?.with_time(f64_at(bytes, 40)),
        alpha: f64_at(bytes, 24),
        m: f64_at(bytes, 32),
    })
}

pub fn read(r: &mut impl Read) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}
