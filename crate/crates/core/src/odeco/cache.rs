//! Binary cache of the algebra tables: an 8-byte magic, a version, the value
//! count and little-endian f64 payload.

use std::fs;
use std::path::Path;

use super::rotation::{Band2, Band4, BandRotation, Dense15};
use super::{AlgebraTables, StretchBasis};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ODECOSH\0";
pub const CACHE_VERSION: u32 = 1;
const PAYLOAD: usize = 45 + 3 * 225 + 2 * (25 + 81);

fn band_values(r: &BandRotation, out: &mut Vec<f64>) {
    out.extend_from_slice(r.band2.as_slice());
    out.extend_from_slice(r.band4.as_slice());
}

pub fn save_tables(path: &Path, tables: &AlgebraTables) -> Result<()> {
    let mut values = Vec::with_capacity(PAYLOAD);
    values.extend_from_slice(tables.stretch.as_slice());
    values.extend_from_slice(tables.lx.as_slice());
    values.extend_from_slice(tables.ly.as_slice());
    values.extend_from_slice(tables.lz.as_slice());
    band_values(&tables.z_to_x, &mut values);
    band_values(&tables.z_to_y, &mut values);
    let mut bytes = Vec::with_capacity(16 + 8 * PAYLOAD);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tables(path: &Path) -> Result<AlgebraTables> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Invalid(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not an algebra table cache"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(bad(&format!("cache version {version}, expected {CACHE_VERSION}")));
    }
    let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if count != PAYLOAD || bytes.len() != 16 + 8 * count {
        return Err(bad("truncated or oversized payload"));
    }
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut at = 0;
    let mut take = |n: usize| {
        let s = &values[at..at + n];
        at += n;
        s
    };
    let stretch = StretchBasis::from_column_slice(take(45));
    let lx = Dense15::from_column_slice(take(225));
    let ly = Dense15::from_column_slice(take(225));
    let lz = Dense15::from_column_slice(take(225));
    let mut band = || BandRotation {
        band2: Band2::from_column_slice(take(25)),
        band4: Band4::from_column_slice(take(81)),
    };
    let z_to_x = band();
    let z_to_y = band();
    Ok(AlgebraTables {
        stretch,
        lx,
        ly,
        lz,
        z_to_x,
        z_to_y,
    })
}

/// Loads the cache, rebuilding and rewriting it when absent or stale.
pub fn load_or_build_tables(path: &Path) -> Result<AlgebraTables> {
    match load_tables(path) {
        Ok(t) => Ok(t),
        Err(_) => {
            let t = AlgebraTables::build();
            save_tables(path, &t)?;
            Ok(t)
        }
    }
}
