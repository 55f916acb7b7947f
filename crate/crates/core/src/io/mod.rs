//! File formats. Binary formats are little-endian with fixed layouts.

pub mod bank_file;
pub mod grid_file;
pub mod pgm;
pub mod scenario_file;
pub mod sweep_csv;
pub mod trajectory_csv;

use std::io::Read;

use crate::{Error, Result};

pub(crate) fn read_array<const N: usize>(r: &mut impl Read, what: &'static str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(what, "truncated"),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub(crate) fn read_u32(r: &mut impl Read, what: &'static str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn read_f64(r: &mut impl Read, what: &'static str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn read_i64(r: &mut impl Read, what: &'static str) -> Result<i64> {
    Ok(i64::from_le_bytes(read_array(r, what)?))
}

pub(crate) fn expect_end(r: &mut impl Read, what: &'static str) -> Result<()> {
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => Ok(()),
        _ => Err(Error::format(what, "trailing bytes")),
    }
}
