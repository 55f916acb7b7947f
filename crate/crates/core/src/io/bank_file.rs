//! Trajectory bank files: magic `RSTB`; `f64` speed bin, heading-rate bin
//! and frame interval; `u32` frames and bin count; then per bin its `i64`
//! key pair, a `u32` future count and each future's `f64` x, y pairs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::geom::Vec2;
use crate::io::{expect_end, read_array, read_f64, read_i64, read_u32};
use crate::plan::TrajectoryBank;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RSTB";
const WHAT: &str = "bank file";

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::format(WHAT, "count exceeds u32"))
}

pub fn write_bank<W: Write>(w: &mut W, bank: &TrajectoryBank) -> Result<()> {
    w.write_all(MAGIC)?;
    for x in [bank.speed_bin, bank.heading_rate_bin, bank.frame_interval] {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&u32_of(bank.frames)?.to_le_bytes())?;
    w.write_all(&u32_of(bank.bins().len())?.to_le_bytes())?;
    for (&(ks, kr), futures) in bank.bins() {
        w.write_all(&ks.to_le_bytes())?;
        w.write_all(&kr.to_le_bytes())?;
        w.write_all(&u32_of(futures.len())?.to_le_bytes())?;
        for p in futures.iter().flatten() {
            w.write_all(&p.x.to_le_bytes())?;
            w.write_all(&p.y.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_bank<R: Read>(r: &mut R) -> Result<TrajectoryBank> {
    if &read_array::<4>(r, WHAT)? != MAGIC {
        return Err(Error::format(WHAT, "bad magic"));
    }
    let speed_bin = read_f64(r, WHAT)?;
    let heading_rate_bin = read_f64(r, WHAT)?;
    let frame_interval = read_f64(r, WHAT)?;
    let frames = read_u32(r, WHAT)? as usize;
    let nbins = read_u32(r, WHAT)?;
    let mut bins = BTreeMap::new();
    for _ in 0..nbins {
        let key = (read_i64(r, WHAT)?, read_i64(r, WHAT)?);
        let count = read_u32(r, WHAT)?;
        let mut futures = Vec::new();
        for _ in 0..count {
            let mut f = Vec::with_capacity(frames);
            for _ in 0..frames {
                f.push(Vec2::new(read_f64(r, WHAT)?, read_f64(r, WHAT)?));
            }
            futures.push(f);
        }
        if bins.insert(key, futures).is_some() {
            return Err(Error::format(WHAT, "duplicate bin"));
        }
    }
    expect_end(r, WHAT)?;
    TrajectoryBank::from_bins(speed_bin, heading_rate_bin, frame_interval, frames, bins)
}

pub fn save_bank(path: &Path, bank: &TrajectoryBank) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bank(&mut w, bank)?;
    Ok(w.flush()?)
}

pub fn load_bank(path: &Path) -> Result<TrajectoryBank> {
    read_bank(&mut BufReader::new(File::open(path)?))
}
