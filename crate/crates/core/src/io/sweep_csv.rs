//! Sweep CSV: header `frame,ox,oy,dx,dy,dist,hit`, one row per ray. Floats
//! are written in their shortest round-trip form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::raycast::{Sweep, SweepRay};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Row {
    frame: i64,
    ox: f64,
    oy: f64,
    dx: f64,
    dy: f64,
    dist: f64,
    hit: u8,
}

fn csv_error(e: csv::Error) -> Error {
    Error::format("sweep csv", e.to_string())
}

pub fn write_sweeps<W: Write>(w: W, sweeps: &[Sweep]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in sweeps {
        for r in &s.rays {
            out.serialize(Row {
                frame: s.frame,
                ox: s.origin.x,
                oy: s.origin.y,
                dx: r.direction.x,
                dy: r.direction.y,
                dist: r.distance,
                hit: r.hit as u8,
            })
            .map_err(csv_error)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Consecutive rows sharing a frame and origin form one sweep.
pub fn read_sweeps<R: Read>(r: R) -> Result<Vec<Sweep>> {
    let mut sweeps: Vec<Sweep> = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: Row = row.map_err(csv_error)?;
        let hit = match row.hit {
            0 => false,
            1 => true,
            h => return Err(Error::format("sweep csv", format!("hit flag {h}"))),
        };
        let origin = Vec2::new(row.ox, row.oy);
        let ray = SweepRay {
            direction: Vec2::new(row.dx, row.dy),
            distance: row.dist,
            hit,
        };
        match sweeps.last_mut() {
            Some(s) if s.frame == row.frame && s.origin == origin => s.rays.push(ray),
            _ => sweeps.push(Sweep {
                frame: row.frame,
                origin,
                rays: vec![ray],
            }),
        }
    }
    Ok(sweeps)
}

/// File name of a sweep in a sweep directory, e.g. `frame_03.csv` or
/// `frame_m02.csv` for past frames.
pub fn sweep_file_name(frame: i64) -> String {
    if frame < 0 {
        format!("frame_m{:02}.csv", -frame)
    } else {
        format!("frame_{frame:02}.csv")
    }
}

pub fn save_sweep(dir: &Path, sweep: &Sweep) -> Result<PathBuf> {
    let path = dir.join(sweep_file_name(sweep.frame));
    write_sweeps(File::create(&path)?, std::slice::from_ref(sweep))?;
    Ok(path)
}

/// Every `.csv` file in `dir`, ordered by frame. Sweeps sharing a frame keep
/// file-name order.
pub fn load_sweep_dir(dir: &Path) -> Result<Vec<Sweep>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "csv"));
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_sweeps(File::open(p)?)?);
    }
    out.sort_by_key(|s| s.frame);
    Ok(out)
}
