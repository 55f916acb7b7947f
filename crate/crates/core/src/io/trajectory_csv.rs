//! Trajectory CSV: header `frame,x,y`. Future trajectories use frames
//! `1..=T`; past tracks end at frame 0.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::plan::{PastTrack, Trajectory, Waypoint};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Row {
    frame: i64,
    x: f64,
    y: f64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::format("trajectory csv", e.to_string())
}

fn write_rows<W: Write>(w: W, rows: impl Iterator<Item = Row>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read>(r: R) -> Result<Vec<Row>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_error))
        .collect()
}

pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    write_rows(
        w,
        traj.waypoints().iter().map(|p| Row {
            frame: p.frame as i64,
            x: p.x,
            y: p.y,
        }),
    )
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Trajectory> {
    let waypoints = read_rows(r)?
        .into_iter()
        .map(|row| {
            let frame = usize::try_from(row.frame)
                .map_err(|_| Error::format("trajectory csv", format!("frame {}", row.frame)))?;
            Ok(Waypoint::new(row.x, row.y, frame))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(waypoints)
}

/// Writes the track with frames counting up to 0.
pub fn write_past<W: Write>(w: W, past: &PastTrack) -> Result<()> {
    let n = past.positions.len() as i64;
    write_rows(
        w,
        past.positions.iter().enumerate().map(|(k, p)| Row {
            frame: k as i64 + 1 - n,
            x: p.x,
            y: p.y,
        }),
    )
}

pub fn read_past<R: Read>(r: R) -> Result<PastTrack> {
    let rows = read_rows(r)?;
    let n = rows.len() as i64;
    for (k, row) in rows.iter().enumerate() {
        if row.frame != k as i64 + 1 - n {
            return Err(Error::format(
                "past csv",
                "frames must be consecutive and end at 0",
            ));
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty("past track"));
    }
    Ok(PastTrack::new(
        rows.iter().map(|r| Vec2::new(r.x, r.y)).collect(),
    ))
}
