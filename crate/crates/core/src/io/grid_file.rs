//! Space-time grid files: magic `RSWG`; `u32` width, height and
//! timestamps; `f64` origin x, origin y, resolution and frame interval; then
//! one `f32` per voxel, t-major, then row, then column. Occupancy grids
//! store probabilities, costmaps store raw costs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::grid::{GridGeometry, OccupancyGrid};
use crate::io::{expect_end, read_array, read_f64, read_u32};
use crate::plan::CostMap;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RSWG";
const WHAT: &str = "grid file";

pub fn write_values<W: Write>(w: &mut W, geom: &GridGeometry, values: &[f32]) -> Result<()> {
    if values.len() != geom.voxel_count() {
        return Err(Error::GeometryMismatch(format!(
            "{} values for {} voxels",
            values.len(),
            geom.voxel_count()
        )));
    }
    w.write_all(MAGIC)?;
    for n in [geom.width, geom.height, geom.num_timestamps] {
        let n = u32::try_from(n).map_err(|_| Error::Geometry("dimension exceeds u32".into()))?;
        w.write_all(&n.to_le_bytes())?;
    }
    for x in [
        geom.origin_x,
        geom.origin_y,
        geom.resolution,
        geom.frame_interval,
    ] {
        w.write_all(&x.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_values<R: Read>(r: &mut R) -> Result<(GridGeometry, Vec<f32>)> {
    if &read_array::<4>(r, WHAT)? != MAGIC {
        return Err(Error::format(WHAT, "bad magic"));
    }
    let width = read_u32(r, WHAT)? as usize;
    let height = read_u32(r, WHAT)? as usize;
    let num_timestamps = read_u32(r, WHAT)? as usize;
    let origin_x = read_f64(r, WHAT)?;
    let origin_y = read_f64(r, WHAT)?;
    let resolution = read_f64(r, WHAT)?;
    let frame_interval = read_f64(r, WHAT)?;
    let geom = GridGeometry {
        origin_x,
        origin_y,
        resolution,
        width,
        height,
        num_timestamps,
        frame_interval,
    };
    geom.validate()?;
    let mut values = Vec::with_capacity(geom.voxel_count());
    for _ in 0..geom.voxel_count() {
        values.push(f32::from_le_bytes(read_array(r, WHAT)?));
    }
    expect_end(r, WHAT)?;
    Ok((geom, values))
}

pub fn write_occupancy<W: Write>(w: &mut W, occ: &OccupancyGrid) -> Result<()> {
    let probs: Vec<f32> = occ.probabilities().into_iter().map(|p| p as f32).collect();
    write_values(w, occ.geometry(), &probs)
}

pub fn read_occupancy<R: Read>(r: &mut R) -> Result<OccupancyGrid> {
    let (geom, values) = read_values(r)?;
    let probs: Vec<f64> = values.into_iter().map(f64::from).collect();
    OccupancyGrid::from_probabilities(geom, &probs)
}

pub fn write_costmap<W: Write>(w: &mut W, cost: &CostMap) -> Result<()> {
    let values: Vec<f32> = cost.values().iter().map(|&c| c as f32).collect();
    write_values(w, cost.geometry(), &values)
}

pub fn read_costmap<R: Read>(r: &mut R) -> Result<CostMap> {
    let (geom, values) = read_values(r)?;
    CostMap::new(geom, values.into_iter().map(f64::from).collect())
}

pub fn save_occupancy(path: &Path, occ: &OccupancyGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_occupancy(&mut w, occ)?;
    Ok(w.flush()?)
}

pub fn load_occupancy(path: &Path) -> Result<OccupancyGrid> {
    read_occupancy(&mut BufReader::new(File::open(path)?))
}

pub fn save_costmap(path: &Path, cost: &CostMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_costmap(&mut w, cost)?;
    Ok(w.flush()?)
}

pub fn load_costmap(path: &Path) -> Result<CostMap> {
    read_costmap(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use proptest::prelude::*;

    fn geom() -> GridGeometry {
        GridGeometry::new(Vec2::new(-1.5, 2.25), 0.2, 3, 2, 2, 0.5).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_values(&mut buf, &geom(), &[0.0; 12]).unwrap();
        assert_eq!(&buf[..4], b"RSWG");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), -1.5);
        assert_eq!(buf.len(), 4 + 12 + 32 + 12 * 4);
    }

    #[test]
    fn rejects_bad_input() {
        let mut buf = Vec::new();
        write_values(&mut buf, &geom(), &[0.5; 12]).unwrap();
        assert!(read_values(&mut &buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_values(&mut &extra[..]).is_err());
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(read_values(&mut &magic[..]).is_err());
        assert!(write_values(&mut Vec::new(), &geom(), &[0.5; 11]).is_err());
        // Probabilities outside [0, 1] are not an occupancy grid.
        let mut bad = Vec::new();
        write_values(&mut bad, &geom(), &[1.5; 12]).unwrap();
        assert!(read_occupancy(&mut &bad[..]).is_err());
    }

    proptest! {
        #[test]
        fn occupancy_round_trip(probs in prop::collection::vec(0.0f32..=1.0, 12)) {
            let g = geom();
            let p64: Vec<f64> = probs.iter().map(|&p| f64::from(p)).collect();
            let occ = OccupancyGrid::from_probabilities(g, &p64).unwrap();
            let mut a = Vec::new();
            write_occupancy(&mut a, &occ).unwrap();
            let back = read_occupancy(&mut &a[..]).unwrap();
            let mut b = Vec::new();
            write_occupancy(&mut b, &back).unwrap();
            prop_assert_eq!(&a, &b);
            let (_, stored) = read_values(&mut &a[..]).unwrap();
            prop_assert_eq!(stored, probs);
        }

        #[test]
        fn costmap_round_trip(costs in prop::collection::vec(-1e6f32..1e6, 12)) {
            let g = geom();
            let c = CostMap::new(g, costs.iter().map(|&c| f64::from(c)).collect()).unwrap();
            let mut a = Vec::new();
            write_costmap(&mut a, &c).unwrap();
            prop_assert_eq!(read_costmap(&mut &a[..]).unwrap(), c);
        }
    }
}
