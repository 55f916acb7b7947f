//! Binary 8-bit PGM (P5) images of grid slices, north up: the first image
//! row is the grid's top row.

use std::io::Write;

use crate::grid::GridGeometry;
use crate::{Error, Result};

/// Gray level of a value in `[0, 1]`, clamped and rounded.
pub fn gray(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// One slice of a voxel array as image bytes, scaled by `1 / scale`.
pub fn slice_pixels(
    geom: &GridGeometry,
    values: &[f64],
    slice: usize,
    scale: f64,
) -> Result<Vec<u8>> {
    if values.len() != geom.voxel_count() || slice >= geom.num_timestamps {
        return Err(Error::GeometryMismatch(
            "image slice outside the grid".into(),
        ));
    }
    let base = slice * geom.cells_per_slice();
    let mut out = Vec::with_capacity(geom.cells_per_slice());
    for j in (0..geom.height).rev() {
        for i in 0..geom.width {
            let v = values[base + j * geom.width + i];
            out.push(gray(if scale > 0.0 { v / scale } else { 0.0 }));
        }
    }
    Ok(out)
}

pub fn write_pgm<W: Write>(w: &mut W, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::GeometryMismatch(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;

    #[test]
    fn north_up_layout() {
        let g = GridGeometry::new(Vec2::ZERO, 1.0, 2, 2, 1, 0.5).unwrap();
        // Row 0 is the bottom row of the grid.
        let px = slice_pixels(&g, &[0.0, 1.0, 0.5, 0.25], 0, 1.0).unwrap();
        assert_eq!(px, vec![128, 64, 0, 255]);
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 2, &px).unwrap();
        assert_eq!(&buf[..11], b"P5\n2 2\n255\n");
        assert_eq!(&buf[11..], &px[..]);
        assert!(write_pgm(&mut Vec::new(), 3, 2, &px).is_err());
    }
}
