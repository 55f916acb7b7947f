//! Space-time bird's-eye-view voxel grid.
//!
//! Voxels are addressed by a spatial cell `(i, j)` and a time slice. Slice `s`
//! holds future frame `s + 1`, so a grid with `num_timestamps = 7` covers
//! frames `1..=7`. Storage is t-major, then row (`j`) major, then `i`.

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::sim::Scenario;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    pub origin_x: f64,
    pub origin_y: f64,
    /// Meters per (square) cell.
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub num_timestamps: usize,
    /// Seconds between consecutive frames.
    pub frame_interval: f64,
}

impl Default for GridGeometry {
    /// 704 x 400 cells of 0.2 m centered on the ego, seven frames at 0.5 s.
    fn default() -> Self {
        Self {
            origin_x: -70.4,
            origin_y: -40.0,
            resolution: 0.2,
            width: 704,
            height: 400,
            num_timestamps: 7,
            frame_interval: 0.5,
        }
    }
}

impl GridGeometry {
    pub fn new(
        origin: Vec2,
        resolution: f64,
        width: usize,
        height: usize,
        num_timestamps: usize,
        frame_interval: f64,
    ) -> Result<Self> {
        let g = Self {
            origin_x: origin.x,
            origin_y: origin.y,
            resolution,
            width,
            height,
            num_timestamps,
            frame_interval,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid of `width x height` cells whose cell centers fall on integer
    /// multiples of the resolution, with cell `(width / 2, height / 2)`
    /// centered on the world origin.
    pub fn centered(
        resolution: f64,
        width: usize,
        height: usize,
        num_timestamps: usize,
        frame_interval: f64,
    ) -> Result<Self> {
        let origin = Vec2::new(
            -((width / 2) as f64 + 0.5) * resolution,
            -((height / 2) as f64 + 0.5) * resolution,
        );
        Self::new(
            origin,
            resolution,
            width,
            height,
            num_timestamps,
            frame_interval,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::Geometry(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        if self.width == 0 || self.height == 0 || self.num_timestamps == 0 {
            return Err(Error::Geometry(format!(
                "width, height and num_timestamps must be >= 1, got {}x{}x{}",
                self.width, self.height, self.num_timestamps
            )));
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            return Err(Error::Geometry("origin must be finite".into()));
        }
        if !(self.frame_interval > 0.0 && self.frame_interval.is_finite()) {
            return Err(Error::Geometry(format!(
                "frame interval must be positive, got {}",
                self.frame_interval
            )));
        }
        Ok(())
    }

    pub fn origin(&self) -> Vec2 {
        Vec2::new(self.origin_x, self.origin_y)
    }

    /// Upper corner of the spatial extent.
    pub fn max_corner(&self) -> Vec2 {
        Vec2::new(
            self.origin_x + self.width as f64 * self.resolution,
            self.origin_y + self.height as f64 * self.resolution,
        )
    }

    pub fn cells_per_slice(&self) -> usize {
        self.width * self.height
    }

    pub fn voxel_count(&self) -> usize {
        self.cells_per_slice() * self.num_timestamps
    }

    /// Cell containing `p`, or `None` outside `[0, width) x [0, height)`.
    pub fn world_to_cell(&self, p: Vec2) -> Option<Cell> {
        let u = ((p.x - self.origin_x) / self.resolution).floor();
        let v = ((p.y - self.origin_y) / self.resolution).floor();
        if u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64 {
            Some(Cell::new(u as usize, v as usize))
        } else {
            None
        }
    }

    pub fn cell_to_world_center(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            self.origin_x + (cell.i as f64 + 0.5) * self.resolution,
            self.origin_y + (cell.j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn index(&self, cell: Cell, slice: usize) -> usize {
        debug_assert!(cell.i < self.width && cell.j < self.height && slice < self.num_timestamps);
        (slice * self.height + cell.j) * self.width + cell.i
    }

    /// Inverse of [`GridGeometry::index`].
    pub fn unindex(&self, index: usize) -> (Cell, usize) {
        let per = self.cells_per_slice();
        let slice = index / per;
        let rem = index % per;
        (Cell::new(rem % self.width, rem / self.width), slice)
    }

    /// Time slice holding future `frame` (1-based).
    pub fn slice_of_frame(&self, frame: i64) -> Option<usize> {
        (frame >= 1 && frame <= self.num_timestamps as i64).then(|| frame as usize - 1)
    }

    pub fn check_frame(&self, frame: i64) -> Result<usize> {
        self.slice_of_frame(frame).ok_or(Error::FrameOutOfRange {
            frame,
            max: self.num_timestamps,
        })
    }

    /// Voxel index of a world point at a future frame, if inside the grid.
    pub fn voxel_at(&self, p: Vec2, frame: usize) -> Option<usize> {
        let slice = self.slice_of_frame(frame as i64)?;
        self.world_to_cell(p).map(|c| self.index(c, slice))
    }

    pub fn ensure_same(&self, other: &GridGeometry) -> Result<()> {
        if self != other {
            return Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of `p`; `0` and `1` map to negative and positive infinity.
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Occupancy stored as logits; probabilities are computed on access.
///
/// Hard (0/1) grids are represented with infinite logits so that their
/// probability view is exactly 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    logits: Vec<f64>,
}

impl OccupancyGrid {
    pub fn constant(geometry: GridGeometry, logit: f64) -> Self {
        Self {
            logits: vec![logit; geometry.voxel_count()],
            geometry,
        }
    }

    /// All-free hard grid.
    pub fn free(geometry: GridGeometry) -> Self {
        Self::constant(geometry, f64::NEG_INFINITY)
    }

    pub fn from_logits(geometry: GridGeometry, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != geometry.voxel_count() {
            return Err(Error::GeometryMismatch(format!(
                "expected {} logits, got {}",
                geometry.voxel_count(),
                logits.len()
            )));
        }
        Ok(Self { geometry, logits })
    }

    pub fn from_probabilities(geometry: GridGeometry, probabilities: &[f64]) -> Result<Self> {
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::format(
                "occupancy",
                format!("probability {p} outside [0, 1]"),
            ));
        }
        Self::from_logits(geometry, probabilities.iter().map(|&p| logit(p)).collect())
    }

    pub fn from_hard(geometry: GridGeometry, occupied: &[bool]) -> Result<Self> {
        Self::from_logits(
            geometry,
            occupied
                .iter()
                .map(|&o| if o { f64::INFINITY } else { f64::NEG_INFINITY })
                .collect(),
        )
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn probability(&self, index: usize) -> f64 {
        sigmoid(self.logits[index])
    }

    pub fn probability_at(&self, cell: Cell, slice: usize) -> f64 {
        self.probability(self.geometry.index(cell, slice))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l)).collect()
    }

    /// Hard view: occupied where the probability is at least 0.5.
    pub fn is_occupied(&self, index: usize) -> bool {
        self.logits[index] >= 0.0
    }

    pub fn hard(&self) -> Vec<bool> {
        self.logits.iter().map(|&l| l >= 0.0).collect()
    }
}

/// Inclusive range of cell indices overlapping `[lo, hi]` along one axis.
fn cell_span(lo: f64, hi: f64, origin: f64, res: f64, n: usize) -> Option<(usize, usize)> {
    let a = ((lo - origin) / res).floor();
    let b = ((hi - origin) / res).floor();
    if b < 0.0 || a >= n as f64 {
        return None;
    }
    Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
}

/// Hard ground-truth occupancy: a voxel is occupied iff its cell center lies
/// inside any obstacle rectangle at that slice's frame.
pub fn rasterize_ground_truth(scenario: &Scenario, geom: &GridGeometry) -> OccupancyGrid {
    let mut occupied = vec![false; geom.voxel_count()];
    for slice in 0..geom.num_timestamps {
        for b in scenario.boxes_at(slice as i64 + 1) {
            let (lo, hi) = b.bounds();
            let Some((i0, i1)) = cell_span(lo.x, hi.x, geom.origin_x, geom.resolution, geom.width)
            else {
                continue;
            };
            let Some((j0, j1)) = cell_span(lo.y, hi.y, geom.origin_y, geom.resolution, geom.height)
            else {
                continue;
            };
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let cell = Cell::new(i, j);
                    if b.contains(geom.cell_to_world_center(cell)) {
                        occupied[geom.index(cell, slice)] = true;
                    }
                }
            }
        }
    }
    OccupancyGrid::from_hard(*geom, &occupied).expect("sized from geometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(w: usize, h: usize, t: usize) -> GridGeometry {
        GridGeometry::new(Vec2::ZERO, 0.2, w, h, t, 0.5).unwrap()
    }

    #[test]
    fn world_to_cell_examples() {
        let g = geom(400, 400, 1);
        assert_eq!(g.world_to_cell(Vec2::new(0.0, 0.0)), Some(Cell::new(0, 0)));
        assert_eq!(g.world_to_cell(Vec2::new(1.0, 0.5)), Some(Cell::new(5, 2)));
        assert_eq!(g.world_to_cell(Vec2::new(80.0, 0.1)), None);
        assert_eq!(g.world_to_cell(Vec2::new(-1e-12, 0.1)), None);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(GridGeometry::new(Vec2::ZERO, 0.0, 4, 4, 1, 0.5).is_err());
        assert!(GridGeometry::new(Vec2::ZERO, 0.2, 0, 4, 1, 0.5).is_err());
        assert!(GridGeometry::new(Vec2::ZERO, 0.2, 4, 4, 0, 0.5).is_err());
    }

    #[test]
    fn default_geometry_layout() {
        let g = GridGeometry::default();
        assert_eq!((g.width, g.height, g.num_timestamps), (704, 400, 7));
        assert_eq!(g.resolution, 0.2);
        assert_eq!(g.voxel_count(), 704 * 400 * 7);
    }

    #[test]
    fn layout_is_t_major_then_rows() {
        let g = geom(3, 2, 2);
        assert_eq!(g.index(Cell::new(1, 0), 0), 1);
        assert_eq!(g.index(Cell::new(0, 1), 0), 3);
        assert_eq!(g.index(Cell::new(0, 0), 1), 6);
        assert_eq!(g.unindex(10), (Cell::new(1, 1), 1));
    }

    #[test]
    fn hard_view_and_probability_edges() {
        let g = geom(2, 1, 1);
        let occ = OccupancyGrid::from_hard(g, &[true, false]).unwrap();
        assert_eq!(occ.probabilities(), vec![1.0, 0.0]);
        assert_eq!(occ.hard(), vec![true, false]);
        let soft = OccupancyGrid::from_probabilities(g, &[0.5, 0.49]).unwrap();
        assert_eq!(soft.hard(), vec![true, false]);
        assert!(OccupancyGrid::from_probabilities(g, &[1.5, 0.0]).is_err());
        assert!(OccupancyGrid::from_logits(g, vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn cell_round_trip(w in 1usize..300, h in 1usize..300, ox in -50.0f64..50.0, oy in -50.0f64..50.0,
                           res in 0.05f64..1.0, fi in 0.0f64..1.0, fj in 0.0f64..1.0) {
            let g = GridGeometry::new(Vec2::new(ox, oy), res, w, h, 1, 0.5).unwrap();
            let cell = Cell::new(((w as f64) * fi) as usize % w, ((h as f64) * fj) as usize % h);
            prop_assert_eq!(g.world_to_cell(g.cell_to_world_center(cell)), Some(cell));
        }

        #[test]
        fn logit_probability_round_trip(x in -15.0f64..15.0) {
            let back = logit(sigmoid(x));
            prop_assert!((back - x).abs() <= 1e-6 * x.abs().max(1e-3));
        }
    }
}
