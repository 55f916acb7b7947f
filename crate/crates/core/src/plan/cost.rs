use crate::grid::{GridGeometry, OccupancyGrid};
use crate::plan::Trajectory;
use crate::{Error, Result};

/// Cost charged to a waypoint outside the grid.
pub const DEFAULT_OUT_OF_BOUNDS_COST: f64 = 1e3;

/// A scalar cost per space-time voxel, laid out like [`OccupancyGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct CostMap {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl CostMap {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.voxel_count() {
            return Err(Error::GeometryMismatch(format!(
                "{} cost values for {} voxels",
                values.len(),
                geometry.voxel_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("cost at voxel {k} is not finite")));
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.voxel_count();
        Self {
            geometry,
            values: vec![0.0; n],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Voxel of every waypoint, `None` where it leaves the grid.
pub fn waypoint_voxels(traj: &Trajectory, geom: &GridGeometry) -> Vec<Option<usize>> {
    traj.waypoints()
        .iter()
        .map(|w| geom.voxel_at(w.position(), w.frame))
        .collect()
}

/// Sum of the costs at each waypoint's voxel.
pub fn trajectory_cost(traj: &Trajectory, cost: &CostMap, out_of_bounds: f64) -> f64 {
    waypoint_voxels(traj, &cost.geometry)
        .into_iter()
        .map(|v| v.map_or(out_of_bounds, |v| cost.values[v]))
        .sum()
}

/// Occupancy probability at each waypoint's own voxel. Projecting freespace
/// from a sensor placed at the waypoint reduces to this lookup, since the
/// running maximum over a single voxel is that voxel.
pub fn occupancy_cost_shortcut(traj: &Trajectory, occ: &OccupancyGrid) -> Vec<Option<f64>> {
    waypoint_voxels(traj, occ.geometry())
        .into_iter()
        .map(|v| v.map(|v| occ.probability(v)))
        .collect()
}

/// `residual + alpha * p` voxelwise.
pub fn compose_costmap(residual: &CostMap, occ: &OccupancyGrid, alpha: f64) -> Result<CostMap> {
    residual.geometry.ensure_same(occ.geometry())?;
    let values = residual
        .values
        .iter()
        .enumerate()
        .map(|(k, &r)| r + alpha * occ.probability(k))
        .collect();
    CostMap::new(residual.geometry, values)
}
