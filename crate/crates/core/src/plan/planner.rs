use rayon::prelude::*;

use crate::grid::OccupancyGrid;
use crate::plan::cost::{waypoint_voxels, CostMap};
use crate::plan::Trajectory;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlanChoice {
    pub index: usize,
    pub cost: f64,
    pub trajectory: Trajectory,
}

/// Cost of each candidate under `residual + alpha * p`, read directly at
/// the waypoints.
pub fn candidate_costs(
    occ: &OccupancyGrid,
    residual: &CostMap,
    alpha: f64,
    candidates: &[Trajectory],
    out_of_bounds: f64,
) -> Result<Vec<f64>> {
    residual.geometry().ensure_same(occ.geometry())?;
    let r = residual.values();
    Ok(candidates
        .par_iter()
        .map(|c| {
            waypoint_voxels(c, occ.geometry())
                .into_iter()
                .map(|v| v.map_or(out_of_bounds, |v| r[v] + alpha * occ.probability(v)))
                .sum()
        })
        .collect())
}

/// The cheapest candidate; ties go to the lowest index.
pub fn plan(
    occ: &OccupancyGrid,
    residual: &CostMap,
    alpha: f64,
    candidates: &[Trajectory],
    out_of_bounds: f64,
) -> Result<PlanChoice> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate trajectories"));
    }
    let costs = candidate_costs(occ, residual, alpha, candidates, out_of_bounds)?;
    let mut index = 0;
    for (k, &c) in costs.iter().enumerate() {
        if c < costs[index] {
            index = k;
        }
    }
    Ok(PlanChoice {
        index,
        cost: costs[index],
        trajectory: candidates[index].clone(),
    })
}
