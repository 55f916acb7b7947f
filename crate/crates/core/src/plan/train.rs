//! Max-margin planning loss and residual costmap fitting.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::OccupancyGrid;
use crate::plan::cost::{waypoint_voxels, CostMap, DEFAULT_OUT_OF_BOUNDS_COST};
use crate::plan::Trajectory;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MarginLoss {
    pub loss: f64,
    /// Candidate attaining the inner minimum of `C - D`.
    pub active: usize,
    /// Subgradient with respect to the costmap, as `(voxel, value)` pairs in
    /// voxel order. Empty when the hinge is inactive.
    pub gradient: Vec<(usize, f64)>,
}

/// Per-waypoint voxels of a trajectory, precomputed for repeated scoring.
struct Footprint(Vec<Option<usize>>);

impl Footprint {
    fn cost(&self, at: &impl Fn(usize) -> f64, out_of_bounds: f64) -> f64 {
        self.0.iter().map(|v| v.map_or(out_of_bounds, at)).sum()
    }
}

fn hinge(
    at: impl Fn(usize) -> f64,
    candidates: &[Footprint],
    expert: &Footprint,
    margins: &[f64],
    out_of_bounds: f64,
) -> MarginLoss {
    let mut active = 0;
    let mut best = f64::INFINITY;
    for (k, (c, d)) in candidates.iter().zip(margins).enumerate() {
        let value = c.cost(&at, out_of_bounds) - d;
        if value < best {
            best = value;
            active = k;
        }
    }
    let value = expert.cost(&at, out_of_bounds) - best;
    if !(value > 0.0) {
        return MarginLoss {
            loss: 0.0,
            active,
            gradient: Vec::new(),
        };
    }
    let mut grad = BTreeMap::new();
    for v in expert.0.iter().flatten() {
        *grad.entry(*v).or_insert(0.0) += 1.0;
    }
    for v in candidates[active].0.iter().flatten() {
        *grad.entry(*v).or_insert(0.0) -= 1.0;
    }
    MarginLoss {
        loss: value,
        active,
        gradient: grad.into_iter().filter(|&(_, g)| g != 0.0).collect(),
    }
}

/// `[C(expert) - min_k (C(candidate_k) - margin_k)]_+`, with ties in the
/// minimum going to the lowest index.
pub fn max_margin_loss(
    cost: &CostMap,
    candidates: &[Trajectory],
    expert: &Trajectory,
    margins: &[f64],
    out_of_bounds: f64,
) -> Result<MarginLoss> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate trajectories"));
    }
    if margins.len() != candidates.len() {
        return Err(Error::Config(format!(
            "{} margins for {} candidates",
            margins.len(),
            candidates.len()
        )));
    }
    let geom = cost.geometry();
    let feet: Vec<Footprint> = candidates
        .iter()
        .map(|c| Footprint(waypoint_voxels(c, geom)))
        .collect();
    let expert = Footprint(waypoint_voxels(expert, geom));
    let values = cost.values();
    Ok(hinge(|v| values[v], &feet, &expert, margins, out_of_bounds))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub out_of_bounds: f64,
}

pub const DEFAULT_ALPHA: f64 = 100.0;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            iterations: 200,
            out_of_bounds: DEFAULT_OUT_OF_BOUNDS_COST,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.out_of_bounds.is_finite() {
            return Err(Error::Config(
                "training needs a positive learning rate and a finite out-of-bounds cost".into(),
            ));
        }
        Ok(())
    }
}

/// One scenario's training data.
#[derive(Clone, Debug)]
pub struct ResidualProblem<'a> {
    pub occupancy: &'a OccupancyGrid,
    pub candidates: &'a [Trajectory],
    pub expert: &'a Trajectory,
    pub margins: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualFit {
    pub residual: CostMap,
    /// Loss before each step taken.
    pub losses: Vec<f64>,
}

/// Fits one residual table per scenario by subgradient descent on the
/// max-margin loss of the composed cost `residual + alpha * p`, starting
/// from zero and stopping once the loss vanishes.
pub fn train_residual(
    problems: &[ResidualProblem],
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<Vec<ResidualFit>> {
    cfg.validate()?;
    if !alpha.is_finite() {
        return Err(Error::Config("alpha must be finite".into()));
    }
    problems
        .par_iter()
        .map(|p| train_one(p, alpha, cfg))
        .collect()
}

fn train_one(problem: &ResidualProblem, alpha: f64, cfg: &TrainConfig) -> Result<ResidualFit> {
    if problem.candidates.is_empty() {
        return Err(Error::Empty("candidate trajectories"));
    }
    if problem.margins.len() != problem.candidates.len() {
        return Err(Error::Config("one margin per candidate required".into()));
    }
    let occ = problem.occupancy;
    let geom = *occ.geometry();
    let feet: Vec<Footprint> = problem
        .candidates
        .iter()
        .map(|c| Footprint(waypoint_voxels(c, &geom)))
        .collect();
    let expert = Footprint(waypoint_voxels(problem.expert, &geom));
    let mut residual = CostMap::zeros(geom);
    let mut losses = Vec::new();
    for iteration in 0..cfg.iterations {
        let values = residual.values();
        let step = hinge(
            |v| values[v] + alpha * occ.probability(v),
            &feet,
            &expert,
            &problem.margins,
            cfg.out_of_bounds,
        );
        if !step.loss.is_finite() {
            return Err(Error::Diverged {
                iteration,
                loss: step.loss,
            });
        }
        losses.push(step.loss);
        if step.loss == 0.0 {
            break;
        }
        let values = residual.values_mut();
        for (v, g) in step.gradient {
            values[v] -= cfg.learning_rate * g;
        }
    }
    Ok(ResidualFit { residual, losses })
}
