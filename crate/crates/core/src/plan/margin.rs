//! Trajectory margins for max-margin training: waypoint distance to the
//! expert, optionally plus a penalty per waypoint that violates ground truth.

use std::fmt;

use crate::geom::OrientedBox;
use crate::grid::GridGeometry;
use crate::learn::make_labels;
use crate::plan::{Trajectory, Waypoint};
use crate::raycast::Sweep;
use crate::{Error, Result};

/// Voxels seen free by at least one ground-truth sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct FreespaceMask {
    geometry: GridGeometry,
    free: Vec<bool>,
}

impl FreespaceMask {
    pub fn from_sweeps(sweeps: &[Sweep], geom: &GridGeometry) -> Result<Self> {
        let mut free = vec![false; geom.voxel_count()];
        for sweep in sweeps {
            for ray in make_labels(sweep, geom)?.rays {
                for (v, &g) in ray.traversal.voxels(geom).zip(&ray.labels.free) {
                    free[v] |= g;
                }
            }
        }
        Ok(Self {
            geometry: *geom,
            free,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn free(&self) -> &[bool] {
        &self.free
    }

    /// Out-of-grid waypoints are never free.
    pub fn contains(&self, w: &Waypoint) -> bool {
        self.geometry
            .voxel_at(w.position(), w.frame)
            .is_some_and(|v| self.free[v])
    }
}

/// Ground truth a penalty may consult.
#[derive(Clone, Copy, Debug, Default)]
pub struct PenaltyContext<'a> {
    pub freespace: Option<&'a FreespaceMask>,
    /// Object boxes per future frame, indexed by `frame - 1`.
    pub boxes: Option<&'a [Vec<OrientedBox>]>,
}

pub trait MarginPenalty: Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of waypoints of `candidate` that violate the ground truth.
    fn violations(&self, candidate: &Trajectory, ctx: &PenaltyContext) -> Result<usize>;
}

pub struct Plain;

impl MarginPenalty for Plain {
    fn name(&self) -> &'static str {
        "plain"
    }

    fn violations(&self, _: &Trajectory, _: &PenaltyContext) -> Result<usize> {
        Ok(0)
    }
}

/// Waypoints outside the freespace visible to future sweeps.
pub struct FreespaceGuided;

impl MarginPenalty for FreespaceGuided {
    fn name(&self) -> &'static str {
        "freespace"
    }

    fn violations(&self, candidate: &Trajectory, ctx: &PenaltyContext) -> Result<usize> {
        let mask = ctx
            .freespace
            .ok_or_else(|| Error::Config("freespace penalty needs a freespace mask".into()))?;
        Ok(candidate
            .waypoints()
            .iter()
            .filter(|w| !mask.contains(w))
            .count())
    }
}

/// Waypoints inside any object box at their frame.
pub struct ObjectGuided;

impl MarginPenalty for ObjectGuided {
    fn name(&self) -> &'static str {
        "object"
    }

    fn violations(&self, candidate: &Trajectory, ctx: &PenaltyContext) -> Result<usize> {
        let boxes = ctx
            .boxes
            .ok_or_else(|| Error::Config("object penalty needs object boxes".into()))?;
        Ok(candidate
            .waypoints()
            .iter()
            .filter(|w| {
                boxes
                    .get(w.frame - 1)
                    .is_some_and(|bs| bs.iter().any(|b| b.contains(w.position())))
            })
            .count())
    }
}

static PENALTIES: [&dyn MarginPenalty; 3] = [&Plain, &FreespaceGuided, &ObjectGuided];

pub fn penalty_names() -> Vec<&'static str> {
    PENALTIES.iter().map(|p| p.name()).collect()
}

pub fn margin_penalty(name: &str) -> Result<&'static dyn MarginPenalty> {
    PENALTIES
        .iter()
        .copied()
        .find(|p| p.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            registry: "margin penalty",
            name: name.to_string(),
            known: penalty_names().join(", "),
        })
}

pub const DEFAULT_GAMMA: f64 = 5.0;

#[derive(Clone, Copy)]
pub struct PenaltySpec {
    pub penalty: &'static dyn MarginPenalty,
    pub gamma: f64,
}

impl PenaltySpec {
    pub fn plain() -> Self {
        Self {
            penalty: &Plain,
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn named(name: &str, gamma: f64) -> Result<Self> {
        Ok(Self {
            penalty: margin_penalty(name)?,
            gamma,
        })
    }
}

impl fmt::Debug for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PenaltySpec")
            .field("penalty", &self.penalty.name())
            .field("gamma", &self.gamma)
            .finish()
    }
}

/// `sum_t |candidate_t - expert_t| + gamma * violations`.
pub fn margin(
    candidate: &Trajectory,
    expert: &Trajectory,
    spec: &PenaltySpec,
    ctx: &PenaltyContext,
) -> Result<f64> {
    candidate.ensure_same_frames(expert)?;
    let distance: f64 = candidate
        .waypoints()
        .iter()
        .zip(expert.waypoints())
        .map(|(c, e)| (c.position() - e.position()).norm())
        .sum();
    let violations = spec.penalty.violations(candidate, ctx)?;
    Ok(distance + spec.gamma * violations as f64)
}

pub fn candidate_margins(
    candidates: &[Trajectory],
    expert: &Trajectory,
    spec: &PenaltySpec,
    ctx: &PenaltyContext,
) -> Result<Vec<f64>> {
    candidates
        .iter()
        .map(|c| margin(c, expert, spec, ctx))
        .collect()
}
