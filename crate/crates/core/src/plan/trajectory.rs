use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Future frame, 1-based.
    pub frame: usize,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, frame: usize) -> Self {
        Self { x, y, frame }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// One waypoint per future frame, frames `1..=len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Waypoint>", into = "Vec<Waypoint>")]
pub struct Trajectory {
    waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::Empty("trajectory waypoints"));
        }
        for (k, w) in waypoints.iter().enumerate() {
            if w.frame != k + 1 {
                return Err(Error::FrameMismatch(format!(
                    "waypoint {k} has frame {}, expected {}",
                    w.frame,
                    k + 1
                )));
            }
            if !(w.x.is_finite() && w.y.is_finite()) {
                return Err(Error::Config(format!(
                    "waypoint at frame {} is not finite",
                    w.frame
                )));
            }
        }
        Ok(Self { waypoints })
    }

    /// Builds a trajectory from positions at frames `1..=n`.
    pub fn from_positions(positions: &[Vec2]) -> Result<Self> {
        Self::new(
            positions
                .iter()
                .enumerate()
                .map(|(k, p)| Waypoint::new(p.x, p.y, k + 1))
                .collect(),
        )
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.waypoints.iter().map(Waypoint::position).collect()
    }

    pub fn at_frame(&self, frame: usize) -> Option<&Waypoint> {
        frame.checked_sub(1).and_then(|k| self.waypoints.get(k))
    }

    pub fn ensure_same_frames(&self, other: &Trajectory) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::FrameMismatch(format!(
                "{} waypoints vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Waypoint>> for Trajectory {
    type Error = Error;

    fn try_from(waypoints: Vec<Waypoint>) -> Result<Self> {
        Self::new(waypoints)
    }
}

impl From<Trajectory> for Vec<Waypoint> {
    fn from(t: Trajectory) -> Self {
        t.waypoints
    }
}

/// Current kinematic state, as inferred from the past track.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoState {
    pub position: Vec2,
    pub heading: f64,
    /// Meters per second.
    pub speed: f64,
    /// Radians per second.
    pub heading_rate: f64,
}

/// Ego positions over past frames, oldest first; the last entry is the
/// present (frame 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PastTrack {
    pub positions: Vec<Vec2>,
}

impl PastTrack {
    pub fn new(positions: Vec<Vec2>) -> Self {
        Self { positions }
    }

    pub fn current(&self) -> Option<Vec2> {
        self.positions.last().copied()
    }

    /// Speed and heading from the last displacement. Without one (a single
    /// pose, or zero displacement) the heading falls back to
    /// `default_heading` and the speed is zero. The heading rate compares
    /// the last two nonzero displacements when they are consecutive.
    pub fn ego_state(&self, frame_interval: f64, default_heading: f64) -> Result<EgoState> {
        let n = self.positions.len();
        let position = self.current().ok_or(Error::Empty("past track"))?;
        let step = |k: usize| self.positions[k + 1] - self.positions[k];
        let (heading, speed) = if n >= 2 && step(n - 2).norm() > 0.0 {
            let d = step(n - 2);
            (d.angle(), d.norm() / frame_interval)
        } else {
            (default_heading, 0.0)
        };
        let heading_rate = if n >= 3 && step(n - 2).norm() > 0.0 && step(n - 3).norm() > 0.0 {
            crate::geom::wrap_angle(step(n - 2).angle() - step(n - 3).angle()) / frame_interval
        } else {
            0.0
        };
        Ok(EgoState {
            position,
            heading,
            speed,
            heading_rate,
        })
    }
}
