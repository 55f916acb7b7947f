use serde::{Deserialize, Serialize};

use crate::geom::{OrientedBox, Vec2};
use crate::grid::GridGeometry;
use crate::plan::{PastTrack, Trajectory, Waypoint};
use crate::{Error, Result};

/// A rectangle moving at constant velocity; `footprint` is its pose at frame 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mover {
    pub footprint: OrientedBox,
    /// Meters per second.
    pub velocity: Vec2,
}

impl Mover {
    pub fn at_time(&self, seconds: f64) -> OrientedBox {
        OrientedBox {
            center: self.footprint.center + self.velocity * seconds,
            ..self.footprint
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub num_rays: usize,
    /// Field of view in radians, centered on the ego heading.
    pub field_of_view: f64,
    pub max_range: f64,
    /// Rotation of every azimuth, radians.
    #[serde(default)]
    pub azimuth_offset: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            num_rays: 360,
            field_of_view: std::f64::consts::TAU,
            max_range: 30.0,
            azimuth_offset: 0.0,
        }
    }
}

impl SensorConfig {
    /// Evenly spaced azimuths relative to the sensor heading, rotated by
    /// the azimuth offset. A full circle starts at the heading; a partial
    /// field of view includes both edges.
    pub fn azimuths(&self) -> Vec<f64> {
        let n = self.num_rays;
        let base: Vec<f64> = if self.field_of_view >= std::f64::consts::TAU {
            let step = std::f64::consts::TAU / n as f64;
            (0..n).map(|k| k as f64 * step).collect()
        } else if n == 1 {
            vec![0.0]
        } else {
            let step = self.field_of_view / (n - 1) as f64;
            (0..n)
                .map(|k| -0.5 * self.field_of_view + k as f64 * step)
                .collect()
        };
        base.into_iter().map(|a| a + self.azimuth_offset).collect()
    }
}

/// Sensor sweep rate. Frames are one sweep apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SweepRate {
    /// 2 Hz, 0.5 s between frames.
    #[default]
    #[serde(rename = "2hz")]
    Hz2,
    /// 20 Hz, 0.05 s between frames.
    #[serde(rename = "20hz")]
    Hz20,
}

impl SweepRate {
    pub fn frame_interval(self) -> f64 {
        match self {
            SweepRate::Hz2 => 0.5,
            SweepRate::Hz20 => 0.05,
        }
    }
}

/// A synthetic world: static and constant-velocity rectangles, an ego track
/// over past and future frames, and the LiDAR it carries.
///
/// Frames are integers on a common axis: `0` is the present, negative frames
/// are the past, and frames `1..=grid.num_timestamps` are the future.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: String,
    pub seed: u64,
    pub grid: GridGeometry,
    pub static_obstacles: Vec<OrientedBox>,
    pub dynamic_obstacles: Vec<Mover>,
    /// Number of ego poses at frames `<= 0`.
    pub past_frames: usize,
    /// Ego poses from the oldest past frame through the last future frame.
    pub ego: Vec<Pose>,
    pub sensor: SensorConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        for b in self
            .static_obstacles
            .iter()
            .chain(self.dynamic_obstacles.iter().map(|m| &m.footprint))
        {
            if !(b.half_extents.x > 0.0 && b.half_extents.y > 0.0) {
                return bad(format!("obstacle extents must be positive: {b:?}"));
            }
            if !(b.center.is_finite() && b.half_extents.is_finite() && b.heading.is_finite()) {
                return bad(format!("obstacle footprint not finite: {b:?}"));
            }
        }
        if self.past_frames == 0 {
            return bad("at least the present ego pose is required".into());
        }
        if self.ego.len() != self.past_frames + self.grid.num_timestamps {
            return bad(format!(
                "expected {} ego poses, got {}",
                self.past_frames + self.grid.num_timestamps,
                self.ego.len()
            ));
        }
        if self.sensor.num_rays == 0 || !(self.sensor.max_range > 0.0) {
            return bad("sensor needs at least one ray and a positive range".into());
        }
        Ok(())
    }

    pub fn frame_interval(&self) -> f64 {
        self.grid.frame_interval
    }

    pub fn first_frame(&self) -> i64 {
        1 - self.past_frames as i64
    }

    pub fn last_frame(&self) -> i64 {
        self.grid.num_timestamps as i64
    }

    pub fn has_frame(&self, frame: i64) -> bool {
        (self.first_frame()..=self.last_frame()).contains(&frame)
    }

    pub fn ego_pose(&self, frame: i64) -> Pose {
        assert!(self.has_frame(frame), "frame {frame} outside scenario");
        self.ego[(frame - self.first_frame()) as usize]
    }

    /// Every obstacle footprint at `frame`.
    pub fn boxes_at(&self, frame: i64) -> Vec<OrientedBox> {
        let t = frame as f64 * self.frame_interval();
        self.static_obstacles
            .iter()
            .copied()
            .chain(self.dynamic_obstacles.iter().map(|m| m.at_time(t)))
            .collect()
    }

    /// Obstacle footprints for future frames `1..=T`, indexed by `frame - 1`.
    pub fn future_boxes(&self) -> Vec<Vec<OrientedBox>> {
        (1..=self.last_frame()).map(|f| self.boxes_at(f)).collect()
    }

    pub fn past_track(&self) -> PastTrack {
        PastTrack::new(
            (self.first_frame()..=0)
                .map(|f| self.ego_pose(f).position())
                .collect(),
        )
    }

    pub fn is_static(&self) -> bool {
        self.dynamic_obstacles.is_empty()
    }
}

/// The ego's recorded future, one waypoint per future frame.
pub fn expert_trajectory(scenario: &Scenario) -> Trajectory {
    Trajectory::new(
        (1..=scenario.last_frame())
            .map(|f| {
                let p = scenario.ego_pose(f);
                Waypoint::new(p.x, p.y, f as usize)
            })
            .collect(),
    )
    .expect("scenario future frames are contiguous")
}
