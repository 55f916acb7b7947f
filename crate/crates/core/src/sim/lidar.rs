use crate::geom::Vec2;
use crate::raycast::{Sweep, SweepRay};
use crate::sim::Scenario;

/// Exact sweep from the ego pose at `frame`: for each azimuth, the nearest
/// ray-rectangle intersection over all obstacles at that frame, or a
/// no-return ray at max range.
pub fn simulate_sweep(scenario: &Scenario, frame: i64) -> Sweep {
    let pose = scenario.ego_pose(frame);
    let origin = pose.position();
    let boxes = scenario.boxes_at(frame);
    let max_range = scenario.sensor.max_range;
    let rays = scenario
        .sensor
        .azimuths()
        .into_iter()
        .map(|a| {
            let direction = Vec2::from_angle(pose.heading + a);
            let nearest = boxes
                .iter()
                .filter_map(|b| b.ray_intersection(origin, direction))
                .fold(f64::INFINITY, f64::min);
            if nearest <= max_range {
                SweepRay {
                    direction,
                    distance: nearest,
                    hit: true,
                }
            } else {
                SweepRay {
                    direction,
                    distance: max_range,
                    hit: false,
                }
            }
        })
        .collect();
    Sweep {
        frame,
        origin,
        rays,
    }
}

/// Sweeps at every future frame `1..=T`.
pub fn simulate_future_sweeps(scenario: &Scenario) -> Vec<Sweep> {
    (1..=scenario.last_frame())
        .map(|f| simulate_sweep(scenario, f))
        .collect()
}
