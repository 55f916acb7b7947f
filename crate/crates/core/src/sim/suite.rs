//! Seeded scenario generators, registered by kind name.
//!
//! Every generator keeps obstacles axis-aligned with edges on cell
//! boundaries of a 0.2 m grid whose cell centers sit on multiples of the
//! resolution, and keeps every obstacle inside the grid at every future
//! frame.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::EGO_HALF_EXTENTS;
use crate::geom::{OrientedBox, Vec2};
use crate::grid::GridGeometry;
use crate::plan::Trajectory;
use crate::sim::{Mover, Pose, Scenario, SensorConfig, SweepRate};
use crate::{Error, Result};

const RES: f64 = 0.2;
const DT: f64 = 0.5;
const FRAMES: usize = 7;
const PAST: usize = 4;
const MAX_DRAFTS: usize = 1000;

pub trait ScenarioKind: Send + Sync {
    fn name(&self) -> &'static str;

    /// One draft scenario with frames `frame_interval` seconds apart; the
    /// suite generator rejects drafts whose expert collides or whose
    /// obstacles leave the grid.
    fn draft(&self, rng: &mut ChaCha8Rng, frame_interval: f64) -> Scenario;
}

fn room_grid(dt: f64) -> GridGeometry {
    GridGeometry::centered(RES, 96, 96, FRAMES, dt).expect("valid grid")
}

/// 32 m ahead of the ego and 19.2 m across.
fn road_grid(dt: f64) -> GridGeometry {
    GridGeometry::new(Vec2::new(-6.1, -9.7), RES, 160, 96, FRAMES, dt).expect("valid grid")
}

fn pick<R: Rng>(rng: &mut R, values: &[f64]) -> f64 {
    *values.choose(rng).expect("nonempty choices")
}

/// Ego poses for frames `-PAST+1..=FRAMES` from a position function of time.
fn ego_track(dt: f64, position: impl Fn(f64) -> Vec2) -> Vec<Pose> {
    let frames: Vec<i64> = (1 - PAST as i64..=FRAMES as i64).collect();
    let points: Vec<Vec2> = frames.iter().map(|&f| position(f as f64 * dt)).collect();
    let mut heading = 0.0;
    (0..points.len())
        .map(|k| {
            let d = if k + 1 < points.len() {
                points[k + 1] - points[k]
            } else {
                points[k] - points[k - 1]
            };
            if d.norm() > 0.0 {
                heading = d.angle();
            }
            Pose {
                x: points[k].x,
                y: points[k].y,
                heading,
            }
        })
        .collect()
}

fn scenario(
    kind: &str,
    seed: u64,
    grid: GridGeometry,
    static_obstacles: Vec<OrientedBox>,
    dynamic_obstacles: Vec<Mover>,
    ego: Vec<Pose>,
) -> Scenario {
    Scenario {
        kind: kind.to_string(),
        seed,
        grid,
        static_obstacles,
        dynamic_obstacles,
        past_frames: PAST,
        ego,
        sensor: suite_sensor(),
    }
}

/// The default sensor turned by half a ray spacing, so that no ray from a
/// cell center runs along a cell boundary or through a cell corner.
fn suite_sensor() -> SensorConfig {
    let base = SensorConfig::default();
    SensorConfig {
        azimuth_offset: 0.5 * std::f64::consts::TAU / base.num_rays as f64,
        ..base
    }
}

fn snap(v: f64) -> f64 {
    (v / RES).round() * RES
}

fn overlaps_with_gap(a: &OrientedBox, b: &OrientedBox, gap: f64) -> bool {
    let grown = OrientedBox {
        half_extents: a.half_extents + Vec2::new(gap, gap),
        ..*a
    };
    grown.intersects(b)
}

/// Up to `count` boxes of random catalogue sizes inside `[lo, hi]`, clear of
/// `keepout` and of each other by 0.4 m.
fn place_boxes<R: Rng>(
    rng: &mut R,
    count: usize,
    lo: Vec2,
    hi: Vec2,
    keepout: &[OrientedBox],
) -> Vec<OrientedBox> {
    const SIZES: [(f64, f64); 5] = [(2.1, 0.9), (0.9, 2.1), (0.5, 0.5), (0.9, 0.9), (0.7, 1.3)];
    let mut placed: Vec<OrientedBox> = Vec::new();
    for _ in 0..count {
        for _ in 0..100 {
            let (hx, hy) = *SIZES.choose(rng).expect("nonempty");
            if lo.x + hx > hi.x - hx || lo.y + hy > hi.y - hy {
                continue;
            }
            let c = Vec2::new(
                snap(rng.gen_range(lo.x + hx..=hi.x - hx)),
                snap(rng.gen_range(lo.y + hy..=hi.y - hy)),
            );
            let b = OrientedBox::axis_aligned(c, Vec2::new(hx, hy));
            let (blo, bhi) = b.bounds();
            let inside = blo.x >= lo.x - 1e-9
                && blo.y >= lo.y - 1e-9
                && bhi.x <= hi.x + 1e-9
                && bhi.y <= hi.y + 1e-9;
            if inside
                && !keepout
                    .iter()
                    .chain(&placed)
                    .any(|o| overlaps_with_gap(&b, o, 0.4))
            {
                placed.push(b);
                break;
            }
        }
    }
    placed
}

/// Walls of a square room of half-width `hw`, 0.2 m thick and centered on
/// the room boundary.
fn room_walls(hw: f64) -> Vec<OrientedBox> {
    let long = Vec2::new(hw + 0.1, 0.1);
    let tall = Vec2::new(0.1, hw + 0.1);
    vec![
        OrientedBox::axis_aligned(Vec2::new(0.0, hw), long),
        OrientedBox::axis_aligned(Vec2::new(0.0, -hw), long),
        OrientedBox::axis_aligned(Vec2::new(hw, 0.0), tall),
        OrientedBox::axis_aligned(Vec2::new(-hw, 0.0), tall),
    ]
}

/// A walled room with parked boxes; the ego drives through it at 1.6 m/s.
pub struct StaticRoom;

impl ScenarioKind for StaticRoom {
    fn name(&self) -> &'static str {
        "static-room"
    }

    fn draft(&self, rng: &mut ChaCha8Rng, dt: f64) -> Scenario {
        let seed = rng.next_u64();
        let hw = pick(rng, &[7.0, 7.2, 7.4, 7.6, 7.8, 8.0]);
        let inner = hw - 0.1 - 0.4;
        let corridor = OrientedBox::axis_aligned(Vec2::new(-0.4, 0.0), Vec2::new(6.4, 1.1));
        let mut statics = room_walls(hw);
        statics.extend(place_boxes(
            rng,
            3,
            Vec2::new(-inner, -inner),
            Vec2::new(inner, inner),
            &[corridor],
        ));
        let ego = ego_track(dt, |t| Vec2::new(-2.0 + 1.6 * t, 0.0));
        scenario(self.name(), seed, room_grid(dt), statics, vec![], ego)
    }
}

/// A small mover crossing the ego's path far ahead, reaching the path's
/// line at frame 2.
pub struct Crossing;

/// Frame at which the crossing mover is on the ego's line of travel.
pub const CROSSING_FRAME: i64 = 2;

impl ScenarioKind for Crossing {
    fn name(&self) -> &'static str {
        "crossing"
    }

    fn draft(&self, rng: &mut ChaCha8Rng, dt: f64) -> Scenario {
        let seed = rng.next_u64();
        let v = pick(rng, &[2.0, 2.4, 2.8]);
        let vm = pick(rng, &[2.4, 2.8, 3.2]);
        let xc = pick(rng, &[14.0, 15.0, 16.0]);
        let sign = pick(rng, &[1.0, -1.0]);
        let t_cross = CROSSING_FRAME as f64 * dt;
        let mover = Mover {
            footprint: OrientedBox::axis_aligned(
                Vec2::new(xc, -sign * vm * t_cross),
                Vec2::new(0.3, 0.3),
            ),
            velocity: Vec2::new(0.0, sign * vm),
        };
        let ego = ego_track(dt, |t| Vec2::new(v * t, 0.0));
        scenario(self.name(), seed, road_grid(dt), vec![], vec![mover], ego)
    }
}

/// The ego brakes behind a slow lead vehicle, with cars parked on both
/// sides.
pub struct Braking;

impl ScenarioKind for Braking {
    fn name(&self) -> &'static str {
        "braking"
    }

    fn draft(&self, rng: &mut ChaCha8Rng, dt: f64) -> Scenario {
        let seed = rng.next_u64();
        let v0 = pick(rng, &[5.0, 6.0, 7.0]);
        let decel = v0 / 4.5;
        let lead = Mover {
            footprint: OrientedBox::axis_aligned(
                Vec2::new(pick(rng, &[18.0, 20.0]), 0.0),
                Vec2::new(2.1, 0.9),
            ),
            velocity: Vec2::new(0.8, 0.0),
        };
        let mut parked = place_boxes(rng, 1, Vec2::new(-4.0, 1.9), Vec2::new(24.0, 4.1), &[]);
        parked.extend(place_boxes(
            rng,
            1,
            Vec2::new(-4.0, -4.1),
            Vec2::new(24.0, -1.9),
            &[],
        ));
        let ego = ego_track(dt, |t| {
            let x = if t <= 0.0 {
                v0 * t
            } else {
                v0 * t - 0.5 * decel * t * t
            };
            Vec2::new(x, 0.0)
        });
        scenario(self.name(), seed, road_grid(dt), parked, vec![lead], ego)
    }
}

/// The ego slows before an intersection that two movers cross in opposite
/// directions.
pub struct Intersection;

impl ScenarioKind for Intersection {
    fn name(&self) -> &'static str {
        "intersection"
    }

    fn draft(&self, rng: &mut ChaCha8Rng, dt: f64) -> Scenario {
        let seed = rng.next_u64();
        let v0 = pick(rng, &[3.2, 4.0]);
        let decel = 0.8;
        let xa = pick(rng, &[14.0, 16.0]);
        let half = Vec2::new(0.9, 2.1);
        let up = Mover {
            footprint: OrientedBox::axis_aligned(Vec2::new(xa, -7.0), half),
            velocity: Vec2::new(0.0, pick(rng, &[2.4, 2.8])),
        };
        let down = Mover {
            footprint: OrientedBox::axis_aligned(Vec2::new(xa + 4.0, 7.0), half),
            velocity: Vec2::new(0.0, -pick(rng, &[2.4, 2.8])),
        };
        let ego = ego_track(dt, |t| {
            let x = if t <= 0.0 {
                v0 * t
            } else {
                v0 * t - 0.5 * decel * t * t
            };
            Vec2::new(x, 0.0)
        });
        scenario(
            self.name(),
            seed,
            road_grid(dt),
            vec![],
            vec![up, down],
            ego,
        )
    }
}

/// The ego stands still while a car passes and boxes sit nearby.
pub struct Stationary;

impl ScenarioKind for Stationary {
    fn name(&self) -> &'static str {
        "stationary"
    }

    fn draft(&self, rng: &mut ChaCha8Rng, dt: f64) -> Scenario {
        let seed = rng.next_u64();
        let side = pick(rng, &[1.0, -1.0]);
        let mover = Mover {
            footprint: OrientedBox::axis_aligned(Vec2::new(-6.0, side * 6.0), Vec2::new(2.1, 0.9)),
            velocity: Vec2::new(2.4, 0.0),
        };
        let ego_keepout = OrientedBox::axis_aligned(Vec2::ZERO, EGO_HALF_EXTENTS);
        let parked = place_boxes(
            rng,
            2,
            Vec2::new(-8.0, -4.6),
            Vec2::new(8.0, 4.6),
            &[ego_keepout],
        );
        let ego = ego_track(dt, |_| Vec2::ZERO);
        scenario(self.name(), seed, room_grid(dt), parked, vec![mover], ego)
    }
}

static KINDS: [&dyn ScenarioKind; 5] =
    [&StaticRoom, &Crossing, &Braking, &Intersection, &Stationary];

pub fn scenario_kind_names() -> Vec<&'static str> {
    KINDS.iter().map(|k| k.name()).collect()
}

pub fn scenario_kind(name: &str) -> Result<&'static dyn ScenarioKind> {
    KINDS
        .iter()
        .copied()
        .find(|k| k.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            registry: "scenario kind",
            name: name.to_string(),
            known: scenario_kind_names().join(", "),
        })
}

/// The ego box at `frame`, using the pose heading.
pub fn ego_box(scenario: &Scenario, frame: i64) -> OrientedBox {
    let p = scenario.ego_pose(frame);
    OrientedBox::new(p.position(), EGO_HALF_EXTENTS, p.heading)
}

/// Whether the recorded ego track touches an obstacle at any frame.
pub fn expert_collides(scenario: &Scenario) -> bool {
    (scenario.first_frame()..=scenario.last_frame()).any(|f| {
        let ego = ego_box(scenario, f);
        scenario.boxes_at(f).iter().any(|b| b.intersects(&ego))
    })
}

/// Whether every obstacle lies inside the grid at every future frame.
pub fn obstacles_inside_grid(scenario: &Scenario) -> bool {
    let lo = scenario.grid.origin();
    let hi = scenario.grid.max_corner();
    (1..=scenario.last_frame()).all(|f| {
        scenario.boxes_at(f).iter().all(|b| {
            let (blo, bhi) = b.bounds();
            blo.x >= lo.x && blo.y >= lo.y && bhi.x <= hi.x && bhi.y <= hi.y
        })
    })
}

fn accept(scenario: &Scenario) -> bool {
    scenario.validate().is_ok() && !expert_collides(scenario) && obstacles_inside_grid(scenario)
}

/// `count` scenarios of one kind at 2 Hz, identical for identical seeds.
pub fn generate_scenario_suite(kind: &str, count: usize, seed: u64) -> Result<Vec<Scenario>> {
    generate_scenario_suite_at(kind, count, seed, SweepRate::Hz2)
}

pub fn generate_scenario_suite_at(
    kind: &str,
    count: usize,
    seed: u64,
    rate: SweepRate,
) -> Result<Vec<Scenario>> {
    let dt = rate.frame_interval();
    let generator = scenario_kind(kind)?;
    if count == 0 {
        return Err(Error::Config("scenario count must be at least 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            for _ in 0..MAX_DRAFTS {
                let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
                let s = generator.draft(&mut rng, dt);
                if accept(&s) {
                    return Ok(s);
                }
            }
            Err(Error::Config(format!(
                "no valid {kind} scenario in {MAX_DRAFTS} drafts"
            )))
        })
        .collect()
}

/// A scene with two candidates equally far from the expert: `red` swerves
/// into an obstacle, `blue` is its mirror image and stays clear.
#[derive(Clone, Debug)]
pub struct EquidistantCase {
    pub scenario: Scenario,
    pub red: Trajectory,
    pub blue: Trajectory,
}

fn outward(lo: f64, hi: f64) -> (f64, f64) {
    // Edges on odd multiples of 0.1 enclosing [lo, hi].
    let down = ((lo - 0.1) / RES).floor() * RES + 0.1;
    let up = ((hi - 0.1) / RES).ceil() * RES + 0.1;
    (down, up)
}

/// The expert drives straight along `y = 0`; the red and blue candidates
/// share its longitudinal profile and swerve to `+-L (t / T)^2`. An
/// obstacle covers red's last two waypoints.
pub fn equidistant_suite(count: usize, seed: u64) -> Result<Vec<EquidistantCase>> {
    if count == 0 {
        return Err(Error::Config("scenario count must be at least 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let seed = rng.next_u64();
        let v = pick(&mut rng, &[2.0, 2.4, 2.8, 3.2]);
        let lateral = pick(&mut rng, &[2.6, 3.0, 3.4]);
        let swerve = |t: usize, sign: f64| {
            let s = t as f64 / FRAMES as f64;
            Vec2::new(v * t as f64 * DT, sign * lateral * s * s)
        };
        let red: Vec<Vec2> = (1..=FRAMES).map(|t| swerve(t, 1.0)).collect();
        let blue: Vec<Vec2> = (1..=FRAMES).map(|t| swerve(t, -1.0)).collect();
        let covered = &red[FRAMES - 2..];
        let (x0, x1) = outward(
            covered.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - 0.3,
            covered
                .iter()
                .map(|p| p.x)
                .fold(f64::NEG_INFINITY, f64::max)
                + 0.3,
        );
        let (y0, y1) = outward(
            covered.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - 0.3,
            covered
                .iter()
                .map(|p| p.y)
                .fold(f64::NEG_INFINITY, f64::max)
                + 0.3,
        );
        let obstacle = OrientedBox::axis_aligned(
            Vec2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
            Vec2::new(0.5 * (x1 - x0), 0.5 * (y1 - y0)),
        );
        let ego = ego_track(DT, |t| Vec2::new(v * t, 0.0));
        let s = scenario(
            "equidistant",
            seed,
            road_grid(DT),
            vec![obstacle],
            vec![],
            ego,
        );
        if accept(&s) {
            out.push(EquidistantCase {
                scenario: s,
                red: Trajectory::from_positions(&red)?,
                blue: Trajectory::from_positions(&blue)?,
            });
        }
    }
    Ok(out)
}
