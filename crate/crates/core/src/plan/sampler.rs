//! Model-driven trajectory samplers: straight lines, circular arcs and
//! clothoids, each swept over a grid of target speeds.

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::plan::bank::BankConfig;
use crate::plan::{EgoState, PastTrack, Trajectory};
use crate::{Error, Result};

/// Number of future frames and their spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Horizon {
    pub frames: usize,
    pub frame_interval: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Samplers to run, by registered name, in output order.
    pub samplers: Vec<String>,
    /// Target speeds relative to the current speed (m/s); negative targets
    /// clamp to a stop.
    pub speed_offsets: Vec<f64>,
    /// Adds an explicit stop target.
    pub include_stop: bool,
    /// m/s^2, bounds the speed change toward a target.
    pub accel_limit: f64,
    /// 1/m.
    pub arc_curvatures: Vec<f64>,
    /// Initial curvature of clothoids, 1/m.
    pub clothoid_curvatures: Vec<f64>,
    /// Curvature change per meter of arc length, 1/m^2.
    pub clothoid_rates: Vec<f64>,
    /// Integration steps per frame for clothoids.
    pub substeps: usize,
    /// Heading used when the past track does not define one.
    pub default_heading: f64,
    pub bank: BankConfig,
}

fn symmetric(step: f64, n: i32, zero: bool) -> Vec<f64> {
    (-n..=n)
        .filter(|&k| zero || k != 0)
        .map(|k| k as f64 * step)
        .collect()
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samplers: vec!["line".into(), "arc".into(), "clothoid".into()],
            speed_offsets: symmetric(1.0, 3, true),
            include_stop: true,
            accel_limit: 3.0,
            arc_curvatures: symmetric(0.01, 12, false),
            clothoid_curvatures: symmetric(0.02, 7, true),
            clothoid_rates: symmetric(0.01, 7, true),
            substeps: 10,
            default_heading: 0.0,
            bank: BankConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("sampler: {m}")));
        if !(self.accel_limit > 0.0) {
            return bad("accel_limit must be positive");
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1");
        }
        if self.speed_offsets.is_empty() && !self.include_stop {
            return bad("no target speeds");
        }
        let all = self
            .speed_offsets
            .iter()
            .chain(&self.arc_curvatures)
            .chain(&self.clothoid_curvatures)
            .chain(&self.clothoid_rates);
        if !all.into_iter().all(|v| v.is_finite()) || !self.default_heading.is_finite() {
            return bad("parameters must be finite");
        }
        for name in &self.samplers {
            sampler(name)?;
        }
        self.bank.validate()
    }

    /// Target speeds for a given current speed: the explicit stop first,
    /// then one per offset.
    pub fn target_speeds(&self, current: f64) -> Vec<f64> {
        let stop = self.include_stop.then_some(0.0);
        stop.into_iter()
            .chain(self.speed_offsets.iter().map(|o| (current + o).max(0.0)))
            .collect()
    }
}

/// Distance travelled when accelerating from `v0` toward `target` at a
/// bounded rate, then holding it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedProfile {
    pub v0: f64,
    pub target: f64,
    pub accel_limit: f64,
}

impl SpeedProfile {
    pub fn speed(&self, t: f64) -> f64 {
        let dv = (self.target - self.v0).clamp(-self.accel_limit * t, self.accel_limit * t);
        self.v0 + dv
    }

    pub fn distance(&self, t: f64) -> f64 {
        let dv = self.target - self.v0;
        let ramp = dv.abs() / self.accel_limit;
        let a = self.accel_limit * dv.signum();
        if t <= ramp {
            self.v0 * t + 0.5 * a * t * t
        } else {
            self.v0 * ramp + 0.5 * a * ramp * ramp + self.target * (t - ramp)
        }
    }
}

pub trait TrajectorySampler: Send + Sync {
    fn name(&self) -> &'static str;

    fn sample(&self, state: &EgoState, cfg: &SamplerConfig, horizon: &Horizon) -> Vec<Trajectory>;
}

fn place(state: &EgoState, local: Vec2) -> Vec2 {
    state.position + local.rotate(state.heading)
}

fn build(state: &EgoState, local: impl Iterator<Item = Vec2>) -> Trajectory {
    let points: Vec<Vec2> = local.map(|p| place(state, p)).collect();
    Trajectory::from_positions(&points).expect("sampled waypoints are finite")
}

fn profiles<'a>(
    state: &EgoState,
    cfg: &'a SamplerConfig,
) -> impl Iterator<Item = SpeedProfile> + 'a {
    let v0 = state.speed;
    cfg.target_speeds(v0)
        .into_iter()
        .map(move |target| SpeedProfile {
            v0,
            target,
            accel_limit: cfg.accel_limit,
        })
}

/// Point at arc length `s` along a circle of curvature `kappa` starting at
/// the origin heading along +x.
pub fn arc_point(kappa: f64, s: f64) -> Vec2 {
    if kappa == 0.0 {
        Vec2::new(s, 0.0)
    } else {
        let phi = kappa * s;
        Vec2::new(phi.sin() / kappa, (1.0 - phi.cos()) / kappa)
    }
}

pub struct LineSampler;

impl TrajectorySampler for LineSampler {
    fn name(&self) -> &'static str {
        "line"
    }

    fn sample(&self, state: &EgoState, cfg: &SamplerConfig, horizon: &Horizon) -> Vec<Trajectory> {
        profiles(state, cfg)
            .map(|prof| {
                build(
                    state,
                    (1..=horizon.frames)
                        .map(|t| Vec2::new(prof.distance(t as f64 * horizon.frame_interval), 0.0)),
                )
            })
            .collect()
    }
}

pub struct ArcSampler;

impl TrajectorySampler for ArcSampler {
    fn name(&self) -> &'static str {
        "arc"
    }

    fn sample(&self, state: &EgoState, cfg: &SamplerConfig, horizon: &Horizon) -> Vec<Trajectory> {
        let mut out = Vec::new();
        for prof in profiles(state, cfg) {
            for &kappa in &cfg.arc_curvatures {
                out.push(build(
                    state,
                    (1..=horizon.frames).map(|t| {
                        arc_point(kappa, prof.distance(t as f64 * horizon.frame_interval))
                    }),
                ));
            }
        }
        out
    }
}

/// Clothoids integrated in arc length by forward Euler steps.
pub struct ClothoidSampler;

impl ClothoidSampler {
    pub fn integrate(kappa0: f64, rate: f64, distances: &[f64], substeps: usize) -> Vec<Vec2> {
        let heading = |s: f64| kappa0 * s + 0.5 * rate * s * s;
        let mut p = Vec2::new(0.0, 0.0);
        let mut s = 0.0;
        let mut out = Vec::with_capacity(distances.len());
        for &target in distances {
            let ds = (target - s) / substeps as f64;
            for k in 0..substeps {
                p = p + Vec2::from_angle(heading(s + k as f64 * ds)) * ds;
            }
            s = target;
            out.push(p);
        }
        out
    }
}

impl TrajectorySampler for ClothoidSampler {
    fn name(&self) -> &'static str {
        "clothoid"
    }

    fn sample(&self, state: &EgoState, cfg: &SamplerConfig, horizon: &Horizon) -> Vec<Trajectory> {
        let mut out = Vec::new();
        for prof in profiles(state, cfg) {
            let distances: Vec<f64> = (1..=horizon.frames)
                .map(|t| prof.distance(t as f64 * horizon.frame_interval))
                .collect();
            for &kappa0 in &cfg.clothoid_curvatures {
                for &rate in &cfg.clothoid_rates {
                    let local = Self::integrate(kappa0, rate, &distances, cfg.substeps);
                    out.push(build(state, local.into_iter()));
                }
            }
        }
        out
    }
}

static SAMPLERS: [&dyn TrajectorySampler; 3] = [&LineSampler, &ArcSampler, &ClothoidSampler];

pub fn sampler_names() -> Vec<&'static str> {
    SAMPLERS.iter().map(|s| s.name()).collect()
}

pub fn sampler(name: &str) -> Result<&'static dyn TrajectorySampler> {
    SAMPLERS
        .iter()
        .copied()
        .find(|s| s.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            registry: "sampler",
            name: name.to_string(),
            known: sampler_names().join(", "),
        })
}

/// Runs every configured sampler from the state implied by `past`.
pub fn sample_model_driven(
    past: &PastTrack,
    cfg: &SamplerConfig,
    horizon: &Horizon,
) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let state = past.ego_state(horizon.frame_interval, cfg.default_heading)?;
    let mut out = Vec::new();
    for name in &cfg.samplers {
        out.extend(sampler(name)?.sample(&state, cfg, horizon));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const H: Horizon = Horizon {
        frames: 7,
        frame_interval: 0.5,
    };

    fn moving(speed: f64, heading: f64) -> PastTrack {
        let d = Vec2::from_angle(heading) * (speed * 0.5);
        let p0 = Vec2::new(1.0, 2.0);
        PastTrack::new(vec![p0 - d - d, p0 - d, p0])
    }

    #[test]
    fn default_count_is_2000() {
        let all = sample_model_driven(&moving(4.0, 0.3), &SamplerConfig::default(), &H).unwrap();
        assert_eq!(all.len(), 2000);
    }

    #[test]
    fn straight_constant_speed() {
        let cfg = SamplerConfig {
            samplers: vec!["line".into()],
            speed_offsets: vec![0.0],
            include_stop: false,
            ..Default::default()
        };
        let past = moving(3.0, 0.0);
        let t = &sample_model_driven(&past, &cfg, &H).unwrap()[0];
        for w in t.waypoints() {
            let expect = 1.0 + 3.0 * 0.5 * w.frame as f64;
            assert!((w.x - expect).abs() < 1e-12 && (w.y - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arc_chords_match_circle() {
        let cfg = SamplerConfig {
            samplers: vec!["arc".into()],
            speed_offsets: vec![0.0],
            include_stop: false,
            arc_curvatures: vec![0.1],
            ..Default::default()
        };
        let past = moving(4.0, 0.7);
        let t = &sample_model_driven(&past, &cfg, &H).unwrap()[0];
        let start = past.current().unwrap();
        let mut prev = start;
        for w in t.waypoints() {
            // Chord subtending arc length s on a circle of radius r.
            let s: f64 = 4.0 * 0.5;
            let r: f64 = 10.0;
            let chord = 2.0 * r * (s / (2.0 * r)).sin();
            assert!(((w.position() - prev).norm() - chord).abs() < 1e-6);
            prev = w.position();
        }
        // Every waypoint lies on the circle whose center is left of the start.
        let center = start + Vec2::from_angle(0.7 + std::f64::consts::FRAC_PI_2) * 10.0;
        for w in t.waypoints() {
            assert!(((w.position() - center).norm() - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn clothoid_without_rate_is_an_arc() {
        let d: Vec<f64> = (1..=7).map(|k| 1.5 * k as f64).collect();
        let coarse = ClothoidSampler::integrate(0.08, 0.0, &d, 10);
        let fine = ClothoidSampler::integrate(0.08, 0.0, &d, 100);
        for ((c, f), &s) in coarse.iter().zip(&fine).zip(&d) {
            let exact = arc_point(0.08, s);
            // Forward Euler on a circle drifts by at most kappa * ds * s / 2.
            assert!((*c - exact).norm() <= 0.5 * 0.08 * 0.15 * s + 1e-12);
            assert!((*f - exact).norm() < 0.15 * (*c - exact).norm());
        }
    }

    #[test]
    fn stationary_past_includes_stay() {
        let past = PastTrack::new(vec![Vec2::new(2.0, 2.0); 3]);
        let all = sample_model_driven(&past, &SamplerConfig::default(), &H).unwrap();
        assert!(all.iter().any(|t| t
            .waypoints()
            .iter()
            .all(|w| w.position() == Vec2::new(2.0, 2.0))));
    }

    #[test]
    fn unknown_sampler() {
        assert!(matches!(
            sampler("spline"),
            Err(Error::UnknownStrategy { .. })
        ));
    }

    proptest! {
        #[test]
        fn speed_changes_respect_accel_limit(v0 in 0.0..12.0f64, target in 0.0..15.0f64) {
            let prof = SpeedProfile { v0, target, accel_limit: 3.0 };
            let dt = H.frame_interval;
            let mut prev_speed = v0;
            for t in 1..=H.frames {
                let speed = (prof.distance(t as f64 * dt) - prof.distance((t - 1) as f64 * dt)) / dt;
                // The first frame's mean speed is half a frame from v0.
                let limit = if t == 1 { 0.5 } else { 1.0 } * 3.0 * dt;
                prop_assert!((speed - prev_speed).abs() <= limit + 1e-9);
                prev_speed = speed;
            }
        }

        #[test]
        fn lines_follow_the_profile(v0 in 0.0..12.0f64, heading in -3.0..3.0f64) {
            let cfg = SamplerConfig { samplers: vec!["line".into()], ..Default::default() };
            let past = moving(v0, heading);
            let start = past.current().unwrap();
            for (t, target) in sample_model_driven(&past, &cfg, &H)
                .unwrap()
                .iter()
                .zip(cfg.target_speeds(v0))
            {
                let prof = SpeedProfile { v0, target, accel_limit: cfg.accel_limit };
                for w in t.waypoints() {
                    let s = prof.distance(w.frame as f64 * H.frame_interval);
                    prop_assert!((w.position() - start).norm() - s < 1e-9);
                }
            }
        }

        #[test]
        fn initial_tangent_matches_past_heading(v0 in 0.5..12.0f64, heading in -3.0..3.0f64) {
            // Over a vanishing frame interval the first chord points along
            // the initial tangent.
            let dt = 1e-4;
            let d = Vec2::from_angle(heading) * (v0 * dt);
            let past = PastTrack::new(vec![Vec2::ZERO - d, Vec2::ZERO]);
            let h = Horizon { frames: 7, frame_interval: dt };
            let cfg = SamplerConfig::default();
            for t in sample_model_driven(&past, &cfg, &h).unwrap() {
                let first = t.waypoints()[0].position();
                if first.norm() > 0.0 {
                    prop_assert!(crate::geom::wrap_angle(first.angle() - heading).abs() < 1e-3);
                }
            }
        }
    }
}
