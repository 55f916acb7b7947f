//! Sweep-level depth and freespace metrics, and planning metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::{OrientedBox, Vec2};
use crate::grid::OccupancyGrid;
use crate::learn::{make_labels, BCE_CLAMP};
use crate::plan::Trajectory;
use crate::raycast::{cumulative_max, expected_distance, Sweep};
use crate::{Error, Result};

/// Which class counts as positive for F1 and AP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveClass {
    #[default]
    Free,
    Occupied,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMetrics {
    pub frame: i64,
    pub abs_rel: Option<f64>,
    pub bce: Option<f64>,
    pub f1: Option<f64>,
    pub ap: Option<f64>,
    pub hit_rays: usize,
    pub voxels: usize,
}

/// Per-frame metrics and their uniform average over frames. A metric is
/// absent when no frame defines it.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepMetrics {
    pub abs_rel: Option<f64>,
    pub bce: Option<f64>,
    pub f1: Option<f64>,
    pub ap: Option<f64>,
    pub frames: Vec<FrameMetrics>,
}

pub fn sweep_metrics(pred: &OccupancyGrid, gt_sweeps: &[Sweep]) -> Result<SweepMetrics> {
    sweep_metrics_with(pred, gt_sweeps, PositiveClass::Free)
}

pub fn sweep_metrics_with(
    pred: &OccupancyGrid,
    gt_sweeps: &[Sweep],
    positive: PositiveClass,
) -> Result<SweepMetrics> {
    let geom = pred.geometry();
    let mut by_frame: BTreeMap<i64, Vec<&Sweep>> = BTreeMap::new();
    for s in gt_sweeps {
        geom.check_frame(s.frame)?;
        by_frame.entry(s.frame).or_default().push(s);
    }
    let mut frames = Vec::new();
    for (frame, sweeps) in by_frame {
        let mut rel_sum = 0.0;
        let mut hit_rays = 0;
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for sweep in sweeps {
            for ray in make_labels(sweep, geom)?.rays {
                let probs: Vec<f64> = ray
                    .traversal
                    .voxels(geom)
                    .map(|v| pred.probability(v))
                    .collect();
                let proj = cumulative_max(&probs);
                scores.extend(proj.freespace);
                labels.extend(ray.labels.free.iter().copied());
                if ray.hit && ray.distance > 0.0 {
                    let depth =
                        expected_distance(&ray.traversal, pred).expect("nonempty traversal");
                    rel_sum += (ray.distance - depth.expected_distance).abs() / ray.distance;
                    hit_rays += 1;
                }
            }
        }
        let bce = (!scores.is_empty()).then(|| {
            scores
                .iter()
                .zip(&labels)
                .map(|(&f, &g)| {
                    let q = f.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    if g {
                        -q.ln()
                    } else {
                        -(-q).ln_1p()
                    }
                })
                .sum::<f64>()
                / scores.len() as f64
        });
        if positive == PositiveClass::Occupied {
            scores.iter_mut().for_each(|s| *s = 1.0 - *s);
            labels.iter_mut().for_each(|g| *g = !*g);
        }
        let predicted: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
        frames.push(FrameMetrics {
            frame,
            abs_rel: (hit_rays > 0).then(|| rel_sum / hit_rays as f64),
            bce,
            f1: f1_score(&predicted, &labels),
            ap: average_precision(&scores, &labels),
            hit_rays,
            voxels: scores.len(),
        });
    }
    let mean = |get: fn(&FrameMetrics) -> Option<f64>| {
        let vals: Vec<f64> = frames.iter().filter_map(get).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(SweepMetrics {
        abs_rel: mean(|f| f.abs_rel),
        bce: mean(|f| f.bce),
        f1: mean(|f| f.f1),
        ap: mean(|f| f.ap),
        frames,
    })
}

/// `2 tp / (2 tp + fp + fn)`; absent when there are neither positive labels
/// nor positive predictions.
pub fn f1_score(predicted: &[bool], labels: &[bool]) -> Option<f64> {
    assert_eq!(predicted.len(), labels.len());
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &l) in predicted.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let den = 2 * tp + fp + fn_;
    (den > 0).then(|| (2 * tp) as f64 / den as f64)
}

/// Exact average precision: the mean, over positives, of the precision at
/// the threshold equal to that positive's score. Tied scores form a single
/// threshold. Absent without positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut sum = 0.0;
    let mut seen = 0usize;
    let mut tp = 0usize;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let group_tp = order[k..end].iter().filter(|&&i| labels[i]).count();
        seen += end - k;
        tp += group_tp;
        let precision = tp as f64 / seen as f64;
        for _ in 0..group_tp {
            sum += precision;
        }
        k = end;
    }
    Some(sum / positives as f64)
}

/// Planning horizons in seconds.
pub const PLAN_HORIZONS: [f64; 3] = [1.0, 2.0, 3.0];

/// Default ego footprint, 4.0 m x 1.8 m.
pub const EGO_HALF_EXTENTS: Vec2 = Vec2 { x: 2.0, y: 0.9 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoFootprint {
    pub half_extents: Vec2,
    /// Heading used until the trajectory first moves.
    pub initial_heading: f64,
}

impl Default for EgoFootprint {
    fn default() -> Self {
        Self {
            half_extents: EGO_HALF_EXTENTS,
            initial_heading: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizonMetrics {
    pub seconds: f64,
    pub frame: usize,
    pub l2: f64,
    /// Some waypoint up to this horizon lies inside an object box.
    pub point_collision: bool,
    /// The ego box up to this horizon overlaps an object box.
    pub box_collision: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanMetrics {
    pub horizons: Vec<HorizonMetrics>,
}

/// Ego headings along a trajectory from consecutive waypoint differences,
/// carrying the last heading through stationary steps.
pub fn waypoint_headings(traj: &Trajectory, start: Option<Vec2>, initial_heading: f64) -> Vec<f64> {
    let mut heading = initial_heading;
    let mut prev = start;
    traj.waypoints()
        .iter()
        .map(|w| {
            let p = w.position();
            if let Some(q) = prev {
                let d = p - q;
                if d.norm() > 0.0 {
                    heading = d.angle();
                }
            }
            prev = Some(p);
            heading
        })
        .collect()
}

/// Metrics at each horizon whose frame `round(h / dt)` exists. `boxes` holds
/// object boxes per future frame, indexed by `frame - 1`.
pub fn plan_metrics(
    planned: &Trajectory,
    expert: &Trajectory,
    boxes: &[Vec<OrientedBox>],
    ego: &EgoFootprint,
    frame_interval: f64,
) -> Result<PlanMetrics> {
    planned.ensure_same_frames(expert)?;
    if !(ego.half_extents.x > 0.0 && ego.half_extents.y > 0.0) {
        return Err(Error::Config("ego dimensions must be positive".into()));
    }
    let headings = waypoint_headings(planned, None, ego.initial_heading);
    let n = planned.len();
    let mut point_hit = Vec::with_capacity(n);
    let mut box_hit = Vec::with_capacity(n);
    for (w, &heading) in planned.waypoints().iter().zip(&headings) {
        let objects = boxes.get(w.frame - 1).map_or(&[][..], Vec::as_slice);
        let ego_box = OrientedBox::new(w.position(), ego.half_extents, heading);
        point_hit.push(objects.iter().any(|b| b.contains(w.position())));
        box_hit.push(objects.iter().any(|b| b.intersects(&ego_box)));
    }
    let horizons = PLAN_HORIZONS
        .iter()
        .filter_map(|&seconds| {
            let frame = (seconds / frame_interval).round() as usize;
            (frame >= 1 && frame <= n).then(|| {
                let p = planned.waypoints()[frame - 1].position();
                let e = expert.waypoints()[frame - 1].position();
                HorizonMetrics {
                    seconds,
                    frame,
                    l2: (p - e).norm(),
                    point_collision: point_hit[..frame].iter().any(|&c| c),
                    box_collision: box_hit[..frame].iter().any(|&c| c),
                }
            })
        })
        .collect();
    Ok(PlanMetrics { horizons })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizonSummary {
    pub seconds: f64,
    pub l2: f64,
    pub point_collision_rate: f64,
    pub box_collision_rate: f64,
    pub scenarios: usize,
}

/// Suite-level means per horizon, in horizon order.
pub fn aggregate_plan_metrics(runs: &[PlanMetrics]) -> Vec<HorizonSummary> {
    let mut acc: BTreeMap<u64, (f64, f64, usize, usize, usize)> = BTreeMap::new();
    for run in runs {
        for h in &run.horizons {
            let e = acc
                .entry(h.seconds.to_bits())
                .or_insert((h.seconds, 0.0, 0, 0, 0));
            e.1 += h.l2;
            e.2 += h.point_collision as usize;
            e.3 += h.box_collision as usize;
            e.4 += 1;
        }
    }
    let mut out: Vec<HorizonSummary> = acc
        .into_values()
        .map(|(seconds, l2, point, boxed, count)| HorizonSummary {
            seconds,
            l2: l2 / count as f64,
            point_collision_rate: point as f64 / count as f64,
            box_collision_rate: boxed as f64 / count as f64,
            scenarios: count,
        })
        .collect();
    out.sort_by(|a, b| a.seconds.total_cmp(&b.seconds));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_examples() {
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.1], &[true, true, false]),
            Some(1.0)
        );
        // Ranking: pos, neg, pos -> (1 + 2/3) / 2.
        let ap = average_precision(&[0.9, 0.8, 0.1], &[true, false, true]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        // A full tie is one threshold: precision is the positive rate.
        assert_eq!(
            average_precision(&[0.5; 4], &[true, false, false, true]),
            Some(0.5)
        );
        assert_eq!(average_precision(&[0.5], &[false]), None);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[true, false], &[true, false]), Some(1.0));
        assert_eq!(f1_score(&[true, true], &[true, false]), Some(2.0 / 3.0));
        assert_eq!(f1_score(&[false], &[false]), None);
    }

    #[test]
    fn identical_plans_have_no_error() {
        let t = Trajectory::from_positions(
            &(1..=7)
                .map(|k| Vec2::new(k as f64, 0.0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let m = plan_metrics(&t, &t, &[], &EgoFootprint::default(), 0.5).unwrap();
        assert_eq!(m.horizons.len(), 3);
        assert_eq!(
            m.horizons.iter().map(|h| h.frame).collect::<Vec<_>>(),
            vec![2, 4, 6]
        );
        for h in &m.horizons {
            assert_eq!(
                (h.l2, h.point_collision, h.box_collision),
                (0.0, false, false)
            );
        }
        // At 20 Hz only horizons up to 0.35 s exist, so none are reported.
        let m = plan_metrics(&t, &t, &[], &EgoFootprint::default(), 0.05).unwrap();
        assert!(m.horizons.is_empty());
    }

    #[test]
    fn waypoint_on_box_corner_collides() {
        let t = Trajectory::from_positions(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)]).unwrap();
        let b = OrientedBox::axis_aligned(Vec2::new(2.0, 2.0), Vec2::new(1.0, 1.0));
        let boxes = vec![vec![], vec![b]];
        let m = plan_metrics(&t, &t, &boxes, &EgoFootprint::default(), 1.0).unwrap();
        assert_eq!(m.horizons.len(), 2);
        assert!(!m.horizons[0].point_collision);
        assert!(m.horizons[1].point_collision && m.horizons[1].box_collision);
    }

    #[test]
    fn stationary_heading_carries_forward() {
        let t = Trajectory::from_positions(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        let h = waypoint_headings(&t, None, 0.25);
        assert_eq!(h[0], 0.25);
        assert!((h[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(h[1], h[2]);
    }

    #[test]
    fn aggregate_rates() {
        let hit = PlanMetrics {
            horizons: vec![HorizonMetrics {
                seconds: 1.0,
                frame: 2,
                l2: 1.0,
                point_collision: true,
                box_collision: true,
            }],
        };
        let miss = PlanMetrics {
            horizons: vec![HorizonMetrics {
                seconds: 1.0,
                frame: 2,
                l2: 3.0,
                point_collision: false,
                box_collision: true,
            }],
        };
        let s = aggregate_plan_metrics(&[hit, miss]);
        assert_eq!(s.len(), 1);
        assert_eq!(
            (s[0].l2, s[0].point_collision_rate, s[0].box_collision_rate),
            (2.0, 0.5, 1.0)
        );
    }
}
