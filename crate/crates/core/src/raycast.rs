//! Differentiable raycasting through a BEV occupancy grid.
//!
//! A ray is walked through the grid with the Amanatides-Woo incremental
//! traversal, producing one [`Segment`] per visited cell. Two quantities are
//! rendered from the visited occupancy probabilities:
//!
//! * the expected stopping distance, treating each voxel as an independent
//!   Bernoulli blocker located at the midpoint of the ray's chord through it,
//!   with any leftover mass escaping at the traversal's exit distance;
//! * soft visible freespace, `1 - cummax(p)` along the ray.
//!
//! Both have analytic reverse passes returning gradients with respect to the
//! logits of the visited voxels.

use rayon::prelude::*;

use crate::geom::Vec2;
use crate::grid::{Cell, GridGeometry, OccupancyGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec2,
    /// Unit direction.
    pub direction: Vec2,
    /// Time slice of the grid the ray is cast through.
    pub slice: usize,
    pub max_range: f64,
}

impl Ray {
    pub fn new(origin: Vec2, direction: Vec2, slice: usize, max_range: f64) -> Self {
        debug_assert!(
            (direction.norm() - 1.0).abs() < 1e-9,
            "direction must be unit length"
        );
        debug_assert!(max_range > 0.0);
        Self {
            origin,
            direction,
            slice,
            max_range,
        }
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.origin + self.direction * t
    }
}

/// The chord of a ray through one cell, as distances from the ray origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub cell: Cell,
    pub entry: f64,
    pub exit: f64,
}

impl Segment {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.entry + self.exit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Traversal {
    pub slice: usize,
    pub segments: Vec<Segment>,
    /// Distance at which the ray leaves the grid or reaches its max range.
    pub exit_distance: f64,
}

impl Traversal {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Flat voxel indices of the visited cells.
    pub fn voxels<'a>(&'a self, geom: &'a GridGeometry) -> impl Iterator<Item = usize> + 'a {
        self.segments
            .iter()
            .map(move |s| geom.index(s.cell, self.slice))
    }

    fn probabilities(&self, occ: &OccupancyGrid) -> Vec<f64> {
        let geom = occ.geometry();
        self.voxels(geom).map(|v| occ.probability(v)).collect()
    }
}

/// Walks `ray` through the grid.
///
/// Cells are visited in order of increasing distance. When the next x and y
/// cell boundaries are equidistant the x step is taken first; the zero-length
/// chord this produces at an exact corner crossing is not reported, so entry
/// distances are strictly increasing and consecutive segments share their
/// boundary distance.
pub fn traverse(ray: &Ray, geom: &GridGeometry) -> Traversal {
    let empty = |t: f64| Traversal {
        slice: ray.slice,
        segments: Vec::new(),
        exit_distance: t,
    };
    let lo = geom.origin();
    let hi = geom.max_corner();
    let (o, d) = (ray.origin, ray.direction);

    let mut t_lo = 0.0_f64;
    let mut t_hi = ray.max_range;
    for (oc, dc, l, h) in [(o.x, d.x, lo.x, hi.x), (o.y, d.y, lo.y, hi.y)] {
        if dc == 0.0 {
            if oc < l || oc >= h {
                return empty(0.0);
            }
        } else {
            let ta = (l - oc) / dc;
            let tb = (h - oc) / dc;
            t_lo = t_lo.max(ta.min(tb));
            t_hi = t_hi.min(ta.max(tb));
        }
    }
    if !(t_lo < t_hi) {
        return empty(0.0);
    }

    let res = geom.resolution;
    let start = ray.point_at(t_lo);
    let mut i = start_index(start.x, lo.x, res, d.x, geom.width);
    let mut j = start_index(start.y, lo.y, res, d.y, geom.height);
    let step_i: i64 = if d.x > 0.0 { 1 } else { -1 };
    let step_j: i64 = if d.y > 0.0 { 1 } else { -1 };

    // Boundary distances are computed from the ray origin each time rather
    // than accumulated, so long rays do not drift.
    let boundary = |idx: i64, oc: f64, dc: f64, l: f64| -> f64 {
        if dc > 0.0 {
            (l + (idx + 1) as f64 * res - oc) / dc
        } else if dc < 0.0 {
            (l + idx as f64 * res - oc) / dc
        } else {
            f64::INFINITY
        }
    };
    let mut next_x = boundary(i, o.x, d.x, lo.x);
    let mut next_y = boundary(j, o.y, d.y, lo.y);

    let mut segments = Vec::with_capacity(geom.width + geom.height);
    let mut entry = t_lo;
    loop {
        let step_x = next_x <= next_y;
        let t_next = next_x.min(next_y);
        let exit = t_next.min(t_hi);
        if exit > entry {
            segments.push(Segment {
                cell: Cell::new(i as usize, j as usize),
                entry,
                exit,
            });
            entry = exit;
        }
        if t_next >= t_hi {
            break;
        }
        if step_x {
            i += step_i;
            if i < 0 || i >= geom.width as i64 {
                break;
            }
            next_x = boundary(i, o.x, d.x, lo.x);
        } else {
            j += step_j;
            if j < 0 || j >= geom.height as i64 {
                break;
            }
            next_y = boundary(j, o.y, d.y, lo.y);
        }
    }

    let exit_distance = segments.last().map_or(t_lo, |s| s.exit);
    Traversal {
        slice: ray.slice,
        segments,
        exit_distance,
    }
}

/// Index of the cell a ray starts in along one axis. A start exactly on a
/// cell boundary while moving in the negative direction belongs to the lower
/// cell, since the upper one would be left after zero distance.
fn start_index(coord: f64, lo: f64, res: f64, dir: f64, n: usize) -> i64 {
    let u = (coord - lo) / res;
    let mut k = u.floor();
    if dir < 0.0 && u == k {
        k -= 1.0;
    }
    (k as i64).clamp(0, n as i64 - 1)
}

/// Expected stopping distance of one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct RayDepth {
    pub expected_distance: f64,
    /// Probability that the ray terminates in each visited voxel.
    pub weights: Vec<f64>,
    /// Probability that the ray passes every visited voxel.
    pub escape_weight: f64,
}

/// `None` when the traversal is empty: the ray has no coverage in the grid.
pub fn expected_distance(traversal: &Traversal, occ: &OccupancyGrid) -> Option<RayDepth> {
    if traversal.is_empty() {
        return None;
    }
    let probs = traversal.probabilities(occ);
    let mut transmit = 1.0;
    let mut d = 0.0;
    let mut weights = Vec::with_capacity(probs.len());
    for (seg, &p) in traversal.segments.iter().zip(&probs) {
        let w = p * transmit;
        d += w * seg.midpoint();
        weights.push(w);
        transmit *= 1.0 - p;
    }
    d += transmit * traversal.exit_distance;
    Some(RayDepth {
        expected_distance: d,
        weights,
        escape_weight: transmit,
    })
}

/// Gradient of the expected distance with respect to the logit of every
/// visited voxel, scaled by `upstream`. Aligned with `traversal.segments`.
pub fn expected_distance_backward(
    traversal: &Traversal,
    occ: &OccupancyGrid,
    upstream: f64,
) -> Vec<f64> {
    let probs = traversal.probabilities(occ);
    let n = probs.len();
    // Transmittance before each voxel.
    let mut before = Vec::with_capacity(n);
    let mut t = 1.0;
    for &p in &probs {
        before.push(t);
        t *= 1.0 - p;
    }
    // Suffix expectation D_k = p_k m_k + (1 - p_k) D_{k+1}, D_n = exit.
    let mut grads = vec![0.0; n];
    let mut suffix = traversal.exit_distance;
    for k in (0..n).rev() {
        let p = probs[k];
        let m = traversal.segments[k].midpoint();
        let d_dp = before[k] * (m - suffix);
        grads[k] = upstream * d_dp * p * (1.0 - p);
        suffix = p * m + (1.0 - p) * suffix;
    }
    grads
}

/// Soft visible freespace along one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct FreespaceRay {
    /// Running maximum of occupancy along the ray.
    pub occlusion: Vec<f64>,
    /// `1 - occlusion`.
    pub freespace: Vec<f64>,
    /// Position of the earliest voxel attaining each running maximum.
    pub argmax: Vec<usize>,
}

/// `None` when the traversal is empty.
pub fn project_freespace(traversal: &Traversal, occ: &OccupancyGrid) -> Option<FreespaceRay> {
    if traversal.is_empty() {
        return None;
    }
    Some(cumulative_max(&traversal.probabilities(occ)))
}

pub(crate) fn cumulative_max(probs: &[f64]) -> FreespaceRay {
    let mut occlusion = Vec::with_capacity(probs.len());
    let mut argmax = Vec::with_capacity(probs.len());
    let mut best = f64::NEG_INFINITY;
    let mut best_at = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > best {
            best = p;
            best_at = k;
        }
        occlusion.push(best);
        argmax.push(best_at);
    }
    let freespace = occlusion.iter().map(|m| 1.0 - m).collect();
    FreespaceRay {
        occlusion,
        freespace,
        argmax,
    }
}

/// Routes `d loss / d freespace[k]` (negated) to the earliest maximizer of
/// the running max at `k`, then through the sigmoid. Aligned with
/// `traversal.segments`.
pub fn project_freespace_backward(
    traversal: &Traversal,
    occ: &OccupancyGrid,
    upstream: &[f64],
) -> Vec<f64> {
    assert_eq!(
        upstream.len(),
        traversal.len(),
        "one upstream gradient per voxel"
    );
    let probs = traversal.probabilities(occ);
    let proj = cumulative_max(&probs);
    route_freespace_gradient(&probs, &proj.argmax, upstream)
}

fn route_freespace_gradient(probs: &[f64], argmax: &[usize], upstream: &[f64]) -> Vec<f64> {
    let mut d_p = vec![0.0; probs.len()];
    for (k, &g) in upstream.iter().enumerate() {
        d_p[argmax[k]] -= g;
    }
    d_p.iter()
        .zip(probs)
        .map(|(g, p)| g * p * (1.0 - p))
        .collect()
}

/// One LiDAR return: a direction, the measured distance and whether anything
/// was hit. No-return rays carry the sensor's max range as distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRay {
    pub direction: Vec2,
    pub distance: f64,
    pub hit: bool,
}

/// A posed sweep. Only future frames (`1..=T`) map onto a grid slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub frame: i64,
    pub origin: Vec2,
    pub rays: Vec<SweepRay>,
}

impl Sweep {
    pub fn hit_count(&self) -> usize {
        self.rays.iter().filter(|r| r.hit).count()
    }

    /// The same measurements assigned to a different frame.
    pub fn retimed(&self, frame: i64) -> Sweep {
        Sweep {
            frame,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedRay {
    pub direction: Vec2,
    /// `None` when the ray never enters the grid.
    pub depth: Option<RayDepth>,
    /// `origin + expected_distance * direction` for valid rays.
    pub endpoint: Option<Vec2>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedSweep {
    pub slice: usize,
    pub origin: Vec2,
    pub rays: Vec<RenderedRay>,
}

/// Casts one ray per direction from `origin` through time slice `slice`.
pub fn render_sweep(
    occ: &OccupancyGrid,
    origin: Vec2,
    slice: usize,
    directions: &[Vec2],
    max_range: f64,
) -> RenderedSweep {
    let geom = occ.geometry();
    let rays = directions
        .par_iter()
        .map(|&direction| {
            let ray = Ray::new(origin, direction, slice, max_range);
            let depth = expected_distance(&traverse(&ray, geom), occ);
            let endpoint = depth
                .as_ref()
                .map(|d| origin + direction * d.expected_distance);
            RenderedRay {
                direction,
                depth,
                endpoint,
            }
        })
        .collect();
    RenderedSweep {
        slice,
        origin,
        rays,
    }
}
