//! Self-supervised occupancy recovery: freespace labels from measured
//! sweeps, the per-voxel cross-entropy raycasting loss, and direct logit
//! optimization with Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::grid::{GridGeometry, OccupancyGrid};
use crate::raycast::{traverse, Ray, Sweep, Traversal};
use crate::{Error, Result};

/// Labels nudge measured endpoints forward by this much so a return on a
/// cell boundary lands in the cell behind it.
const ENDPOINT_NUDGE: f64 = 1e-9;

pub const BCE_CLAMP: f64 = 1e-6;

/// Freespace targets aligned with a traversal: a free prefix followed by a
/// not-free suffix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RayLabels {
    pub free: Vec<bool>,
}

impl RayLabels {
    /// Index of the first not-free voxel, if any.
    pub fn endpoint(&self) -> Option<usize> {
        self.free.iter().position(|g| !g)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRay {
    pub traversal: Traversal,
    pub labels: RayLabels,
    pub hit: bool,
    pub distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelSet {
    pub rays: Vec<LabeledRay>,
    /// Rays dropped for a negative or non-finite distance.
    pub rejected: usize,
    /// Rays that never enter the grid.
    pub uncovered: usize,
}

/// Labels every ray of a sweep. Hit rays are traversed to the grid boundary
/// and labelled free strictly before the voxel containing the return;
/// no-return rays are traversed to their max range and labelled free.
pub fn make_labels(sweep: &Sweep, geom: &GridGeometry) -> Result<LabelSet> {
    let slice = geom.check_frame(sweep.frame)?;
    let mut set = LabelSet::default();
    for r in &sweep.rays {
        if !(r.distance.is_finite() && r.distance >= 0.0) || !r.direction.is_finite() {
            set.rejected += 1;
            continue;
        }
        let reach = if r.hit { f64::INFINITY } else { r.distance };
        if reach == 0.0 {
            set.uncovered += 1;
            continue;
        }
        let traversal = traverse(&Ray::new(sweep.origin, r.direction, slice, reach), geom);
        if traversal.is_empty() {
            set.uncovered += 1;
            continue;
        }
        let free = if r.hit {
            let end = traversal
                .segments
                .iter()
                .position(|s| s.exit > r.distance + ENDPOINT_NUDGE)
                .unwrap_or(traversal.len());
            (0..traversal.len()).map(|k| k < end).collect()
        } else {
            vec![true; traversal.len()]
        };
        set.rays.push(LabeledRay {
            traversal,
            labels: RayLabels { free },
            hit: r.hit,
            distance: r.distance,
        });
    }
    Ok(set)
}

/// How per-ray losses combine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossOptions {
    pub reduction: Reduction,
    /// Per-slice ray weights; empty means uniform.
    pub frame_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayLoss {
    pub loss: f64,
    /// Dense gradient with respect to every logit of the grid.
    pub gradient: Vec<f64>,
}

/// Clamped binary cross-entropy of `f` against `g` and its derivative in `f`.
/// The derivative is zero wherever the clamp is active.
fn bce(f: f64, free: bool) -> (f64, f64) {
    let q = f.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let clamped = q != f;
    if free {
        (-q.ln(), if clamped { 0.0 } else { -1.0 / q })
    } else {
        (-(-q).ln_1p(), if clamped { 0.0 } else { 1.0 / (1.0 - q) })
    }
}

/// Summed loss over one ray and its logit gradients, aligned with the
/// traversal.
pub fn ray_loss(occ: &OccupancyGrid, ray: &LabeledRay) -> (f64, Vec<f64>) {
    let probs: Vec<f64> = ray
        .traversal
        .voxels(occ.geometry())
        .map(|v| occ.probability(v))
        .collect();
    labeled_loss(probs, ray)
}

fn labeled_loss(mut probs: Vec<f64>, ray: &LabeledRay) -> (f64, Vec<f64>) {
    // Freespace only changes where the running max does, so the clamped
    // terms for both labels are refreshed there and reused in between.
    let mut d_p = vec![0.0; probs.len()];
    let mut best = f64::NEG_INFINITY;
    let mut best_at = 0;
    let mut terms = [(0.0, 0.0); 2];
    let mut loss = 0.0;
    for (k, (&p, &free)) in probs.iter().zip(&ray.labels.free).enumerate() {
        if p > best {
            best = p;
            best_at = k;
            terms = [bce(1.0 - best, false), bce(1.0 - best, true)];
        }
        let (l, d) = terms[free as usize];
        loss += l;
        d_p[best_at] -= d;
    }
    for (g, p) in d_p.iter().zip(probs.iter_mut()) {
        *p = g * *p * (1.0 - *p);
    }
    (loss, probs)
}

pub fn raycast_loss(occ: &OccupancyGrid, batch: &[LabeledRay]) -> Result<RayLoss> {
    raycast_loss_with(occ, batch, &LossOptions::default())
}

/// Per-ray losses are evaluated in parallel and merged in batch order, so
/// the result does not depend on the thread count.
pub fn raycast_loss_with(
    occ: &OccupancyGrid,
    batch: &[LabeledRay],
    opts: &LossOptions,
) -> Result<RayLoss> {
    if batch.is_empty() {
        return Err(Error::Empty("ray batch"));
    }
    let geom = occ.geometry();
    if !opts.frame_weights.is_empty() && opts.frame_weights.len() != geom.num_timestamps {
        return Err(Error::Config(format!(
            "{} frame weights for {} slices",
            opts.frame_weights.len(),
            geom.num_timestamps
        )));
    }
    let scale = match opts.reduction {
        Reduction::Mean => 1.0 / batch.len() as f64,
        Reduction::Sum => 1.0,
    };
    let p = occ.probabilities();
    let terms: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|r| labeled_loss(r.traversal.voxels(geom).map(|v| p[v]).collect(), r))
        .collect();
    let mut loss = 0.0;
    let mut gradient = vec![0.0; geom.voxel_count()];
    for (ray, (l, g)) in batch.iter().zip(terms) {
        let w = scale
            * opts
                .frame_weights
                .get(ray.traversal.slice)
                .copied()
                .unwrap_or(1.0);
        loss += w * l;
        for (v, gk) in ray.traversal.voxels(geom).zip(g) {
            gradient[v] += w * gk;
        }
    }
    Ok(RayLoss { loss, gradient })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub init_logit: f64,
    /// Half-width of a uniform perturbation added to the initial logits.
    pub init_jitter: f64,
    pub seed: u64,
    /// Stops once consecutive losses differ by less than this; zero disables.
    pub tolerance: f64,
    pub loss: LossOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            iterations: 300,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_logit: DEFAULT_INIT_LOGIT,
            init_jitter: 0.0,
            seed: 0,
            tolerance: 0.0,
            loss: LossOptions::default(),
        }
    }
}

/// Starting logit for every voxel. An occupied prior lets each ray pull down
/// the free cells before its return one by one; a free prior leaves the
/// return cell with no gradient, since it is never the running maximum.
pub const DEFAULT_INIT_LOGIT: f64 = 4.0;

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("fit: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.iterations == 0 {
            return bad("at least one iteration is required");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("moment coefficients must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) || !self.init_logit.is_finite() || !(self.init_jitter >= 0.0) {
            return bad("epsilon must be positive and the initialization finite");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        Ok(())
    }

    pub fn initial_grid(&self, geom: &GridGeometry) -> OccupancyGrid {
        if self.init_jitter == 0.0 {
            return OccupancyGrid::constant(*geom, self.init_logit);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let logits = (0..geom.voxel_count())
            .map(|_| self.init_logit + rng.gen_range(-self.init_jitter..=self.init_jitter))
            .collect();
        OccupancyGrid::from_logits(*geom, logits).expect("sized from geometry")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyFit {
    pub grid: OccupancyGrid,
    /// Loss before each step.
    pub trace: Vec<f64>,
    /// Voxels constrained by at least one training ray.
    pub observed: Vec<bool>,
    pub rejected: usize,
    pub uncovered: usize,
}

/// Optimizes grid logits against the freespace labels of `sweeps`.
/// Voxels no ray reaches receive zero gradient and keep their initial
/// logits exactly.
pub fn fit_occupancy(
    sweeps: &[Sweep],
    geom: &GridGeometry,
    cfg: &FitConfig,
) -> Result<OccupancyFit> {
    cfg.validate()?;
    geom.validate()?;
    let mut batch = Vec::new();
    let mut rejected = 0;
    let mut uncovered = 0;
    for sweep in sweeps {
        let set = make_labels(sweep, geom)?;
        rejected += set.rejected;
        uncovered += set.uncovered;
        batch.extend(set.rays);
    }
    let observed = observed_mask(&batch, geom);
    let mut grid = cfg.initial_grid(geom);
    let mut trace = Vec::new();
    if batch.is_empty() {
        return Ok(OccupancyFit {
            grid,
            trace,
            observed,
            rejected,
            uncovered,
        });
    }

    // Only voxels on some traversal ever see a gradient.
    let mut touched = vec![false; geom.voxel_count()];
    for ray in &batch {
        for k in ray.traversal.voxels(geom) {
            touched[k] = true;
        }
    }
    let active: Vec<usize> = (0..touched.len()).filter(|&k| touched[k]).collect();
    let n = geom.voxel_count();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    for iteration in 0..cfg.iterations {
        let RayLoss { loss, gradient } = raycast_loss_with(&grid, &batch, &cfg.loss)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration, loss });
        }
        let settled = trace
            .last()
            .is_some_and(|&prev: &f64| (prev - loss).abs() < cfg.tolerance);
        trace.push(loss);
        if settled {
            break;
        }
        let t = iteration as i32 + 1;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let logits = grid.logits_mut();
        for &k in &active {
            let g = gradient[k];
            if g == 0.0 && m[k] == 0.0 && v[k] == 0.0 {
                continue;
            }
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            logits[k] -= cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + cfg.epsilon);
        }
    }
    Ok(OccupancyFit {
        grid,
        trace,
        observed,
        rejected,
        uncovered,
    })
}

/// Voxels a labelled ray constrains: up to and including the endpoint voxel
/// of a return, every visited voxel otherwise.
pub fn observed_mask(rays: &[LabeledRay], geom: &GridGeometry) -> Vec<bool> {
    let mut mask = vec![false; geom.voxel_count()];
    for r in rays {
        let last = r
            .labels
            .endpoint()
            .unwrap_or(r.traversal.len().saturating_sub(1));
        for v in r.traversal.voxels(geom).take(last + 1) {
            mask[v] = true;
        }
    }
    mask
}

/// Occupied-class scores and free-class F1 of a hard fit against truth.
/// Ratios with an empty denominator are reported as 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthScores {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub free_f1: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate_against_truth(
    fit: &OccupancyGrid,
    truth: &OccupancyGrid,
    observed: &[bool],
) -> Result<TruthScores> {
    fit.geometry().ensure_same(truth.geometry())?;
    if observed.len() != fit.geometry().voxel_count() {
        return Err(Error::GeometryMismatch(format!(
            "observed mask has {} entries for {} voxels",
            observed.len(),
            fit.geometry().voxel_count()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (k, _) in observed.iter().enumerate().filter(|(_, &o)| o) {
        match (fit.is_occupied(k), truth.is_occupied(k)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(TruthScores {
        iou: ratio(tp, tp + fp + fn_),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        free_f1: ratio(2 * tn, 2 * tn + fp + fn_),
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        true_negative: tn,
    })
}

/// Mean world position of the observed occupied cells in one slice.
pub fn occupied_centroid(grid: &OccupancyGrid, slice: usize, observed: &[bool]) -> Option<Vec2> {
    let geom = grid.geometry();
    let start = slice * geom.cells_per_slice();
    let mut sum = Vec2::ZERO;
    let mut count = 0usize;
    let end = start + geom.cells_per_slice();
    for (k, &seen) in observed.iter().enumerate().take(end).skip(start) {
        if seen && grid.is_occupied(k) {
            sum = sum + geom.cell_to_world_center(geom.unindex(k).0);
            count += 1;
        }
    }
    (count > 0).then(|| sum * (1.0 / count as f64))
}
