//! Per-pixel affordance maps.
//!
//! The distance map holds, for every pixel on the target part, how far the
//! visible material point travels when the target joint is advanced by a
//! small probe displacement. Revolute parts are min-max normalized into
//! [0, 1]; every pixel of a prismatic part moves equally and scores 1.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::render::CameraView;
use crate::scene::{ArticulatedObject, JointKind};
use crate::{seed, Error, Result};

pub const DEFAULT_REVOLUTE_PROBE: f64 = 0.1;
pub const DEFAULT_PRISMATIC_PROBE: f64 = 0.05;

/// Positive samples need a score above this.
pub const POSITIVE_THRESHOLD: f64 = 0.8;
/// Negative samples on the target part need a score below this.
pub const NEGATIVE_THRESHOLD: f64 = 0.2;
/// Positive/negative pixels per affordance question.
pub const DEFAULT_SAMPLE_COUNT: usize = 20;

pub fn default_probe(kind: JointKind) -> f64 {
    match kind {
        JointKind::Revolute => DEFAULT_REVOLUTE_PROBE,
        JointKind::Prismatic => DEFAULT_PRISMATIC_PROBE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceMap {
    pub width: u32,
    pub height: u32,
    /// Row-major scores; 0 outside `valid`.
    pub scores: Vec<f64>,
    /// True on pixels of the part driven by `target_joint`.
    pub valid: Vec<bool>,
    pub target_joint: usize,
    pub kind: JointKind,
    pub probe_delta: f64,
}

impl AffordanceMap {
    pub fn score(&self, x: u32, y: u32) -> f64 {
        self.scores[y as usize * self.width as usize + x as usize]
    }

    pub fn max_score(&self) -> f64 {
        self.scores
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelSample {
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
}

impl PixelSample {
    pub fn n(&self) -> usize {
        self.positives.len()
    }
}

/// Pixels whose nearest hit is on the part driven by `target_joint`.
pub fn valid_mask(
    obj: &ArticulatedObject,
    view: &CameraView,
    target_joint: usize,
) -> Result<Vec<bool>> {
    let part = obj
        .part_of_joint(target_joint)
        .ok_or(Error::NoSuchJoint(target_joint))?;
    let id = obj.parts[part].part_id;
    Ok(view.part_id.iter().map(|&p| p == id).collect())
}

/// Per-pixel displacement of the visible material point when
/// `target_joint` advances from `joint_values` by `probe_delta`.
///
/// The point seen at each pixel is carried in its part frame; nothing is
/// re-rendered, so occlusion changes do not break correspondence.
pub fn distance_map(
    obj: &ArticulatedObject,
    joint_values: &[f64],
    view: &CameraView,
    target_joint: usize,
    probe_delta: f64,
) -> Result<Vec<f64>> {
    obj.check_joint_values(joint_values)?;
    let joint = obj.joint(target_joint)?;
    let probed = joint_values[target_joint] + probe_delta;
    if !probe_delta.is_finite() || !joint.within_limits(probed) {
        return Err(Error::JointLimit {
            joint: target_joint,
            value: probed,
            min: joint.limits[0],
            max: joint.limits[1],
        });
    }
    let part = obj
        .part_of_joint(target_joint)
        .ok_or(Error::NoSuchJoint(target_joint))?;
    let id = obj.parts[part].part_id;

    let mut after_values = joint_values.to_vec();
    after_values[target_joint] = probed;
    // Maps a world point at the current configuration to the same material
    // point after the probe.
    let carry = obj.part_pose(part, &after_values) * obj.part_pose(part, joint_values).inverse();

    Ok(view
        .part_id
        .iter()
        .zip(&view.position)
        .map(|(&p, before)| {
            if p == id {
                (carry * before - before).norm()
            } else {
                0.0
            }
        })
        .collect())
}

/// Normalizes a distance map into an affordance map.
pub fn affordance_from_distance(
    distances: &[f64],
    valid: &[bool],
    kind: JointKind,
    width: u32,
    height: u32,
    target_joint: usize,
    probe_delta: f64,
) -> Result<AffordanceMap> {
    assert_eq!(distances.len(), valid.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&d, _) in distances.iter().zip(valid).filter(|(_, &v)| v) {
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo > hi {
        return Err(Error::EmptyPart);
    }
    let range = hi - lo;
    let scores = distances
        .iter()
        .zip(valid)
        .map(|(&d, &v)| match (v, kind) {
            (false, _) => 0.0,
            (true, JointKind::Prismatic) => 1.0,
            (true, JointKind::Revolute) if range > 0.0 => ((d - lo) / range).clamp(0.0, 1.0),
            (true, JointKind::Revolute) => 1.0,
        })
        .collect();
    Ok(AffordanceMap {
        width,
        height,
        scores,
        valid: valid.to_vec(),
        target_joint,
        kind,
        probe_delta,
    })
}

/// Distance map plus normalization at the view's joint configuration.
pub fn compute_affordance(
    obj: &ArticulatedObject,
    view: &CameraView,
    target_joint: usize,
    probe_delta: Option<f64>,
) -> Result<AffordanceMap> {
    let kind = obj.joint(target_joint)?.kind;
    let probe = probe_delta.unwrap_or_else(|| default_probe(kind));
    let d = distance_map(obj, &view.joint_values, view, target_joint, probe)?;
    let valid = valid_mask(obj, view, target_joint)?;
    affordance_from_distance(
        &d,
        &valid,
        kind,
        view.width(),
        view.height(),
        target_joint,
        probe,
    )
}

/// Positive pool: valid pixels scoring above 0.8.
pub fn positive_pool(amap: &AffordanceMap) -> Vec<usize> {
    (0..amap.scores.len())
        .filter(|&i| amap.valid[i] && amap.scores[i] > POSITIVE_THRESHOLD)
        .collect()
}

/// Negative pool: valid pixels scoring below 0.2, plus every rendered
/// pixel of a fixed part.
pub fn negative_pool(
    amap: &AffordanceMap,
    view: &CameraView,
    obj: &ArticulatedObject,
) -> Vec<usize> {
    let fixed: Vec<i32> = obj
        .parts
        .iter()
        .filter(|p| !p.movable)
        .map(|p| p.part_id)
        .collect();
    (0..amap.scores.len())
        .filter(|&i| {
            (amap.valid[i] && amap.scores[i] < NEGATIVE_THRESHOLD)
                || fixed.contains(&view.part_id[i])
        })
        .collect()
}

fn draw(pool: &[usize], n: usize, rng: &mut impl Rng, what: &str) -> Vec<usize> {
    if pool.len() >= n {
        index::sample(rng, pool.len(), n)
            .into_iter()
            .map(|k| pool[k])
            .collect()
    } else {
        log::warn!(
            "{what} pool has {} pixels, fewer than {n}; sampling with replacement",
            pool.len()
        );
        (0..n)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect()
    }
}

/// Draws `n` positive and `n` negative pixels, without replacement when the
/// pools are large enough. Deterministic per seed.
pub fn sample_pixels(
    amap: &AffordanceMap,
    view: &CameraView,
    obj: &ArticulatedObject,
    n: usize,
    seed: u64,
) -> Result<PixelSample> {
    if n == 0 {
        return Err(Error::InvalidParams(
            "sample count must be at least 1".into(),
        ));
    }
    let pos = positive_pool(amap);
    if pos.is_empty() {
        return Err(Error::NoAffordance);
    }
    let neg = negative_pool(amap, view, obj);
    if neg.is_empty() {
        return Err(Error::NoNegatives);
    }
    let mut rng = seed::rng(seed);
    let to_px = |i: usize| view.pixel(i);
    Ok(PixelSample {
        positives: draw(&pos, n, &mut rng, "positive")
            .into_iter()
            .map(to_px)
            .collect(),
        negatives: draw(&neg, n, &mut rng, "negative")
            .into_iter()
            .map(to_px)
            .collect(),
    })
}
