use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PosePolicy, PoseProposal, ProposalContext};
use crate::dataset::templates::make_assessment;
use crate::{seed, Error, Result};

pub const FEATURE_COUNT: usize = 5;
pub const DEFAULT_LEARNING_RATE: f64 = 0.5;
pub const DEFAULT_CANDIDATES: usize = 8;

/// Logistic model over hand-crafted contact-pixel features, trained online
/// from success/failure outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaScorer {
    pub weights: [f64; FEATURE_COUNT],
    pub learning_rate: f64,
    pub update_count: u64,
}

impl Default for TtaScorer {
    fn default() -> Self {
        Self::new(DEFAULT_LEARNING_RATE)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl TtaScorer {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            weights: [0.0; FEATURE_COUNT],
            learning_rate,
            update_count: 0,
        }
    }

    pub fn logit(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        self.weights.iter().zip(features).map(|(w, x)| w * x).sum()
    }

    /// Probability that contacting at these features succeeds.
    pub fn score(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        sigmoid(self.logit(features))
    }

    /// One gradient step of binary cross-entropy; label 1 for success.
    pub fn update(&mut self, features: &[f64; FEATURE_COUNT], success: bool) -> Result<()> {
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite feature".into()));
        }
        let y = if success { 1.0 } else { 0.0 };
        let g = y - self.score(features);
        for (w, x) in self.weights.iter_mut().zip(features) {
            *w += self.learning_rate * g * x;
        }
        self.update_count += 1;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// `[x / W, y / H, affordance score, distance to the part centroid over the
/// largest such distance, 1]` for contact pixel `px`.
pub fn pixel_features(ctx: &ProposalContext<'_>, px: (u32, u32)) -> Result<[f64; FEATURE_COUNT]> {
    let view = ctx.view;
    let part = ctx
        .obj
        .part_of_joint(ctx.target_joint)
        .ok_or(Error::NoSuchJoint(ctx.target_joint))?;
    let pixels = view.pixels_of_part(ctx.obj.parts[part].part_id);
    if pixels.is_empty() {
        return Err(Error::NotVisible);
    }
    let coords: Vec<(f64, f64)> = pixels
        .iter()
        .map(|&i| {
            let (x, y) = view.pixel(i);
            (f64::from(x), f64::from(y))
        })
        .collect();
    let n = coords.len() as f64;
    let cx = coords.iter().map(|c| c.0).sum::<f64>() / n;
    let cy = coords.iter().map(|c| c.1).sum::<f64>() / n;
    let dist = |(x, y): (f64, f64)| (x - cx).hypot(y - cy);
    let reach = coords.iter().copied().map(dist).fold(0.0, f64::max);
    let (x, y) = (f64::from(px.0), f64::from(px.1));
    let radial = if reach > 0.0 {
        dist((x, y)) / reach
    } else {
        0.0
    };
    let score = ctx.amap.map_or(0.0, |a| a.score(px.0, px.1));
    Ok([
        x / f64::from(view.width()),
        y / f64::from(view.height()),
        score,
        radial,
        1.0,
    ])
}

/// Seed of candidate `k`; candidate 0 reuses the caller's seed so a single
/// candidate reproduces the base policy.
pub fn candidate_seed(seed: u64, k: usize) -> u64 {
    if k == 0 {
        seed
    } else {
        seed::derive(seed, k as u64)
    }
}

/// Draws `candidates` proposals from `base`, keeps the one the scorer rates
/// highest (first on ties) and appends its single-point assessment.
pub fn propose_with_tta(
    base: &dyn PosePolicy,
    scorer: &TtaScorer,
    ctx: &ProposalContext<'_>,
    seed: u64,
    candidates: usize,
) -> Result<PoseProposal> {
    if candidates == 0 {
        return Err(Error::InvalidParams("need at least one candidate".into()));
    }
    let mut best: Option<(f64, PoseProposal)> = None;
    for k in 0..candidates {
        let p = base.propose(ctx, candidate_seed(seed, k))?;
        let logit = scorer.logit(&pixel_features(ctx, p.pose.contact_px)?);
        if best.as_ref().is_none_or(|(b, _)| logit > *b) {
            best = Some((logit, p));
        }
    }
    let (logit, mut p) = best.expect("at least one candidate");
    p.cot_trace
        .push(make_assessment(p.pose.contact_px, logit >= 0.0));
    p.source = format!("{}+tta", base.name());
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::compute_affordance;
    use crate::policy::AffordanceArgmax;
    use crate::render::{render, Camera, Intrinsics};
    use crate::scene::{build_object, Category, SizeRanges};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    const F: [f64; 5] = [0.1, 0.1, 0.1, 0.1, 1.0];

    #[test]
    fn untrained_scorer_is_constant() {
        let s = TtaScorer::default();
        assert_eq!(s.score(&F), 0.5);
        assert_eq!(s.score(&[0.9, 0.2, 1.0, 0.5, 1.0]), 0.5);
        assert_eq!(s.weights, [0.0; 5]);
    }

    #[test]
    fn success_raises_failure_lowers() {
        let mut s = TtaScorer::default();
        s.update(&F, true).unwrap();
        assert!(s.score(&F) > 0.5);
        let up = s.score(&F);
        s.update(&F, false).unwrap();
        assert!(s.score(&F) < up);
        assert_eq!(s.update_count, 2);
    }

    #[test]
    fn alternating_outcomes_settle_near_half() {
        let mut s = TtaScorer::default();
        for k in 0..1000 {
            s.update(&F, k % 2 == 0).unwrap();
        }
        assert!((s.score(&F) - 0.5).abs() < 0.05, "{}", s.score(&F));
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = TtaScorer::default();
        assert!(s.update(&[f64::NAN, 0.0, 0.0, 0.0, 1.0], true).is_err());
        assert_eq!(s.update_count, 0);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scorer.json");
        let mut s = TtaScorer::default();
        s.update(&F, false).unwrap();
        s.save(&path).unwrap();
        assert_eq!(TtaScorer::load(&path).unwrap(), s);
    }

    fn door_scene() -> (
        crate::ArticulatedObject,
        crate::CameraView,
        crate::AffordanceMap,
    ) {
        let obj = build_object(Category::Door, 1, &SizeRanges::default()).unwrap();
        let q = obj.joint_values();
        let c = obj.bounds(&q).center();
        let cam = Camera::look_at(
            Intrinsics::for_resolution(96, 96),
            c + Vector3::new(4.0, 1.5, 2.5),
            c,
        );
        let view = render(&obj, &q, &cam).unwrap();
        let amap = compute_affordance(&obj, &view, 0, None).unwrap();
        (obj, view, amap)
    }

    #[test]
    fn single_candidate_or_blank_scorer_reproduces_base() {
        let (obj, view, amap) = door_scene();
        let ctx = ProposalContext {
            obj: &obj,
            view: &view,
            target_joint: 0,
            amap: Some(&amap),
        };
        let blank = TtaScorer::default();
        let trained = TtaScorer {
            weights: [3.0, -2.0, 1.0, 4.0, 0.0],
            ..TtaScorer::default()
        };
        for seed in 0..10 {
            let base = AffordanceArgmax.propose(&ctx, seed).unwrap();
            for (scorer, m) in [(&trained, 1), (&blank, 8)] {
                let p = propose_with_tta(&AffordanceArgmax, scorer, &ctx, seed, m).unwrap();
                assert_eq!(p.pose, base.pose);
                assert_eq!(p.cot_trace[..3], base.cot_trace[..]);
                assert_eq!(p.cot_trace.len(), 4);
            }
        }
    }

    #[test]
    fn features_are_normalized() {
        let (obj, view, amap) = door_scene();
        let ctx = ProposalContext {
            obj: &obj,
            view: &view,
            target_joint: 0,
            amap: Some(&amap),
        };
        for i in view.pixels_of_part(1) {
            let f = pixel_features(&ctx, view.pixel(i)).unwrap();
            assert!(f[..4].iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(f[4], 1.0);
        }
    }

    proptest! {
        #[test]
        fn positive_rescaling_keeps_the_choice(
            w in prop::array::uniform5(-3.0f64..3.0),
            k in 0.1f64..10.0,
            seed in 0u64..1000,
        ) {
            let (obj, view, amap) = door_scene();
            let ctx = ProposalContext { obj: &obj, view: &view, target_joint: 0, amap: Some(&amap) };
            let a = TtaScorer { weights: w, ..TtaScorer::default() };
            let b = TtaScorer { weights: w.map(|v| v * k), ..TtaScorer::default() };
            let pa = propose_with_tta(&AffordanceArgmax, &a, &ctx, seed, 8).unwrap();
            let pb = propose_with_tta(&AffordanceArgmax, &b, &ctx, seed, 8).unwrap();
            prop_assert_eq!(pa.pose.contact_px, pb.pose.contact_px);
        }
    }
}
