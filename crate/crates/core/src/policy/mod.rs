//! Pose-proposal policies standing in for a learned model, plus the online
//! scorer used for outcome-supervised adaptation.
//!
//! Every policy is a pure function of its inputs and a seed. Proposals come
//! with the three-step reasoning trace (category, point assessment, pose) a
//! language model would produce for the same image.

mod tta;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::affordance::AffordanceMap;
use crate::dataset::templates::{make_assessment, FT_PROMPT, OCI_PROMPT};
use crate::dataset::{up_from_forward, ManipPose, PoseText};
use crate::render::CameraView;
use crate::scene::{surface_normal, ArticulatedObject};
use crate::{seed, Error, Result};

pub use tta::{
    pixel_features, propose_with_tta, TtaScorer, DEFAULT_CANDIDATES, DEFAULT_LEARNING_RATE,
    FEATURE_COUNT,
};

/// Fraction of the best score a pixel needs to count as an argmax pixel.
pub const ARGMAX_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseProposal {
    pub pose: ManipPose,
    /// (prompt, answer) pairs in inference order.
    pub cot_trace: Vec<(String, String)>,
    pub source: String,
}

/// Everything a policy may look at for one episode.
#[derive(Debug, Clone, Copy)]
pub struct ProposalContext<'a> {
    pub obj: &'a ArticulatedObject,
    pub view: &'a CameraView,
    pub target_joint: usize,
    pub amap: Option<&'a AffordanceMap>,
}

pub trait PosePolicy: Send + Sync {
    fn name(&self) -> &str;

    /// Whether [`ProposalContext::amap`] must be filled in.
    fn needs_affordance(&self) -> bool {
        false
    }

    fn propose(&self, ctx: &ProposalContext<'_>, seed: u64) -> Result<PoseProposal>;
}

/// Uniform contact on the target part, approaching against the normal.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalOracle;

/// Uniform contact among near-maximal affordance pixels.
#[derive(Debug, Clone, Copy, Default)]
pub struct AffordanceArgmax;

impl PosePolicy for NormalOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn propose(&self, ctx: &ProposalContext<'_>, seed: u64) -> Result<PoseProposal> {
        propose_normal_oracle(ctx.obj, ctx.view, ctx.target_joint, seed)
    }
}

impl PosePolicy for AffordanceArgmax {
    fn name(&self) -> &str {
        "affordance"
    }

    fn needs_affordance(&self) -> bool {
        true
    }

    fn propose(&self, ctx: &ProposalContext<'_>, seed: u64) -> Result<PoseProposal> {
        let amap = ctx.amap.ok_or_else(|| {
            Error::InvalidParams("affordance policy needs an affordance map".into())
        })?;
        propose_affordance_argmax(ctx.obj, ctx.view, amap, seed)
    }
}

/// Builds the pose for contact pixel `px`: forward is the negated surface
/// normal, up follows [`up_from_forward`]. The result is quantized so that it
/// is exactly the pose its answer string describes.
pub fn pose_at_pixel(
    obj: &ArticulatedObject,
    view: &CameraView,
    px: (u32, u32),
) -> Result<ManipPose> {
    let i = view.index(px.0, px.1);
    let part_id = view.part_id[i];
    if part_id < 0 {
        return Err(Error::NoSurface { x: px.0, y: px.1 });
    }
    let p = view.position[i];
    let normal = surface_normal(obj, &view.joint_values, part_id, &p)?;
    let forward = -normal;
    ManipPose {
        contact_px: px,
        contact_3d: p,
        up_dir: up_from_forward(&forward),
        forward_dir: forward,
    }
    .quantized()
}

/// Category, single-point assessment and pose answer, in that order.
pub fn cot_trace(obj: &ArticulatedObject, pose: &ManipPose) -> Vec<(String, String)> {
    vec![
        (OCI_PROMPT.to_string(), obj.category.to_string()),
        make_assessment(pose.contact_px, true),
        (FT_PROMPT.to_string(), PoseText::from_pose(pose).answer()),
    ]
}

fn propose_from_pool(
    obj: &ArticulatedObject,
    view: &CameraView,
    pool: &[usize],
    seed: u64,
    source: &str,
) -> Result<PoseProposal> {
    if pool.is_empty() {
        return Err(Error::NotVisible);
    }
    let i = pool[seed::rng(seed).random_range(0..pool.len())];
    let pose = pose_at_pixel(obj, view, view.pixel(i))?;
    Ok(PoseProposal {
        cot_trace: cot_trace(obj, &pose),
        pose,
        source: source.to_string(),
    })
}

/// Uniformly random visible pixel of the part driven by `target_joint`.
pub fn propose_normal_oracle(
    obj: &ArticulatedObject,
    view: &CameraView,
    target_joint: usize,
    seed: u64,
) -> Result<PoseProposal> {
    let part = obj
        .part_of_joint(target_joint)
        .ok_or(Error::NoSuchJoint(target_joint))?;
    let pool = view.pixels_of_part(obj.parts[part].part_id);
    propose_from_pool(obj, view, &pool, seed, "oracle")
}

/// Valid pixels scoring at least [`ARGMAX_FRACTION`] of the best score.
pub fn argmax_pool(amap: &AffordanceMap) -> Vec<usize> {
    let best = amap.max_score();
    (0..amap.scores.len())
        .filter(|&i| amap.valid[i] && amap.scores[i] >= ARGMAX_FRACTION * best)
        .collect()
}

pub fn propose_affordance_argmax(
    obj: &ArticulatedObject,
    view: &CameraView,
    amap: &AffordanceMap,
    seed: u64,
) -> Result<PoseProposal> {
    propose_from_pool(obj, view, &argmax_pool(amap), seed, "affordance")
}

/// Which policy a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PolicyKind {
    #[default]
    #[serde(rename = "oracle")]
    Oracle,
    #[serde(rename = "affordance")]
    Affordance,
    #[serde(rename = "affordance+tta")]
    AffordanceTta,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Oracle => "oracle",
            PolicyKind::Affordance => "affordance",
            PolicyKind::AffordanceTta => "affordance+tta",
        }
    }

    /// The non-adaptive policy underneath.
    pub fn base(self) -> Box<dyn PosePolicy> {
        match self {
            PolicyKind::Oracle => Box::new(NormalOracle),
            PolicyKind::Affordance | PolicyKind::AffordanceTta => Box::new(AffordanceArgmax),
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(PolicyKind::Oracle),
            "affordance" => Ok(PolicyKind::Affordance),
            "affordance+tta" => Ok(PolicyKind::AffordanceTta),
            other => Err(Error::InvalidParams(format!("unknown policy `{other}`"))),
        }
    }
}
