//! Episode setup, success metrics and evaluation over procedural categories.

mod report;
mod tta;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affordance::{compute_affordance, AffordanceMap};
use crate::control::{run_manipulation, AiaConfig, EpisodeTrace, Termination};
use crate::dataset::ManipPose;
use crate::policy::{PosePolicy, ProposalContext};
use crate::render::{render, sample_camera, CameraView, Intrinsics, DEFAULT_RESOLUTION};
use crate::scene::{build_object, ArticulatedObject, Category, SizeRanges};
use crate::{seed, Error, Result};

pub use report::{emit_report, CategoryStats, EvalReport, ReportFormat};
pub use tta::{run_tta_experiment, window_rates, TtaOptions, TtaReport, TtaScenario};

/// Initial-movement threshold, joint units.
pub const INITIAL_THRESHOLD: f64 = 0.01;
/// Long-distance threshold, joint units.
pub const LONG_THRESHOLD: f64 = 0.1;
/// The target part must cover at least this many pixels.
pub const MIN_VISIBLE_PIXELS: usize = 30;
/// Camera draws tried before an episode is declared invisible.
pub const MAX_CAMERA_ATTEMPTS: u64 = 64;

// Sub-streams of an episode seed.
const OBJECT_STREAM: u64 = 0;
const JOINT_STREAM: u64 = 1;
const CAMERA_STREAM: u64 = 2;
const POLICY_STREAM: u64 = 3;
const CONTROL_STREAM: u64 = 4;
const SAMPLE_STREAM: u64 = 5;
const MASK_STREAM: u64 = 6;

/// Everything needed to rebuild an episode bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episode_id: u64,
    pub category: Category,
    pub episode_seed: u64,
    pub object_seed: u64,
    pub camera_seed: u64,
    pub target_joint: usize,
    pub resolution: [u32; 2],
}

impl EpisodeSpec {
    pub fn policy_seed(&self) -> u64 {
        seed::derive(self.episode_seed, POLICY_STREAM)
    }

    pub fn control_seed(&self) -> u64 {
        seed::derive(self.episode_seed, CONTROL_STREAM)
    }

    pub fn sample_seed(&self) -> u64 {
        seed::derive(self.episode_seed, SAMPLE_STREAM)
    }

    pub fn mask_seed(&self) -> u64 {
        seed::derive(self.episode_seed, MASK_STREAM)
    }
}

pub struct Episode {
    pub spec: EpisodeSpec,
    pub obj: ArticulatedObject,
    pub view: CameraView,
}

impl Episode {
    pub fn affordance(&self) -> Result<AffordanceMap> {
        compute_affordance(&self.obj, &self.view, self.spec.target_joint, None)
    }
}

fn render_spec(spec: &EpisodeSpec, obj: &ArticulatedObject) -> Result<CameraView> {
    let q = obj.joint_values();
    let [w, h] = spec.resolution;
    let cam = sample_camera(
        spec.camera_seed,
        obj.bounds(&q).center(),
        Intrinsics::for_resolution(w, h),
    );
    render(obj, &q, &cam)
}

/// Builds episode `episode_id` of a run seeded with `master_seed`: object,
/// target joint, and the first sampled camera from which the target part
/// shows at least [`MIN_VISIBLE_PIXELS`] pixels.
pub fn setup_episode(
    category: Category,
    episode_id: u64,
    master_seed: u64,
    resolution: [u32; 2],
) -> Result<Episode> {
    let episode_seed = seed::derive(master_seed, episode_id);
    let object_seed = seed::derive(episode_seed, OBJECT_STREAM);
    let obj = build_object(category, object_seed, &SizeRanges::default())?;
    let target_joint =
        seed::rng(seed::derive(episode_seed, JOINT_STREAM)).random_range(0..obj.joints.len());
    let part_id = obj.parts[obj
        .part_of_joint(target_joint)
        .ok_or(Error::NoSuchJoint(target_joint))?]
    .part_id;
    let camera_root = seed::derive(episode_seed, CAMERA_STREAM);
    for attempt in 0..MAX_CAMERA_ATTEMPTS {
        let spec = EpisodeSpec {
            episode_id,
            category,
            episode_seed,
            object_seed,
            camera_seed: seed::derive(camera_root, attempt),
            target_joint,
            resolution,
        };
        let view = render_spec(&spec, &obj)?;
        if view.part_id.iter().filter(|&&p| p == part_id).count() >= MIN_VISIBLE_PIXELS {
            return Ok(Episode { spec, obj, view });
        }
    }
    Err(Error::NotVisible)
}

/// Rebuilds an episode from a stored spec without resampling the camera.
pub fn rebuild_episode(spec: &EpisodeSpec) -> Result<Episode> {
    let obj = build_object(spec.category, spec.object_seed, &SizeRanges::default())?;
    obj.joint(spec.target_joint)?;
    let view = render_spec(spec, &obj)?;
    Ok(Episode {
        spec: *spec,
        obj,
        view,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: u64,
    pub category: Category,
    pub policy: String,
    /// Joint displacement achieved, joint units.
    pub displacement: f64,
    pub steps: usize,
    pub success_initial: bool,
    pub success_long: bool,
    pub termination: Option<Termination>,
    /// Set when the episode could not be run (e.g. nothing visible).
    pub error: Option<String>,
    pub trace_path: Option<String>,
}

impl EpisodeResult {
    pub fn from_displacement(
        episode_id: u64,
        category: Category,
        policy: &str,
        displacement: f64,
        steps: usize,
        termination: Option<Termination>,
    ) -> Self {
        Self {
            episode_id,
            category,
            policy: policy.to_string(),
            displacement,
            steps,
            success_initial: displacement > INITIAL_THRESHOLD,
            success_long: displacement > LONG_THRESHOLD,
            termination,
            error: None,
            trace_path: None,
        }
    }

    fn failed(episode_id: u64, category: Category, policy: &str, err: &Error) -> Self {
        let mut r = Self::from_displacement(episode_id, category, policy, 0.0, 0, None);
        r.error = Some(err.to_string());
        r
    }
}

/// A run episode with enough context to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub spec: EpisodeSpec,
    pub policy: String,
    pub config: AiaConfig,
    pub pose: ManipPose,
    pub trace: EpisodeTrace,
}

/// Re-runs a recorded episode from its spec and pose.
pub fn replay(record: &EpisodeRecord) -> Result<EpisodeTrace> {
    let ep = rebuild_episode(&record.spec)?;
    run_manipulation(
        &ep.obj,
        &ep.view,
        &record.pose,
        record.spec.target_joint,
        &record.config,
        record.spec.control_seed(),
    )
}

/// Per-episode output of [`run_episode`].
pub struct EpisodeOutcome {
    pub result: EpisodeResult,
    pub record: Option<EpisodeRecord>,
}

/// Sets up, proposes and manipulates one episode. Setup and policy errors
/// are reported as failed episodes rather than aborting the run.
pub fn run_episode(
    policy: &dyn PosePolicy,
    category: Category,
    episode_id: u64,
    master_seed: u64,
    resolution: [u32; 2],
    cfg: &AiaConfig,
) -> Result<EpisodeOutcome> {
    let attempt = || -> Result<EpisodeRecord> {
        let ep = setup_episode(category, episode_id, master_seed, resolution)?;
        let amap = if policy.needs_affordance() {
            Some(ep.affordance()?)
        } else {
            None
        };
        let ctx = ProposalContext {
            obj: &ep.obj,
            view: &ep.view,
            target_joint: ep.spec.target_joint,
            amap: amap.as_ref(),
        };
        let proposal = policy.propose(&ctx, ep.spec.policy_seed())?;
        let trace = run_manipulation(
            &ep.obj,
            &ep.view,
            &proposal.pose,
            ep.spec.target_joint,
            cfg,
            ep.spec.control_seed(),
        )?;
        Ok(EpisodeRecord {
            spec: ep.spec,
            policy: policy.name().to_string(),
            config: *cfg,
            pose: proposal.pose,
            trace,
        })
    };
    match attempt() {
        Ok(record) => {
            let t = &record.trace;
            let result = EpisodeResult::from_displacement(
                episode_id,
                category,
                policy.name(),
                t.displacement,
                t.steps,
                Some(t.termination),
            );
            Ok(EpisodeOutcome {
                result,
                record: Some(record),
            })
        }
        Err(e @ (Error::InvalidParams(_) | Error::Io(_) | Error::Json(_))) => Err(e),
        Err(e) => {
            log::debug!("episode {episode_id} ({category}) failed: {e}");
            Ok(EpisodeOutcome {
                result: EpisodeResult::failed(episode_id, category, policy.name(), &e),
                record: None,
            })
        }
    }
}

/// Episode ids of a run: category `c` (by position) owns ids
/// `c * per_category .. (c + 1) * per_category`.
pub fn episode_ids(categories: &[Category], per_category: usize) -> Vec<(Category, u64)> {
    categories
        .iter()
        .enumerate()
        .flat_map(|(c, &cat)| (0..per_category).map(move |i| (cat, (c * per_category + i) as u64)))
        .collect()
}

/// Runs every episode in parallel; results come back in episode-id order.
pub fn evaluate_detailed(
    policy: &dyn PosePolicy,
    categories: &[Category],
    episodes_per_category: usize,
    cfg: &AiaConfig,
    seed: u64,
    resolution: [u32; 2],
) -> Result<(EvalReport, Vec<EpisodeOutcome>)> {
    cfg.validate()?;
    let outcomes = episode_ids(categories, episodes_per_category)
        .into_par_iter()
        .map(|(cat, id)| run_episode(policy, cat, id, seed, resolution, cfg))
        .collect::<Result<Vec<_>>>()?;
    let results = outcomes.iter().map(|o| o.result.clone()).collect();
    let report =
        EvalReport::from_results(policy.name(), categories, results, *cfg, seed, resolution);
    Ok((report, outcomes))
}

/// Per-category success rates of `policy` at the default resolution.
pub fn evaluate(
    policy: &dyn PosePolicy,
    categories: &[Category],
    episodes_per_category: usize,
    cfg: &AiaConfig,
    seed: u64,
) -> Result<EvalReport> {
    let resolution = [DEFAULT_RESOLUTION.0, DEFAULT_RESOLUTION.1];
    Ok(evaluate_detailed(
        policy,
        categories,
        episodes_per_category,
        cfg,
        seed,
        resolution,
    )?
    .0)
}
