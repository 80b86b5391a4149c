//! Success-only dataset collection with the normal-direction oracle.

use std::io::{BufWriter, Write};
use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::templates::{make_apr, make_ft, make_mlm, make_oci, parse_ft_answer};
use super::{PromptRecord, RecordMeta};
use crate::affordance::{sample_pixels, DEFAULT_SAMPLE_COUNT};
use crate::control::{run_manipulation, AiaConfig, EpisodeTrace};
use crate::harness::{episode_ids, rebuild_episode, setup_episode, EpisodeSpec, INITIAL_THRESHOLD};
use crate::policy::propose_normal_oracle;
use crate::render::{export::shaded_image, pixel_to_3d, DEFAULT_RESOLUTION};
use crate::scene::{point_jacobian, Category};
use crate::{Error, Result};

/// Episodes simulated in parallel before their records are handed on.
const CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub categories: Vec<Category>,
    /// Attempts per category; only successes produce records.
    pub episodes_per_category: usize,
    pub seed: u64,
    pub resolution: [u32; 2],
    pub aia: AiaConfig,
    /// Positives (and negatives) per affordance question.
    pub sample_count: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            categories: Category::ALL.to_vec(),
            episodes_per_category: 10,
            seed: 0,
            resolution: [DEFAULT_RESOLUTION.0, DEFAULT_RESOLUTION.1],
            aia: AiaConfig::default(),
            sample_count: DEFAULT_SAMPLE_COUNT,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectSummary {
    pub attempted: usize,
    pub succeeded: usize,
    /// Episodes dropped because of a simulator or sampling error.
    pub errors: usize,
    pub records: usize,
}

/// The four records of one successful episode and its image.
#[derive(Debug, Clone)]
pub struct CollectedEpisode {
    pub episode_id: u64,
    pub records: Vec<PromptRecord>,
    pub image: GrayImage,
}

fn image_name(episode_id: u64) -> String {
    format!("images/{episode_id}.png")
}

/// Runs one oracle episode. `Ok(None)` when the manipulation fails or the
/// pose is not a pulling primitive.
pub fn collect_episode(
    category: Category,
    episode_id: u64,
    cfg: &CollectConfig,
) -> Result<Option<CollectedEpisode>> {
    let ep = setup_episode(category, episode_id, cfg.seed, cfg.resolution)?;
    let spec = ep.spec;
    let proposal = propose_normal_oracle(&ep.obj, &ep.view, spec.target_joint, spec.policy_seed())?;
    let pose = proposal.pose;

    // The part must move roughly along the pull (-forward).
    let motion = point_jacobian(&ep.obj, spec.target_joint, &pose.contact_3d);
    if motion.dot(&-pose.forward_dir) <= 0.0 {
        return Ok(None);
    }
    let trace = run_manipulation(
        &ep.obj,
        &ep.view,
        &pose,
        spec.target_joint,
        &cfg.aia,
        spec.control_seed(),
    )?;
    if trace.displacement <= INITIAL_THRESHOLD {
        return Ok(None);
    }

    let amap = ep.affordance()?;
    let sample = sample_pixels(
        &amap,
        &ep.view,
        &ep.obj,
        cfg.sample_count,
        spec.sample_seed(),
    )?;
    let meta = RecordMeta {
        category: Some(category),
        joint_kind: Some(ep.obj.joints[spec.target_joint].kind),
        target_joint: Some(spec.target_joint),
        object_seed: Some(spec.object_seed),
        camera_seed: Some(spec.camera_seed),
        episode_seed: Some(spec.episode_seed),
        resolution: Some(spec.resolution),
        ..RecordMeta::default()
    };
    let records = [
        make_oci(category),
        make_apr(&sample)?,
        make_mlm(&pose, spec.mask_seed()),
        make_ft(&pose),
    ]
    .into_iter()
    .map(|mut r| {
        r.episode_id = episode_id;
        r.image = image_name(episode_id);
        r.meta = RecordMeta {
            loss_bearing: r.meta.loss_bearing,
            masked: r.meta.masked,
            ..meta.clone()
        };
        r
    })
    .collect();
    Ok(Some(CollectedEpisode {
        episode_id,
        records,
        image: shaded_image(&ep.view),
    }))
}

/// Runs every episode and hands successful ones to `sink` in episode-id
/// order. Per-episode simulator errors are logged and skipped; errors from
/// `sink` abort the run.
pub fn collect_dataset(
    cfg: &CollectConfig,
    mut sink: impl FnMut(CollectedEpisode) -> Result<()>,
) -> Result<CollectSummary> {
    cfg.aia.validate()?;
    let ids = episode_ids(&cfg.categories, cfg.episodes_per_category);
    let mut summary = CollectSummary::default();
    for chunk in ids.chunks(CHUNK) {
        let outcomes: Vec<_> = chunk
            .par_iter()
            .map(|&(cat, id)| (id, collect_episode(cat, id, cfg)))
            .collect();
        for (id, outcome) in outcomes {
            summary.attempted += 1;
            match outcome {
                Ok(Some(ep)) => {
                    summary.succeeded += 1;
                    summary.records += ep.records.len();
                    sink(ep)?;
                }
                Ok(None) => {}
                Err(e) => {
                    log::warn!("episode {id} skipped: {e}");
                    summary.errors += 1;
                }
            }
        }
    }
    Ok(summary)
}

/// Writes the JSONL file at `jsonl` and one PNG per episode under
/// `images/` next to it.
pub fn write_dataset(cfg: &CollectConfig, jsonl: &Path) -> Result<CollectSummary> {
    let root = jsonl.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(root.join("images"))?;
    let mut out = BufWriter::new(std::fs::File::create(jsonl)?);
    let summary = collect_dataset(cfg, |ep| {
        for r in &ep.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        ep.image.save(root.join(image_name(ep.episode_id)))?;
        Ok(())
    })?;
    out.flush()?;
    Ok(summary)
}

/// Rebuilds the episode behind a pose record, reads the pose back from its
/// answer string and runs it again.
pub fn replay_ft_record(record: &PromptRecord, cfg: &AiaConfig) -> Result<EpisodeTrace> {
    let m = &record.meta;
    let missing = |what: &str| Error::Parse(format!("record meta lacks {what}"));
    let spec = EpisodeSpec {
        episode_id: record.episode_id,
        category: m.category.ok_or_else(|| missing("category"))?,
        episode_seed: m.episode_seed.ok_or_else(|| missing("episode_seed"))?,
        object_seed: m.object_seed.ok_or_else(|| missing("object_seed"))?,
        camera_seed: m.camera_seed.ok_or_else(|| missing("camera_seed"))?,
        target_joint: m.target_joint.ok_or_else(|| missing("target_joint"))?,
        resolution: m.resolution.ok_or_else(|| missing("resolution"))?,
    };
    let ep = rebuild_episode(&spec)?;
    let text = parse_ft_answer(&record.answer)?;
    let (x, y) = text.contact_px;
    let pose = text.to_pose(pixel_to_3d(&ep.view, x, y)?)?;
    run_manipulation(
        &ep.obj,
        &ep.view,
        &pose,
        spec.target_joint,
        cfg,
        spec.control_seed(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{validate_record, Task};

    fn small(categories: Vec<Category>, n: usize) -> CollectConfig {
        CollectConfig {
            categories,
            episodes_per_category: n,
            seed: 4,
            resolution: [96, 96],
            ..Default::default()
        }
    }

    fn gather(cfg: &CollectConfig) -> (CollectSummary, Vec<PromptRecord>) {
        let mut all = Vec::new();
        let s = collect_dataset(cfg, |ep| {
            all.extend(ep.records);
            Ok(())
        })
        .unwrap();
        (s, all)
    }

    #[test]
    fn zero_episodes_is_empty() {
        let (s, recs) = gather(&small(vec![Category::Door], 0));
        assert_eq!(s, CollectSummary::default());
        assert!(recs.is_empty());
    }

    #[test]
    fn four_records_per_success_sharing_an_id() {
        let (s, recs) = gather(&small(vec![Category::Drawer, Category::Door], 4));
        assert_eq!(s.attempted, 8);
        assert!(s.succeeded > 0);
        assert_eq!(recs.len(), 4 * s.succeeded);
        for group in recs.chunks(4) {
            let tasks: Vec<Task> = group.iter().map(|r| r.task).collect();
            assert_eq!(tasks, vec![Task::Oci, Task::Apr, Task::Mlm, Task::Ft]);
            assert!(group.iter().all(|r| r.episode_id == group[0].episode_id));
            assert!(group
                .iter()
                .all(|r| r.image == format!("images/{}.png", r.episode_id)));
            for r in group {
                validate_record(r).unwrap();
            }
        }
    }

    #[test]
    fn emitted_poses_replay_to_success() {
        let (_, recs) = gather(&small(
            vec![Category::Drawer, Category::Laptop, Category::Safe],
            4,
        ));
        for r in recs.iter().filter(|r| r.task == Task::Ft) {
            let t = replay_ft_record(r, &AiaConfig::default()).unwrap();
            assert!(t.displacement > INITIAL_THRESHOLD);
        }
    }

    #[test]
    fn writes_jsonl_and_images_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(vec![Category::Drawer], 3);
        let a = dir.path().join("a/data.jsonl");
        let b = dir.path().join("b/data.jsonl");
        std::fs::create_dir_all(a.parent().unwrap()).unwrap();
        std::fs::create_dir_all(b.parent().unwrap()).unwrap();
        let s = write_dataset(&cfg, &a).unwrap();
        write_dataset(&cfg, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text.lines().count(), s.records);
        for line in text.lines() {
            let r: PromptRecord = serde_json::from_str(line).unwrap();
            assert!(a.parent().unwrap().join(&r.image).exists());
        }
    }
}
