//! Fine-tuning records: category identification (OCI), affordance prior
//! reasoning (APR), masked language modeling (MLM) and pose fine-tuning (FT).

pub mod codec;
mod collect;
pub mod templates;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::scene::{Category, JointKind};
use crate::{Error, Result};

pub use codec::{decode_direction, encode_direction, DirectionCode};
pub use collect::{
    collect_dataset, collect_episode, replay_ft_record, write_dataset, CollectConfig,
    CollectSummary, CollectedEpisode,
};
pub use templates::{
    make_apr, make_assessment, make_ft, make_mlm, make_oci, parse_apr_answer, parse_apr_prompt,
    parse_ft_answer, parse_mlm_prompt, parse_oci_answer, validate_record, MaskField, PoseText,
};

/// End-effector pose: contact pixel, its 3D point, and the gripper's up and
/// forward unit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipPose {
    pub contact_px: (u32, u32),
    pub contact_3d: Point3<f64>,
    pub up_dir: Vector3<f64>,
    pub forward_dir: Vector3<f64>,
}

impl ManipPose {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("up", &self.up_dir), ("forward", &self.forward_dir)] {
            if (v.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParams(format!(
                    "{name} direction is not unit length"
                )));
            }
        }
        if self.up_dir.dot(&self.forward_dir).abs() >= 0.999 {
            return Err(Error::InvalidParams(
                "up and forward directions are parallel".into(),
            ));
        }
        Ok(())
    }

    /// Pose with both directions replaced by their codec round-trip,
    /// renormalized: exactly what a pose answer string describes.
    pub fn quantized(&self) -> Result<Self> {
        PoseText::from_pose(self).to_pose(self.contact_3d)
    }
}

impl PoseText {
    /// Rebuilds a pose from parsed text and the 3D point seen at its pixel.
    pub fn to_pose(&self, contact_3d: Point3<f64>) -> Result<ManipPose> {
        let unit = |c: &DirectionCode| {
            c.to_unit()
                .ok_or_else(|| Error::Parse("direction decodes to the zero vector".into()))
        };
        let pose = ManipPose {
            contact_px: self.contact_px,
            contact_3d,
            up_dir: unit(&self.up)?,
            forward_dir: unit(&self.forward)?,
        };
        pose.validate()?;
        Ok(pose)
    }
}

/// A unit vector orthogonal to `forward`: `forward x z`, or world +x when
/// `forward` is vertical.
pub fn up_from_forward(forward: &Vector3<f64>) -> Vector3<f64> {
    let c = forward.cross(&Vector3::z());
    if c.norm() < 1e-9 {
        Vector3::x()
    } else {
        c.normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "OCI")]
    Oci,
    #[serde(rename = "APR")]
    Apr,
    #[serde(rename = "MLM")]
    Mlm,
    #[serde(rename = "FT")]
    Ft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub category: Option<Category>,
    pub joint_kind: Option<JointKind>,
    pub target_joint: Option<usize>,
    pub object_seed: Option<u64>,
    pub camera_seed: Option<u64>,
    pub episode_seed: Option<u64>,
    /// False for samples that supervise nothing (category questions).
    pub loss_bearing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked: Option<MaskField>,
    /// Render resolution `[width, height]` of the episode image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[u32; 2]>,
}

impl Default for RecordMeta {
    fn default() -> Self {
        Self {
            category: None,
            joint_kind: None,
            target_joint: None,
            object_seed: None,
            camera_seed: None,
            episode_seed: None,
            loss_bearing: true,
            masked: None,
            resolution: None,
        }
    }
}

/// One JSONL line of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub task: Task,
    pub prompt: String,
    pub answer: String,
    pub episode_id: u64,
    pub image: String,
    pub meta: RecordMeta,
}

impl PromptRecord {
    pub fn new(task: Task, prompt: String, answer: String) -> Self {
        Self {
            task,
            prompt,
            answer,
            episode_id: 0,
            image: String::new(),
            meta: RecordMeta::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn up_is_orthogonal_and_unit() {
        for f in [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.3, -0.4, 0.866).normalize(),
            Vector3::new(0.0, 0.0, -1.0),
        ] {
            let u = up_from_forward(&f);
            assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-12);
            assert!(u.dot(&f).abs() < 1e-12);
        }
        assert_eq!(up_from_forward(&Vector3::z()), Vector3::x());
    }

    #[test]
    fn quantized_pose_matches_its_text() {
        let pose = ManipPose {
            contact_px: (4, 9),
            contact_3d: Point3::new(0.0, 1.0, 2.0),
            up_dir: Vector3::new(0.0, 0.6, 0.8),
            forward_dir: Vector3::new(0.8, -0.36, 0.48),
        };
        let q = pose.quantized().unwrap();
        assert_eq!(PoseText::from_pose(&q), PoseText::from_pose(&pose));
        assert_eq!(q.quantized().unwrap(), q);
        assert_relative_eq!(q.forward_dir.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_directions_rejected() {
        let pose = ManipPose {
            contact_px: (0, 0),
            contact_3d: Point3::origin(),
            up_dir: Vector3::x(),
            forward_dir: Vector3::x(),
        };
        assert!(pose.validate().is_err());
    }

    #[test]
    fn record_json_field_names() {
        let r = make_oci(Category::Safe);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        for k in ["task", "prompt", "answer", "episode_id", "image", "meta"] {
            assert!(keys.contains(&k.to_string()), "{k}");
        }
        assert_eq!(v["task"], "OCI");
        assert_eq!(v["meta"]["category"], "safe");
    }
}
