//! Versioned JSON scene documents.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "category": "door",
//!   "base_pose": { "translation": [x, y, z], "rotation_xyzw": [i, j, k, w] },
//!   "parts": [
//!     { "part_id": 0, "movable": false, "joint": null, "handle": null,
//!       "triangles": [ax, ay, az, bx, by, bz, cx, cy, cz, ...] }
//!   ],
//!   "joints": [
//!     { "kind": "REVOLUTE", "axis_origin": [..], "axis_direction": [..],
//!       "limits": [lo, hi], "value": v }
//!   ]
//! }
//! ```

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{ArticulatedObject, Category, JointKind, JointSpec, PartGeometry, Triangle};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub schema_version: u32,
    pub category: String,
    pub base_pose: PoseDoc,
    pub parts: Vec<PartDoc>,
    pub joints: Vec<JointDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseDoc {
    pub translation: [f64; 3],
    pub rotation_xyzw: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartDoc {
    pub part_id: i32,
    pub movable: bool,
    pub joint: Option<usize>,
    pub handle: Option<[f64; 3]>,
    pub triangles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDoc {
    pub kind: JointKind,
    pub axis_origin: [f64; 3],
    pub axis_direction: [f64; 3],
    pub limits: [f64; 2],
    pub value: f64,
}

impl From<&ArticulatedObject> for SceneDocument {
    fn from(obj: &ArticulatedObject) -> Self {
        let t = obj.base_pose.translation.vector;
        let q = obj.base_pose.rotation.coords;
        SceneDocument {
            schema_version: SCHEMA_VERSION,
            category: obj.category.to_string(),
            base_pose: PoseDoc {
                translation: [t.x, t.y, t.z],
                rotation_xyzw: [q.x, q.y, q.z, q.w],
            },
            parts: obj
                .parts
                .iter()
                .map(|p| PartDoc {
                    part_id: p.part_id,
                    movable: p.movable,
                    joint: p.joint,
                    handle: p.handle.map(|h| [h.x, h.y, h.z]),
                    triangles: p
                        .triangles
                        .iter()
                        .flat_map(|t| t.vertices.iter().flat_map(|v| [v.x, v.y, v.z]))
                        .collect(),
                })
                .collect(),
            joints: obj
                .joints
                .iter()
                .map(|j| JointDoc {
                    kind: j.kind,
                    axis_origin: j.axis_origin.coords.into(),
                    axis_direction: j.axis_direction.into_inner().into(),
                    limits: j.limits,
                    value: j.value,
                })
                .collect(),
        }
    }
}

impl TryFrom<SceneDocument> for ArticulatedObject {
    type Error = Error;

    fn try_from(doc: SceneDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion(doc.schema_version));
        }
        let category: Category = doc.category.parse()?;
        let [x, y, z, w] = doc.base_pose.rotation_xyzw;
        let base_pose = Isometry3::from_parts(
            Translation3::from(Vector3::from(doc.base_pose.translation)),
            UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        );
        let parts = doc
            .parts
            .into_iter()
            .map(|p| {
                if p.triangles.len() % 9 != 0 {
                    return Err(Error::Parse(format!(
                        "part {} triangle array length {} is not a multiple of 9",
                        p.part_id,
                        p.triangles.len()
                    )));
                }
                let triangles = p
                    .triangles
                    .chunks_exact(9)
                    .map(|c| {
                        Triangle::new(
                            Point3::new(c[0], c[1], c[2]),
                            Point3::new(c[3], c[4], c[5]),
                            Point3::new(c[6], c[7], c[8]),
                        )
                    })
                    .collect();
                Ok(PartGeometry {
                    part_id: p.part_id,
                    triangles,
                    movable: p.movable,
                    joint: p.joint,
                    handle: p.handle.map(Point3::from),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let joints = doc
            .joints
            .into_iter()
            .map(|j| {
                let axis = Vector3::from(j.axis_direction);
                if (axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParams("joint axis is not unit length".into()));
                }
                let mut spec = JointSpec::new(j.kind, Point3::from(j.axis_origin), axis, j.limits);
                spec.value = j.value;
                Ok(spec)
            })
            .collect::<Result<Vec<_>>>()?;
        let obj = ArticulatedObject {
            category,
            parts,
            joints,
            base_pose,
        };
        obj.validate()?;
        Ok(obj)
    }
}

pub fn to_json(obj: &ArticulatedObject) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SceneDocument::from(obj))?)
}

pub fn from_json(text: &str) -> Result<ArticulatedObject> {
    let doc: SceneDocument = serde_json::from_str(text)?;
    doc.try_into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_object, SizeRanges};

    #[test]
    fn round_trip_preserves_object() {
        for c in Category::ALL {
            let obj = build_object(c, 5, &SizeRanges::default()).unwrap();
            let back = from_json(&to_json(&obj).unwrap()).unwrap();
            assert_eq!(back.category, obj.category);
            assert_eq!(back.joints, obj.joints);
            assert_eq!(back.parts, obj.parts);
        }
    }

    #[test]
    fn rejects_other_versions_and_bad_arrays() {
        let obj = build_object(Category::Drawer, 1, &SizeRanges::default()).unwrap();
        let mut doc = SceneDocument::from(&obj);
        doc.schema_version = 2;
        assert!(matches!(
            ArticulatedObject::try_from(doc),
            Err(Error::SchemaVersion(2))
        ));

        let mut doc = SceneDocument::from(&obj);
        doc.parts[0].triangles.pop();
        assert!(matches!(
            ArticulatedObject::try_from(doc),
            Err(Error::Parse(_))
        ));

        let mut doc = SceneDocument::from(&obj);
        doc.category = "toaster".into();
        assert!(matches!(
            ArticulatedObject::try_from(doc),
            Err(Error::UnknownCategory(_))
        ));
    }
}
