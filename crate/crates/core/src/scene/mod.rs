//! Procedural articulated objects and their kinematics.
//!
//! Part triangles are stored in the object frame at the zero joint
//! configuration. A movable part is carried by exactly one joint; its world
//! placement is `base_pose * joint_motion(q)`. Fixed parts are placed by
//! `base_pose` alone.

mod catalog;
pub mod io;
mod mesh;

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use catalog::{build_object, Category, SizeRanges};
pub use mesh::{cuboid, Aabb, Triangle};

/// Tolerance used when checking joint values against their limits.
pub const LIMIT_TOL: f64 = 1e-12;

/// Maximum point-to-triangle distance accepted by [`surface_normal`].
pub const SURFACE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

impl JointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JointKind::Revolute => "REVOLUTE",
            JointKind::Prismatic => "PRISMATIC",
        }
    }
}

/// One degree of freedom. Revolute values are radians, prismatic values meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub kind: JointKind,
    pub axis_origin: Point3<f64>,
    pub axis_direction: Unit<Vector3<f64>>,
    pub limits: [f64; 2],
    pub value: f64,
}

impl JointSpec {
    pub fn new(
        kind: JointKind,
        axis_origin: Point3<f64>,
        axis_direction: Vector3<f64>,
        limits: [f64; 2],
    ) -> Self {
        Self {
            kind,
            axis_origin,
            axis_direction: Unit::new_normalize(axis_direction),
            limits,
            value: limits[0],
        }
    }

    pub fn within_limits(&self, value: f64) -> bool {
        value >= self.limits[0] - LIMIT_TOL && value <= self.limits[1] + LIMIT_TOL
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.limits[0], self.limits[1])
    }

    /// Rigid motion of the attached part, in the object frame, at `value`.
    pub fn motion(&self, value: f64) -> Isometry3<f64> {
        match self.kind {
            JointKind::Revolute => {
                let to_origin = Translation3::from(self.axis_origin.coords);
                let rot = UnitQuaternion::from_axis_angle(&self.axis_direction, value);
                Isometry3::from_parts(to_origin, UnitQuaternion::identity())
                    * Isometry3::from_parts(Translation3::identity(), rot)
                    * Isometry3::from_parts(to_origin.inverse(), UnitQuaternion::identity())
            }
            JointKind::Prismatic => Isometry3::from_parts(
                Translation3::from(self.axis_direction.into_inner() * value),
                UnitQuaternion::identity(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartGeometry {
    pub part_id: i32,
    pub triangles: Vec<Triangle>,
    pub movable: bool,
    pub joint: Option<usize>,
    /// Handle-like feature on the part, object frame at zero configuration.
    pub handle: Option<Point3<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticulatedObject {
    pub category: Category,
    pub parts: Vec<PartGeometry>,
    pub joints: Vec<JointSpec>,
    pub base_pose: Isometry3<f64>,
}

/// Triangle placed in the world, tagged with its owning part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosedTriangle {
    pub triangle: Triangle,
    pub part_id: i32,
    pub part_index: usize,
}

impl ArticulatedObject {
    /// Current joint values stored on the joints.
    pub fn joint_values(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.value).collect()
    }

    pub fn joint(&self, index: usize) -> Result<&JointSpec> {
        self.joints.get(index).ok_or(Error::NoSuchJoint(index))
    }

    pub fn part_index(&self, part_id: i32) -> Option<usize> {
        self.parts.iter().position(|p| p.part_id == part_id)
    }

    pub fn part_by_id(&self, part_id: i32) -> Option<&PartGeometry> {
        self.parts.iter().find(|p| p.part_id == part_id)
    }

    /// Index of the part driven by `joint`.
    pub fn part_of_joint(&self, joint: usize) -> Option<usize> {
        self.parts.iter().position(|p| p.joint == Some(joint))
    }

    pub fn check_joint_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.joints.len() {
            return Err(Error::JointCount {
                expected: self.joints.len(),
                got: values.len(),
            });
        }
        for (i, (j, &v)) in self.joints.iter().zip(values).enumerate() {
            if !v.is_finite() || !j.within_limits(v) {
                return Err(Error::JointLimit {
                    joint: i,
                    value: v,
                    min: j.limits[0],
                    max: j.limits[1],
                });
            }
        }
        Ok(())
    }

    /// World placement of part `part_index`. Does not check limits.
    pub fn part_pose(&self, part_index: usize, values: &[f64]) -> Isometry3<f64> {
        match self.parts[part_index].joint {
            Some(j) => self.base_pose * self.joints[j].motion(values[j]),
            None => self.base_pose,
        }
    }

    /// Bounding box of the posed object.
    pub fn bounds(&self, values: &[f64]) -> Aabb {
        let mut bb = Aabb::empty();
        for (i, part) in self.parts.iter().enumerate() {
            let pose = self.part_pose(i, values);
            for t in &part.triangles {
                for v in &t.vertices {
                    bb.grow(&(pose * v));
                }
            }
        }
        bb
    }

    /// Structural invariants: unit axes, values in limits, one joint per
    /// movable part, non-degenerate triangles.
    pub fn validate(&self) -> Result<()> {
        for (i, j) in self.joints.iter().enumerate() {
            if (j.axis_direction.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "joint {i} axis is not unit length"
                )));
            }
            if j.limits[0] > j.limits[1] {
                return Err(Error::InvalidParams(format!("joint {i} has empty limits")));
            }
            let owners = self.parts.iter().filter(|p| p.joint == Some(i)).count();
            if owners != 1 {
                return Err(Error::InvalidParams(format!(
                    "joint {i} drives {owners} parts, expected 1"
                )));
            }
        }
        self.check_joint_values(&self.joint_values())?;
        for p in &self.parts {
            if p.movable != p.joint.is_some() {
                return Err(Error::InvalidParams(format!(
                    "part {} movable flag disagrees with joint",
                    p.part_id
                )));
            }
            if let Some(j) = p.joint {
                if j >= self.joints.len() {
                    return Err(Error::NoSuchJoint(j));
                }
            }
            if p.triangles.iter().any(|t| t.area() <= 1e-12) {
                return Err(Error::InvalidParams(format!(
                    "part {} has a degenerate triangle",
                    p.part_id
                )));
            }
        }
        Ok(())
    }
}

/// Places every triangle of `obj` in the world at `values`.
pub fn forward_kinematics(obj: &ArticulatedObject, values: &[f64]) -> Result<Vec<PosedTriangle>> {
    obj.check_joint_values(values)?;
    let mut out = Vec::with_capacity(obj.parts.iter().map(|p| p.triangles.len()).sum());
    for (i, part) in obj.parts.iter().enumerate() {
        let pose = obj.part_pose(i, values);
        out.extend(part.triangles.iter().map(|t| PosedTriangle {
            triangle: t.transformed(&pose),
            part_id: part.part_id,
            part_index: i,
        }));
    }
    Ok(out)
}

/// Outward face normal of the part triangle containing `point`.
///
/// When the point lies on a shared edge the lowest-index triangle wins.
pub fn surface_normal(
    obj: &ArticulatedObject,
    values: &[f64],
    part_id: i32,
    point: &Point3<f64>,
) -> Result<Vector3<f64>> {
    obj.check_joint_values(values)?;
    let index = obj
        .part_index(part_id)
        .ok_or(Error::NotOnSurface { part_id })?;
    let pose = obj.part_pose(index, values);
    let local = pose.inverse_transform_point(point);
    obj.parts[index]
        .triangles
        .iter()
        .find(|t| t.distance_to(&local) < SURFACE_TOL)
        .map(|t| pose.rotation * t.normal())
        .ok_or(Error::NotOnSurface { part_id })
}

/// World-frame velocity of a material point per unit joint rate,
/// i.e. the column of the contact Jacobian for `joint`.
pub fn point_jacobian(
    obj: &ArticulatedObject,
    joint: usize,
    world_point: &Point3<f64>,
) -> Vector3<f64> {
    let spec = &obj.joints[joint];
    let axis = obj.base_pose.rotation * spec.axis_direction.into_inner();
    match spec.kind {
        JointKind::Prismatic => axis,
        JointKind::Revolute => {
            // Joints are not chained, so the axis line never moves.
            let origin = obj.base_pose * spec.axis_origin;
            axis.cross(&(world_point - origin))
        }
    }
}
