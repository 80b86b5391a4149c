//! Parametric generators, one per object category.
//!
//! Every object is built around the world origin with +z up and its
//! operable side facing +x. Overall extent is roughly one meter so that a
//! camera 4.5 to 5.5 m away keeps the whole object in frame.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Isometry3, Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mesh::{cuboid, Triangle};
use super::{ArticulatedObject, JointKind, JointSpec, PartGeometry};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    Door,
    Drawer,
    LidBox,
    Pliers,
    Laptop,
    Trashcan,
    Safe,
    KettleLid,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Door,
        Category::Drawer,
        Category::LidBox,
        Category::Pliers,
        Category::Laptop,
        Category::Trashcan,
        Category::Safe,
        Category::KettleLid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Door => "door",
            Category::Drawer => "drawer",
            Category::LidBox => "lid-box",
            Category::Pliers => "pliers",
            Category::Laptop => "laptop",
            Category::Trashcan => "trashcan",
            Category::Safe => "safe",
            Category::KettleLid => "kettle-lid",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

impl TryFrom<String> for Category {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.as_str().to_string()
    }
}

/// Size randomization ranges, as closed intervals `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRanges {
    /// Uniform scale applied to every dimension.
    pub scale: [f64; 2],
    /// Width-to-height stretch.
    pub aspect: [f64; 2],
}

impl Default for SizeRanges {
    fn default() -> Self {
        Self {
            scale: [0.85, 1.15],
            aspect: [0.8, 1.2],
        }
    }
}

impl SizeRanges {
    fn check(&self) -> Result<()> {
        for (name, [lo, hi]) in [("scale", self.scale), ("aspect", self.aspect)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::InvalidParams(format!(
                    "{name} range [{lo}, {hi}] is empty"
                )));
            }
        }
        Ok(())
    }
}

struct Dims {
    s: f64,
    a: f64,
}

impl Dims {
    fn sample(ranges: &SizeRanges, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut draw = |[lo, hi]: [f64; 2]| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        let s = draw(ranges.scale);
        let a = draw(ranges.aspect);
        Self { s, a }
    }
}

/// Builds a closed (all joints at their lower limit) instance of `category`.
/// Deterministic in `(category, seed, ranges)`.
pub fn build_object(
    category: Category,
    seed: u64,
    ranges: &SizeRanges,
) -> Result<ArticulatedObject> {
    ranges.check()?;
    let d = Dims::sample(ranges, seed);
    let mut b = Builder::default();
    match category {
        Category::Door => hinged_front(&mut b, &d, 0.8, 1.0, 0.4, 0.03, 1.9),
        Category::Safe => hinged_front(&mut b, &d, 0.7, 0.7, 0.7, 0.06, 1.6),
        Category::Drawer => drawer(&mut b, &d),
        Category::LidBox => top_lid(&mut b, &d, [0.6, 0.8, 0.5], 0.04, 1.0, 1.8),
        Category::Trashcan => top_lid(&mut b, &d, [0.5, 0.5, 0.9], 0.05, 1.0, 1.7),
        Category::KettleLid => top_lid(&mut b, &d, [0.5, 0.5, 0.6], 0.03, 0.55, 1.6),
        Category::Laptop => top_lid(&mut b, &d, [0.6, 0.8, 0.03], 0.02, 1.0, 2.0),
        Category::Pliers => pliers(&mut b, &d),
    }
    let obj = ArticulatedObject {
        category,
        parts: b.parts,
        joints: b.joints,
        base_pose: Isometry3::identity(),
    };
    obj.validate()?;
    Ok(obj)
}

#[derive(Default)]
struct Builder {
    parts: Vec<PartGeometry>,
    joints: Vec<JointSpec>,
}

impl Builder {
    fn fixed(&mut self, triangles: Vec<Triangle>) {
        let part_id = self.parts.len() as i32;
        self.parts.push(PartGeometry {
            part_id,
            triangles,
            movable: false,
            joint: None,
            handle: None,
        });
    }

    fn movable(&mut self, triangles: Vec<Triangle>, joint: JointSpec, handle: Point3<f64>) {
        let part_id = self.parts.len() as i32;
        self.joints.push(joint);
        self.parts.push(PartGeometry {
            part_id,
            triangles,
            movable: true,
            joint: Some(self.joints.len() - 1),
            handle: Some(handle),
        });
    }
}

/// Cabinet body with a vertically hinged front door (doors, safes).
fn hinged_front(
    b: &mut Builder,
    d: &Dims,
    width: f64,
    height: f64,
    depth: f64,
    thick: f64,
    max_open: f64,
) {
    let w = width * d.s * d.a;
    let h = height * d.s;
    let depth = depth * d.s;
    b.fixed(cuboid([-depth, -w / 2.0, 0.0], [0.0, w / 2.0, h]));

    // Handle near the free (+y) edge, protruding from the front face.
    let hy = w / 2.0 - 0.08 * d.s;
    let hz = h / 2.0;
    let mut panel = cuboid([0.0, -w / 2.0, 0.0], [thick, w / 2.0, h]);
    panel.extend(cuboid(
        [thick, hy - 0.015, hz - 0.08],
        [thick + 0.04, hy + 0.015, hz + 0.08],
    ));
    // Rotating about -z swings the free edge toward +x.
    let hinge = JointSpec::new(
        JointKind::Revolute,
        Point3::new(0.0, -w / 2.0, 0.0),
        -Vector3::z(),
        [0.0, max_open],
    );
    b.movable(panel, hinge, Point3::new(thick + 0.04, hy, hz));
}

fn drawer(b: &mut Builder, d: &Dims) {
    let w = 0.8 * d.s * d.a;
    let h = 0.8 * d.s;
    let depth = 0.5 * d.s;
    b.fixed(cuboid([-depth, -w / 2.0, 0.0], [0.0, w / 2.0, h]));

    let (y0, y1) = (-w / 2.0 + 0.04, w / 2.0 - 0.04);
    let (z0, z1) = (0.55 * h, 0.95 * h);
    let zc = 0.5 * (z0 + z1);
    let mut front = cuboid([0.0, y0, z0], [0.03, y1, z1]);
    front.extend(cuboid(
        [0.03, -0.12 * d.s, zc - 0.015],
        [0.06, 0.12 * d.s, zc + 0.015],
    ));
    let slide = JointSpec::new(
        JointKind::Prismatic,
        Point3::new(0.0, 0.0, zc),
        Vector3::x(),
        [0.0, 0.8 * depth],
    );
    b.movable(front, slide, Point3::new(0.06, 0.0, zc));
}

/// Box body with a lid hinged along its back top edge. `coverage` is the
/// fraction of the top covered by the lid (kettles have a small lid).
fn top_lid(b: &mut Builder, d: &Dims, body: [f64; 3], thick: f64, coverage: f64, max_open: f64) {
    let dx = body[0] * d.s;
    let wy = body[1] * d.s * d.a;
    let hz = body[2] * d.s;
    b.fixed(cuboid(
        [-dx / 2.0, -wy / 2.0, 0.0],
        [dx / 2.0, wy / 2.0, hz],
    ));

    let lx = dx * coverage;
    let ly = wy * coverage;
    let back = -lx / 2.0;
    let lid = cuboid([back, -ly / 2.0, hz], [lx / 2.0, ly / 2.0, hz + thick]);
    // Rotating about -y lifts the front (+x) edge.
    let hinge = JointSpec::new(
        JointKind::Revolute,
        Point3::new(back, 0.0, hz),
        -Vector3::y(),
        [0.0, max_open],
    );
    b.movable(lid, hinge, Point3::new(lx / 2.0, 0.0, hz + thick));
}

/// Pliers lying flat: a fixed pivot hub and two crossed handles that swing
/// apart in opposite senses about the vertical pivot axis.
fn pliers(b: &mut Builder, d: &Dims) {
    let s = d.s;
    let len = 0.7 * s * d.a;
    b.fixed(cuboid(
        [-0.05 * s, -0.05 * s, 0.0],
        [0.05 * s, 0.05 * s, 0.05 * s],
    ));
    let pivot = Point3::new(0.0, 0.0, 0.0);
    for (sign, axis) in [(1.0, Vector3::z()), (-1.0, -Vector3::z())] {
        let (ylo, yhi) = if sign > 0.0 {
            (0.01, 0.08)
        } else {
            (-0.08, -0.01)
        };
        let mut arm = cuboid(
            [0.05 * s, ylo * s, 0.0],
            [0.05 * s + len, yhi * s, 0.04 * s],
        );
        // Jaw on the opposite side of the pivot.
        arm.extend(cuboid(
            [-0.3 * s, -yhi * s, 0.0],
            [-0.05 * s, -ylo * s, 0.04 * s],
        ));
        let joint = JointSpec::new(JointKind::Revolute, pivot, axis, [0.0, 0.6]);
        b.movable(
            arm,
            joint,
            Point3::new(0.05 * s + 0.8 * len, 0.045 * sign * s, 0.04 * s),
        );
    }
}
