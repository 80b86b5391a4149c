//! Pinhole camera and ray-cast rendering of depth, part-ID and 3D position
//! buffers.
//!
//! Camera frame convention: +z forward, +x right, +y down. Pixel `(x, y)`
//! casts a ray through image coordinate `(x, y)` exactly, so the principal
//! point pixel looks straight down the optical axis. Depth is the camera-frame
//! z of the hit, in meters.

pub mod export;
mod raycast;

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scene::{forward_kinematics, Aabb, ArticulatedObject, PosedTriangle};
use crate::{seed, Error, Result};

pub use raycast::intersect;

pub const DEFAULT_RESOLUTION: (u32, u32) = (336, 336);

/// Camera distance range from the object center, in meters.
pub const CAMERA_DISTANCE: [f64; 2] = [4.5, 5.5];
/// Camera altitude range above the horizontal plane, in degrees.
pub const CAMERA_ALTITUDE_DEG: [f64; 2] = [30.0, 60.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Narrow field of view sized for a ~1 m object seen from ~5 m.
    pub fn for_resolution(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            focal: 2.5 * f64::from(width.min(height)),
            cx: f64::from(width / 2),
            cy: f64::from(height / 2),
        }
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self::for_resolution(DEFAULT_RESOLUTION.0, DEFAULT_RESOLUTION.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    /// World to camera transform.
    pub extrinsics: Isometry3<f64>,
    pub distance: f64,
    pub azimuth_deg: f64,
    pub altitude_deg: f64,
}

impl Camera {
    /// Camera at `eye` looking at `target`, world +z up.
    pub fn look_at(intrinsics: Intrinsics, eye: Point3<f64>, target: Point3<f64>) -> Self {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&Vector3::z());
        if right.norm() < 1e-9 {
            right = forward.cross(&Vector3::x());
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            forward.transpose(),
        ]));
        let rot = UnitQuaternion::from_rotation_matrix(&rot);
        let translation = Translation3::from(-(rot * eye.coords));
        let offset = eye - target;
        let distance = offset.norm();
        Self {
            intrinsics,
            extrinsics: Isometry3::from_parts(translation, rot),
            distance,
            azimuth_deg: offset.y.atan2(offset.x).to_degrees().rem_euclid(360.0),
            altitude_deg: (offset.z / distance).asin().to_degrees(),
        }
    }

    /// Camera center in the world frame.
    pub fn eye(&self) -> Point3<f64> {
        self.extrinsics.inverse_transform_point(&Point3::origin())
    }

    /// Unnormalized world-frame ray direction through image point `(u, v)`,
    /// scaled so that the ray parameter equals camera-frame depth.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        let cam = Vector3::new((u - k.cx) / k.focal, (v - k.cy) / k.focal, 1.0);
        self.extrinsics.rotation.inverse_transform_vector(&cam)
    }

    /// Continuous image coordinates and depth of a world point.
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let c = self.extrinsics * p;
        let k = &self.intrinsics;
        (k.focal * c.x / c.z + k.cx, k.focal * c.y / c.z + k.cy, c.z)
    }

    /// World point at image coordinate `(u, v)` and depth `depth`.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        self.eye() + self.ray_direction(u, v) * depth
    }
}

/// Randomized viewpoint around `target`: distance, azimuth and altitude drawn
/// uniformly from their ranges. Deterministic per seed.
pub fn sample_camera(seed: u64, target: Point3<f64>, intrinsics: Intrinsics) -> Camera {
    let mut rng = seed::rng(seed);
    let distance = rng.random_range(CAMERA_DISTANCE[0]..=CAMERA_DISTANCE[1]);
    let azimuth = rng.random_range(0.0..360.0f64).to_radians();
    let altitude = rng
        .random_range(CAMERA_ALTITUDE_DEG[0]..=CAMERA_ALTITUDE_DEG[1])
        .to_radians();
    let eye = target
        + distance
            * Vector3::new(
                altitude.cos() * azimuth.cos(),
                altitude.cos() * azimuth.sin(),
                altitude.sin(),
            );
    Camera::look_at(intrinsics, eye, target)
}

/// Rendered buffers. Row-major, index `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub camera: Camera,
    pub joint_values: Vec<f64>,
    /// Camera-frame depth in meters, 0 on misses.
    pub depth: Vec<f64>,
    /// Part id of the nearest hit, -1 on misses.
    pub part_id: Vec<i32>,
    /// World-frame hit position; origin on misses.
    pub position: Vec<Point3<f64>>,
    /// Index of the hit triangle in forward-kinematics order, -1 on misses.
    pub triangle: Vec<i32>,
    /// Flat-shaded intensity in [0, 1], for inspection only.
    pub shade: Vec<f32>,
}

impl CameraView {
    pub fn width(&self) -> u32 {
        self.camera.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.camera.intrinsics.height
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width() as usize + x as usize
    }

    pub fn pixel(&self, index: usize) -> (u32, u32) {
        let w = self.width() as usize;
        ((index % w) as u32, (index / w) as u32)
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < i64::from(self.width()) && y < i64::from(self.height())
    }

    pub fn part_at(&self, x: u32, y: u32) -> i32 {
        self.part_id[self.index(x, y)]
    }

    /// Pixel indices whose nearest hit belongs to `part_id`.
    pub fn pixels_of_part(&self, part_id: i32) -> Vec<usize> {
        (0..self.part_id.len())
            .filter(|&i| self.part_id[i] == part_id)
            .collect()
    }

    pub fn project(&self, p: &Point3<f64>) -> (f64, f64) {
        let (u, v, _) = self.camera.project(p);
        (u, v)
    }
}

/// 3D world position seen at pixel `(x, y)`.
pub fn pixel_to_3d(view: &CameraView, x: u32, y: u32) -> Result<Point3<f64>> {
    if x >= view.width() || y >= view.height() {
        return Err(Error::NoSurface { x, y });
    }
    let i = view.index(x, y);
    if view.part_id[i] < 0 {
        return Err(Error::NoSurface { x, y });
    }
    Ok(view.position[i])
}

struct PartBounds {
    bounds: Aabb,
    range: std::ops::Range<usize>,
}

/// Nearest-hit ray casting of `obj` posed at `values`. Rows are traced in
/// parallel; ties at equal distance go to the lower triangle index.
pub fn render(obj: &ArticulatedObject, values: &[f64], camera: &Camera) -> Result<CameraView> {
    let posed = forward_kinematics(obj, values)?;
    let groups = group_by_part(&posed);
    let (w, h) = (
        camera.intrinsics.width as usize,
        camera.intrinsics.height as usize,
    );
    let eye = camera.eye();

    let rows: Vec<Vec<Option<(f64, usize)>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let dir = camera.ray_direction(x as f64, y as f64);
                    nearest_hit(&eye, &dir, &posed, &groups)
                })
                .collect()
        })
        .collect();

    let n = w * h;
    let mut view = CameraView {
        camera: *camera,
        joint_values: values.to_vec(),
        depth: vec![0.0; n],
        part_id: vec![-1; n],
        position: vec![Point3::origin(); n],
        triangle: vec![-1; n],
        shade: vec![0.0; n],
    };
    for (y, row) in rows.into_iter().enumerate() {
        for (x, hit) in row.into_iter().enumerate() {
            let Some((t, tri)) = hit else { continue };
            let i = y * w + x;
            let dir = camera.ray_direction(x as f64, y as f64);
            view.depth[i] = t;
            view.part_id[i] = posed[tri].part_id;
            view.position[i] = eye + dir * t;
            view.triangle[i] = tri as i32;
            let facing = posed[tri].triangle.normal().dot(&dir.normalize()).abs();
            view.shade[i] = (0.25 + 0.75 * facing) as f32;
        }
    }
    Ok(view)
}

fn group_by_part(posed: &[PosedTriangle]) -> Vec<PartBounds> {
    let mut groups: Vec<PartBounds> = Vec::new();
    for (i, p) in posed.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if posed[g.range.start].part_index == p.part_index => {
                g.range.end = i + 1;
                for v in &p.triangle.vertices {
                    g.bounds.grow(v);
                }
            }
            _ => groups.push(PartBounds {
                bounds: Aabb::from_triangles([&p.triangle]),
                range: i..i + 1,
            }),
        }
    }
    // Pad so grazing rays are never culled by rounding in the slab test.
    for g in &mut groups {
        g.bounds.min -= Vector3::repeat(1e-9);
        g.bounds.max += Vector3::repeat(1e-9);
    }
    groups
}

fn nearest_hit(
    eye: &Point3<f64>,
    dir: &Vector3<f64>,
    posed: &[PosedTriangle],
    groups: &[PartBounds],
) -> Option<(f64, usize)> {
    let inv = dir.map(|c| 1.0 / c);
    let mut best: Option<(f64, usize)> = None;
    for g in groups {
        let limit = best.map_or(f64::INFINITY, |b| b.0);
        if !g.bounds.hit_by(eye, &inv, limit) {
            continue;
        }
        for i in g.range.clone() {
            if let Some(t) = intersect(eye, dir, &posed[i].triangle) {
                // Strict comparison keeps the lower index on exact ties.
                if best.is_none_or(|b| t < b.0) {
                    best = Some((t, i));
                }
            }
        }
    }
    best
}

/// Brute-force nearest hit over every triangle; used as a test oracle.
pub fn nearest_hit_exhaustive(
    eye: &Point3<f64>,
    dir: &Vector3<f64>,
    posed: &[PosedTriangle],
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in posed.iter().enumerate() {
        if let Some(t) = intersect(eye, dir, &p.triangle) {
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, i));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_object, cuboid, Category, PartGeometry, SizeRanges};
    use approx::assert_relative_eq;

    fn unit_box() -> ArticulatedObject {
        ArticulatedObject {
            category: Category::LidBox,
            parts: vec![PartGeometry {
                part_id: 0,
                triangles: cuboid([-0.5; 3], [0.5; 3]),
                movable: false,
                joint: None,
                handle: None,
            }],
            joints: vec![],
            base_pose: Isometry3::identity(),
        }
    }

    #[test]
    fn sampled_cameras_respect_ranges() {
        let target = Point3::new(0.1, -0.2, 0.4);
        for seed in 0..500 {
            let cam = sample_camera(seed, target, Intrinsics::default());
            assert!((4.5..=5.5).contains(&cam.distance));
            assert!(cam.altitude_deg >= 30.0 - 1e-9 && cam.altitude_deg <= 60.0 + 1e-9);
            assert!((0.0..360.0).contains(&cam.azimuth_deg));
            let (u, v, z) = cam.project(&target);
            assert_relative_eq!(u, cam.intrinsics.cx, epsilon = 1e-9);
            assert_relative_eq!(v, cam.intrinsics.cy, epsilon = 1e-9);
            assert_relative_eq!(z, cam.distance, epsilon = 1e-9);
        }
        assert_eq!(
            sample_camera(9, target, Intrinsics::default()),
            sample_camera(9, target, Intrinsics::default())
        );
    }

    #[test]
    fn center_pixel_depth_of_unit_box() {
        let obj = unit_box();
        let k = Intrinsics::for_resolution(64, 64);
        let cam = Camera::look_at(k, Point3::new(5.0, 0.0, 0.0), Point3::origin());
        let view = render(&obj, &[], &cam).unwrap();
        let i = view.index(32, 32);
        assert_relative_eq!(view.depth[i], 4.5, epsilon = 1e-12);
        assert_eq!(view.part_id[i], 0);
        assert_relative_eq!(
            view.position[i],
            Point3::new(0.5, 0.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn empty_frustum_is_all_misses() {
        let obj = unit_box();
        let k = Intrinsics::for_resolution(32, 24);
        let cam = Camera::look_at(k, Point3::new(5.0, 0.0, 0.0), Point3::new(10.0, 0.0, 0.0));
        let view = render(&obj, &[], &cam).unwrap();
        assert!(view.part_id.iter().all(|&p| p == -1));
        assert!(view.depth.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn buffers_agree_with_back_projection_and_oracle() {
        let obj = build_object(Category::Door, 2, &SizeRanges::default()).unwrap();
        let q = obj.joint_values();
        let center = obj.bounds(&q).center();
        let cam = sample_camera(4, center, Intrinsics::for_resolution(96, 96));
        let view = render(&obj, &q, &cam).unwrap();
        let posed = forward_kinematics(&obj, &q).unwrap();
        let eye = cam.eye();
        let mut hits = 0;
        for y in 0..96 {
            for x in 0..96 {
                let i = view.index(x, y);
                let dir = cam.ray_direction(f64::from(x), f64::from(y));
                let oracle = nearest_hit_exhaustive(&eye, &dir, &posed);
                assert_eq!(view.depth[i] > 0.0, view.part_id[i] >= 0);
                match oracle {
                    None => assert_eq!(view.part_id[i], -1),
                    Some((t, tri)) => {
                        hits += 1;
                        assert_eq!(view.depth[i], t);
                        assert_eq!(view.triangle[i], tri as i32);
                        let p = cam.back_project(f64::from(x), f64::from(y), view.depth[i]);
                        assert!((p - view.position[i]).norm() < 1e-6);
                        assert!(posed[tri].triangle.distance_to(&view.position[i]) < 1e-6);
                        assert_eq!(posed[tri].part_id, view.part_id[i]);
                    }
                }
            }
        }
        assert!(hits > 500);
    }

    #[test]
    fn pixel_to_3d_round_trip() {
        let obj = build_object(Category::Drawer, 1, &SizeRanges::default()).unwrap();
        let q = obj.joint_values();
        let cam = sample_camera(
            1,
            obj.bounds(&q).center(),
            Intrinsics::for_resolution(80, 80),
        );
        let view = render(&obj, &q, &cam).unwrap();
        for y in 0..80 {
            for x in 0..80 {
                match pixel_to_3d(&view, x, y) {
                    Ok(p) => {
                        let (u, v) = view.project(&p);
                        assert!((u - f64::from(x)).abs() <= 0.5 && (v - f64::from(y)).abs() <= 0.5);
                    }
                    Err(e) => assert!(matches!(e, Error::NoSurface { .. })),
                }
            }
        }
        assert!(pixel_to_3d(&view, 80, 0).is_err());
    }

    #[test]
    fn principal_pixel_lies_on_optical_axis() {
        let obj = unit_box();
        let k = Intrinsics::for_resolution(40, 40);
        let cam = Camera::look_at(k, Point3::new(3.0, 2.0, 4.0), Point3::origin());
        let view = render(&obj, &[], &cam).unwrap();
        let p = pixel_to_3d(&view, 20, 20).unwrap();
        let forward = (Point3::origin() - cam.eye()).normalize();
        let along = p - cam.eye();
        assert_relative_eq!(along.normalize(), forward, epsilon = 1e-12);
        assert_relative_eq!(
            along.norm(),
            view.depth[view.index(20, 20)],
            epsilon = 1e-12
        );
    }

    #[test]
    fn box_corner_matches_analytic_coordinate() {
        // Straight down onto the +z face; focal 90 puts the face corners
        // (+-0.5, +-0.5, 0.5) at integer pixels 40 and 60.
        let obj = unit_box();
        let k = Intrinsics {
            width: 101,
            height: 101,
            focal: 90.0,
            cx: 50.0,
            cy: 50.0,
        };
        let cam = Camera::look_at(k, Point3::new(0.0, 0.0, 5.0), Point3::origin());
        let view = render(&obj, &[], &cam).unwrap();
        for corner in [
            Point3::new(0.5, 0.5, 0.5),
            Point3::new(-0.5, 0.5, 0.5),
            Point3::new(0.5, -0.5, 0.5),
            Point3::new(-0.5, -0.5, 0.5),
        ] {
            let (u, v, _) = cam.project(&corner);
            let (x, y) = (u.round() as u32, v.round() as u32);
            let p = pixel_to_3d(&view, x, y).unwrap();
            assert!((p - corner).norm() < 1e-4, "{p} vs {corner}");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let obj = build_object(Category::Pliers, 3, &SizeRanges::default()).unwrap();
        let q = obj.joint_values();
        let cam = sample_camera(
            8,
            obj.bounds(&q).center(),
            Intrinsics::for_resolution(48, 48),
        );
        assert_eq!(
            render(&obj, &q, &cam).unwrap(),
            render(&obj, &q, &cam).unwrap()
        );
    }
}
