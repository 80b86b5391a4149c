use nalgebra::{Point3, Vector3};

use crate::scene::Triangle;

/// Watertight ray/triangle intersection (Woop, Benthin and Wald, 2013).
///
/// Returns the ray parameter `t > 0` of the hit. Both faces are hit; the
/// direction need not be normalized. Rays through a shared edge hit both
/// adjacent triangles, so no gaps appear along mesh seams.
pub fn intersect(origin: &Point3<f64>, dir: &Vector3<f64>, tri: &Triangle) -> Option<f64> {
    let kz = dir.iamax();
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];

    let [a, b, c] = tri.vertices;
    let a = a - origin;
    let b = b - origin;
    let c = c - origin;

    let ax = a[kx] - sx * a[kz];
    let ay = a[ky] - sy * a[kz];
    let bx = b[kx] - sx * b[kz];
    let by = b[ky] - sy * b[kz];
    let cx = c[kx] - sx * c[kz];
    let cy = c[ky] - sy * c[kz];

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;

    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t_scaled = u * (sz * a[kz]) + v * (sz * b[kz]) + w * (sz * c[kz]);
    let t = t_scaled / det;
    (t > 0.0).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::cuboid;
    use proptest::prelude::*;

    #[test]
    fn hits_from_either_side() {
        let t = Triangle::new(
            Point3::new(-1.0, -1.0, 0.0),
            Point3::new(1.0, -1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        );
        let down = intersect(
            &Point3::new(0.0, 0.0, 2.0),
            &Vector3::new(0.0, 0.0, -1.0),
            &t,
        );
        let up = intersect(
            &Point3::new(0.0, 0.0, -3.0),
            &Vector3::new(0.0, 0.0, 2.0),
            &t,
        );
        assert_eq!(down, Some(2.0));
        assert_eq!(up, Some(1.5));
        assert!(intersect(
            &Point3::new(0.0, 0.0, 2.0),
            &Vector3::new(0.0, 0.0, 1.0),
            &t
        )
        .is_none());
        assert!(intersect(
            &Point3::new(5.0, 0.0, 2.0),
            &Vector3::new(0.0, 0.0, -1.0),
            &t
        )
        .is_none());
    }

    #[test]
    fn shared_diagonal_is_watertight() {
        // Rays along the diagonal of a box face hit both halves.
        let tris = cuboid([-1.0; 3], [1.0; 3]);
        let o = Point3::new(0.3, 0.3, 4.0);
        let d = Vector3::new(0.0, 0.0, -1.0);
        let hits: Vec<_> = tris.iter().filter_map(|t| intersect(&o, &d, t)).collect();
        assert!(hits.iter().any(|&t| (t - 3.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn hit_point_lies_on_triangle(
            ox in -0.9f64..0.9, oy in -0.9f64..0.9,
            dx in -0.02f64..0.02, dy in -0.02f64..0.02,
        ) {
            // Every ray from above into the unit box hits its top face.
            let tris = cuboid([-1.0; 3], [1.0; 3]);
            let o = Point3::new(ox, oy, 5.0);
            let d = Vector3::new(dx, dy, -1.0);
            let best = tris
                .iter()
                .filter_map(|t| intersect(&o, &d, t).map(|h| (h, t)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let (h, t) = best.expect("ray should hit");
            let p = o + d * h;
            prop_assert!((p.z - 1.0).abs() < 1e-12);
            prop_assert!(t.distance_to(&p) < 1e-9);
        }
    }
}
