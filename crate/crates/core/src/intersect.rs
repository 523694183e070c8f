//! Triangle/box overlap (separating axes) and point-in-solid (ray parity).

use nalgebra::{Point3, Vector3};

use crate::mesh::TriangleMesh;

/// Separation slack in cm. Touching counts as overlapping.
pub const SAT_EPSILON: f64 = 1e-9;

/// Whether a triangle overlaps the closed box `[lo, hi]`.
///
/// Tests the 13 candidate separating axes: three box normals, the triangle
/// normal and the nine edge cross products.
pub fn triangle_box_overlap(tri: &[Point3<f64>; 3], lo: &Point3<f64>, hi: &Point3<f64>) -> bool {
    let centre = nalgebra::center(lo, hi);
    let half = (hi - lo) * 0.5;
    let v = tri.map(|p| p - centre);

    // box face normals
    for a in 0..3 {
        let min = v[0][a].min(v[1][a]).min(v[2][a]);
        let max = v[0][a].max(v[1][a]).max(v[2][a]);
        if min > half[a] + SAT_EPSILON || max < -half[a] - SAT_EPSILON {
            return false;
        }
    }

    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let separated = |axis: Vector3<f64>| -> bool {
        let len = axis.norm();
        if len == 0.0 {
            return false;
        }
        let p = v.map(|q| axis.dot(&q));
        let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
        let min = p[0].min(p[1]).min(p[2]);
        let max = p[0].max(p[1]).max(p[2]);
        min > r + SAT_EPSILON * len || max < -r - SAT_EPSILON * len
    };

    if separated(edges[0].cross(&edges[1])) {
        return false;
    }
    for e in &edges {
        for a in 0..3 {
            if separated(Vector3::ith(a, 1.0).cross(e)) {
                return false;
            }
        }
    }
    true
}

// Generic directions avoid grazing the axis-aligned edges and vertices that
// lattice-aligned meshes are full of.
const RAY_DIRECTIONS: [[f64; 3]; 7] = [
    [0.8164965809, 0.4082482905, 0.4082482905],
    [-0.2672612419, 0.8017837257, 0.5345224838],
    [0.3015113446, -0.3015113446, 0.9045340337],
    [-0.6396021491, -0.4264014327, -0.6396021491],
    [0.5773502692, 0.5773502692, -0.5773502692],
    [0.1690308509, -0.8451542547, 0.5070925528],
    [-0.7427813527, 0.3713906764, -0.5570860145],
];

const BARY_SLACK: f64 = 1e-9;

/// Ray-parity containment: odd crossing count means inside. Rays that pass
/// within numerical slack of an edge are discarded; the answer is the
/// majority of three clean rays.
///
/// Only meaningful for closed meshes.
pub fn point_in_mesh(mesh: &TriangleMesh, p: &Point3<f64>) -> bool {
    let mut votes = 0;
    let mut clean = 0;
    for d in RAY_DIRECTIONS {
        let dir = Vector3::from(d);
        if let Some(crossings) = count_crossings(mesh, p, &dir) {
            clean += 1;
            votes += crossings % 2;
            if clean == 3 {
                break;
            }
        }
    }
    if clean == 0 {
        return false;
    }
    2 * votes > clean
}

/// `None` when the ray grazes an edge, vertex or starts on the surface.
fn count_crossings(mesh: &TriangleMesh, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<usize> {
    let mut count = 0;
    for [a, b, c] in mesh.triangle_points() {
        let e1 = b - a;
        let e2 = c - a;
        let pvec = dir.cross(&e2);
        let det = e1.dot(&pvec);
        let scale = e1.norm() * e2.norm();
        if det.abs() <= 1e-12 * scale {
            // ray parallel to the triangle plane; only matters if it lies in it
            let n = e1.cross(&e2);
            if (origin - a).dot(&n).abs() <= 1e-12 * scale {
                return None;
            }
            continue;
        }
        let inv = 1.0 / det;
        let tvec = origin - a;
        let u = tvec.dot(&pvec) * inv;
        if !(-BARY_SLACK..=1.0 + BARY_SLACK).contains(&u) {
            continue;
        }
        let qvec = tvec.cross(&e1);
        let v = dir.dot(&qvec) * inv;
        if v < -BARY_SLACK || u + v > 1.0 + BARY_SLACK {
            continue;
        }
        let t = e2.dot(&qvec) * inv;
        if t < -BARY_SLACK {
            continue;
        }
        if u <= BARY_SLACK || v <= BARY_SLACK || u + v >= 1.0 - BARY_SLACK || t <= BARY_SLACK {
            return None;
        }
        count += 1;
    }
    Some(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use proptest::prelude::*;

    fn unit_box() -> (Point3<f64>, Point3<f64>) {
        (Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn triangle_inside_box() {
        let (lo, hi) = unit_box();
        let t = [
            Point3::new(0.2, 0.2, 0.5),
            Point3::new(0.8, 0.2, 0.5),
            Point3::new(0.5, 0.8, 0.5),
        ];
        assert!(triangle_box_overlap(&t, &lo, &hi));
    }

    #[test]
    fn touching_face_counts() {
        let (lo, hi) = unit_box();
        let t = [
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 5.0, 0.0),
            Point3::new(1.0, 0.0, 5.0),
        ];
        assert!(triangle_box_overlap(&t, &lo, &hi));
        let shifted = t.map(|p| p + Vector3::new(1e-6, 0.0, 0.0));
        assert!(!triangle_box_overlap(&shifted, &lo, &hi));
    }

    #[test]
    fn large_triangle_spanning_box() {
        let (lo, hi) = unit_box();
        let t = [
            Point3::new(-10.0, -10.0, 0.5),
            Point3::new(10.0, -10.0, 0.5),
            Point3::new(0.0, 10.0, 0.5),
        ];
        assert!(triangle_box_overlap(&t, &lo, &hi));
    }

    #[test]
    fn plane_beyond_corner_misses() {
        // triangle in the plane x + y = 2.05: its bounding box overlaps the
        // unit box but the plane stays clear of the (1, 1, z) edge
        let (lo, hi) = unit_box();
        let t = [
            Point3::new(2.05, 0.0, -5.0),
            Point3::new(0.0, 2.05, -5.0),
            Point3::new(1.025, 1.025, 5.0),
        ];
        assert!(!triangle_box_overlap(&t, &lo, &hi));
        // x + y = 1.95 cuts the corner, and the triangle covers the cut
        let t = [
            Point3::new(1.95, 0.0, -5.0),
            Point3::new(0.0, 1.95, -5.0),
            Point3::new(0.975, 0.975, 5.0),
        ];
        assert!(triangle_box_overlap(&t, &lo, &hi));
    }

    // Independent oracle: a triangle and a box overlap iff some point of the
    // triangle is inside the box. Sample the triangle densely and clip.
    fn sampled_overlap(t: &[Point3<f64>; 3], lo: &Point3<f64>, hi: &Point3<f64>) -> Option<bool> {
        const N: usize = 60;
        let mut min_gap = f64::INFINITY;
        for a in 0..=N {
            for b in 0..=N - a {
                let (u, v) = (a as f64 / N as f64, b as f64 / N as f64);
                let p = t[0] + (t[1] - t[0]) * u + (t[2] - t[0]) * v;
                let gap = (0..3)
                    .map(|k| (lo[k] - p[k]).max(p[k] - hi[k]).max(0.0))
                    .fold(0.0, f64::max);
                min_gap = min_gap.min(gap);
            }
        }
        let longest = (0..3).map(|e| (t[(e + 1) % 3] - t[e]).norm()).fold(0.0, f64::max);
        let resolution = 2.0 * longest / N as f64;
        if min_gap == 0.0 {
            Some(true)
        } else if min_gap > resolution {
            Some(false)
        } else {
            None // too close to call by sampling
        }
    }

    proptest! {
        #[test]
        fn sat_agrees_with_sampling(c in proptest::array::uniform9(-2.0f64..3.0)) {
            let t = [
                Point3::new(c[0], c[1], c[2]),
                Point3::new(c[3], c[4], c[5]),
                Point3::new(c[6], c[7], c[8]),
            ];
            let (lo, hi) = unit_box();
            if let Some(expected) = sampled_overlap(&t, &lo, &hi) {
                prop_assert_eq!(triangle_box_overlap(&t, &lo, &hi), expected);
            }
        }

        #[test]
        fn parity_matches_box_membership(p in proptest::array::uniform3(-2.0f64..12.0)) {
            let cube = shapes::cuboid(&Point3::new(0.0, 0.0, 0.0), &Point3::new(10.0, 10.0, 10.0));
            let p = Point3::from(p);
            let margin = (0..3).map(|a| (p[a] - 0.0).abs().min((p[a] - 10.0).abs())).fold(f64::INFINITY, f64::min);
            prop_assume!(margin > 1e-6);
            let inside = (0..3).all(|a| p[a] > 0.0 && p[a] < 10.0);
            prop_assert_eq!(point_in_mesh(&cube, &p), inside);
        }
    }

    #[test]
    fn parity_handles_lattice_aligned_points() {
        let l = shapes::box_union(&[
            crate::mesh::Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(30.0, 10.0, 10.0)),
            crate::mesh::Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 30.0, 10.0)),
        ]);
        assert!(point_in_mesh(&l, &Point3::new(5.0, 5.0, 5.0)));
        assert!(point_in_mesh(&l, &Point3::new(25.0, 5.0, 5.0)));
        assert!(point_in_mesh(&l, &Point3::new(5.0, 25.0, 5.0)));
        assert!(!point_in_mesh(&l, &Point3::new(25.0, 25.0, 5.0)));
        assert!(!point_in_mesh(&l, &Point3::new(15.0, 15.0, 5.0)));
    }

    #[test]
    fn parity_inside_sphere() {
        let s = shapes::uv_sphere(&Point3::origin(), 15.0, 24, 48);
        assert!(point_in_mesh(&s, &Point3::new(0.0, 0.0, 0.0)));
        assert!(point_in_mesh(&s, &Point3::new(5.0, 5.0, 5.0)));
        assert!(!point_in_mesh(&s, &Point3::new(15.0, 15.0, 5.0)));
    }
}
