//! Triangle meshes: parsing, serialization, repair and measurement.
//!
//! All coordinates are centimeters. Files are read as triangle soups; welding
//! and winding repair happen in [`repair_mesh`].

mod parse;
mod repair;

pub use parse::{format_from_path, parse_mesh, write_obj, write_stl_ascii, write_stl_binary};
pub use repair::{repair_mesh, RepairSummary, DEFAULT_WELD_TOLERANCE, DEGENERATE_AREA};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("malformed mesh file: {0}")]
    MalformedFile(String),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("mesh has no vertices")]
    EmptyMesh,
}

/// File format a mesh was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    StlAscii,
    StlBinary,
    Obj,
}

/// Indexed triangle mesh in centimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub format_origin: MeshFormat,
}

impl TriangleMesh {
    /// Builds a mesh, checking that every index refers to a vertex.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[u32; 3]>,
        format_origin: MeshFormat,
    ) -> Result<Self, MeshError> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(MeshError::MalformedFile(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self {
            vertices,
            triangles,
            format_origin,
        })
    }

    /// Builds an indexed mesh from a triangle soup without sharing vertices.
    pub fn from_soup(triangles: &[[Point3<f64>; 3]], format_origin: MeshFormat) -> Self {
        let vertices = triangles.iter().flatten().copied().collect();
        let triangles = (0..triangles.len() as u32)
            .map(|t| [3 * t, 3 * t + 1, 3 * t + 2])
            .collect();
        Self {
            vertices,
            triangles,
            format_origin,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_points(&self) -> impl Iterator<Item = [Point3<f64>; 3]> + '_ {
        (0..self.triangles.len()).map(|t| self.triangle(t))
    }

    /// Uniformly scales every vertex about `center`.
    pub fn scaled_about(&self, center: &Point3<f64>, factor: f64) -> Self {
        let vertices = self.vertices.iter().map(|p| center + (p - center) * factor).collect();
        Self {
            vertices,
            ..self.clone()
        }
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| p + offset).collect(),
            ..self.clone()
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        debug_assert!((0..3).all(|a| min[a] <= max[a]), "inverted box");
        Self { min, max }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn longest_edge(&self) -> f64 {
        self.extent().max()
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

/// Tight axis-aligned box around all vertices.
pub fn bounding_box(mesh: &TriangleMesh) -> Result<Aabb, MeshError> {
    let first = mesh.vertices.first().ok_or(MeshError::EmptyMesh)?;
    let (min, max) = mesh
        .vertices
        .iter()
        .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    Ok(Aabb { min, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_cube_box() {
        let mesh = crate::shapes::cuboid(&Point3::origin(), &Point3::new(1.0, 1.0, 1.0));
        let bb = bounding_box(&mesh).unwrap();
        assert_eq!(bb.min, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(bb.max, Point3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn single_vertex_box_is_degenerate() {
        let mesh = TriangleMesh::new(vec![Point3::new(2.0, 3.0, 4.0)], vec![], MeshFormat::Obj).unwrap();
        let bb = bounding_box(&mesh).unwrap();
        assert_eq!(bb.min, bb.max);
        assert_eq!(bb.min, Point3::new(2.0, 3.0, 4.0));
    }

    #[test]
    fn empty_mesh_has_no_box() {
        let mesh = TriangleMesh::new(vec![], vec![], MeshFormat::Obj).unwrap();
        assert_eq!(bounding_box(&mesh), Err(MeshError::EmptyMesh));
    }

    #[test]
    fn random_points_match_direct_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point3<f64>> = (0..1000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                )
            })
            .collect();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &pts {
            for a in 0..3 {
                if p[a] < lo[a] {
                    lo[a] = p[a];
                }
                if p[a] > hi[a] {
                    hi[a] = p[a];
                }
            }
        }
        let mesh = TriangleMesh::new(pts, vec![], MeshFormat::Obj).unwrap();
        let bb = bounding_box(&mesh).unwrap();
        assert_eq!(bb.min, Point3::from(lo));
        assert_eq!(bb.max, Point3::from(hi));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = TriangleMesh::new(vec![Point3::origin(); 2], vec![[0, 1, 2]], MeshFormat::Obj);
        assert!(matches!(err, Err(MeshError::MalformedFile(_))));
    }

    proptest::proptest! {
        #[test]
        fn box_scales_with_mesh(
            coords in proptest::collection::vec(-100.0f64..100.0, 3..60),
            s in 0.1f64..10.0,
        ) {
            let pts: Vec<_> = coords.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
            let mesh = TriangleMesh::new(pts, vec![], MeshFormat::Obj).unwrap();
            let origin = Point3::new(1.0, -2.0, 3.0);
            let bb = bounding_box(&mesh).unwrap();
            let scaled = bounding_box(&mesh.scaled_about(&origin, s)).unwrap();
            for a in 0..3 {
                let lo = origin[a] + (bb.min[a] - origin[a]) * s;
                let hi = origin[a] + (bb.max[a] - origin[a]) * s;
                proptest::prop_assert!((scaled.min[a] - lo).abs() < 1e-9);
                proptest::prop_assert!((scaled.max[a] - hi).abs() < 1e-9);
            }
        }
    }
}
