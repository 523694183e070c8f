//! Procedural closed meshes: cuboids, unions of axis-aligned boxes, spheres.
//!
//! Box unions are emitted as a single conforming rectilinear surface (no
//! internal faces, no T-junctions), so they are closed 2-manifolds whenever
//! no two boxes meet only along an edge or a corner.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::mesh::{Aabb, MeshFormat, TriangleMesh};

pub fn cuboid(min: &Point3<f64>, max: &Point3<f64>) -> TriangleMesh {
    box_union(&[Aabb::new(*min, *max)])
}

/// Outward-wound boundary of the union of `boxes`.
pub fn box_union(boxes: &[Aabb]) -> TriangleMesh {
    let mut planes: [Vec<f64>; 3] = Default::default();
    for b in boxes {
        for (a, axis) in planes.iter_mut().enumerate() {
            axis.push(b.min[a]);
            axis.push(b.max[a]);
        }
    }
    for p in &mut planes {
        p.sort_by(f64::total_cmp);
        p.dedup();
    }
    let n = planes.clone().map(|p| p.len().saturating_sub(1));
    let inside = |c: [isize; 3]| -> bool {
        if (0..3).any(|a| c[a] < 0 || c[a] as usize >= n[a]) {
            return false;
        }
        let centre: [f64; 3] = std::array::from_fn(|a| {
            let i = c[a] as usize;
            0.5 * (planes[a][i] + planes[a][i + 1])
        });
        boxes
            .iter()
            .any(|b| (0..3).all(|a| centre[a] > b.min[a] && centre[a] < b.max[a]))
    };

    let mut vertices = Vec::new();
    let mut index: HashMap<[usize; 3], u32> = HashMap::new();
    let mut vertex = |g: [usize; 3]| -> u32 {
        *index.entry(g).or_insert_with(|| {
            vertices.push(Point3::new(planes[0][g[0]], planes[1][g[1]], planes[2][g[2]]));
            vertices.len() as u32 - 1
        })
    };
    let mut triangles = Vec::new();

    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let c = [i as isize, j as isize, k as isize];
                if !inside(c) {
                    continue;
                }
                for axis in 0..3 {
                    for side in [0usize, 1] {
                        let mut nb = c;
                        nb[axis] += if side == 1 { 1 } else { -1 };
                        if inside(nb) {
                            continue;
                        }
                        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                        let base = [i, j, k];
                        let corner = |du: usize, dv: usize| {
                            let mut g = base;
                            g[axis] += side;
                            g[u] += du;
                            g[v] += dv;
                            g
                        };
                        // e_u x e_v = e_axis, so this loop faces +axis
                        let mut quad = [
                            vertex(corner(0, 0)),
                            vertex(corner(1, 0)),
                            vertex(corner(1, 1)),
                            vertex(corner(0, 1)),
                        ];
                        if side == 0 {
                            quad.reverse();
                        }
                        triangles.push([quad[0], quad[1], quad[2]]);
                        triangles.push([quad[0], quad[2], quad[3]]);
                    }
                }
            }
        }
    }
    TriangleMesh {
        vertices,
        triangles,
        format_origin: MeshFormat::StlBinary,
    }
}

/// Latitude/longitude sphere with vertices on the surface (so the solid is
/// inscribed in the true ball).
pub fn uv_sphere(centre: &Point3<f64>, radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut vertices = vec![centre + nalgebra::Vector3::new(0.0, 0.0, radius)];
    for s in 1..stacks {
        let theta = std::f64::consts::PI * s as f64 / stacks as f64;
        for l in 0..slices {
            let phi = std::f64::consts::TAU * l as f64 / slices as f64;
            vertices.push(
                centre
                    + nalgebra::Vector3::new(
                        radius * theta.sin() * phi.cos(),
                        radius * theta.sin() * phi.sin(),
                        radius * theta.cos(),
                    ),
            );
        }
    }
    vertices.push(centre + nalgebra::Vector3::new(0.0, 0.0, -radius));
    let south = vertices.len() as u32 - 1;
    let ring = |s: usize, l: usize| (1 + (s - 1) * slices + l % slices) as u32;

    let mut triangles = Vec::new();
    for l in 0..slices {
        triangles.push([0, ring(1, l), ring(1, l + 1)]);
    }
    for s in 1..stacks - 1 {
        for l in 0..slices {
            let (a, b) = (ring(s, l), ring(s, l + 1));
            let (c, d) = (ring(s + 1, l), ring(s + 1, l + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for l in 0..slices {
        triangles.push([south, ring(stacks - 1, l + 1), ring(stacks - 1, l)]);
    }
    TriangleMesh {
        vertices,
        triangles,
        format_origin: MeshFormat::StlBinary,
    }
}
