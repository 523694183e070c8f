//! Vertex welding, degenerate/duplicate removal and winding unification.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::TriangleMesh;

/// Weld tolerance in cm.
pub const DEFAULT_WELD_TOLERANCE: f64 = 1e-4;

/// Triangles with a smaller area (cm²) are dropped.
pub const DEGENERATE_AREA: f64 = 1e-9;

/// What [`repair_mesh`] changed, and whether the result bounds a solid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairSummary {
    pub welded_vertices: usize,
    pub removed_degenerate: usize,
    pub removed_duplicate: usize,
    pub flipped_triangles: usize,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    pub orientable: bool,
    /// Closed, edge-manifold and consistently oriented. Gates interior filling
    /// during voxelization.
    pub manifold: bool,
}

/// Best-effort cleanup. Never fails; problems that cannot be fixed (open
/// boundaries, edges shared by more than two faces) are reported in the
/// summary instead.
pub fn repair_mesh(mesh: &TriangleMesh, weld_tolerance: f64) -> (TriangleMesh, RepairSummary) {
    let (remap, reps) = weld(&mesh.vertices, weld_tolerance);
    let welded_vertices = mesh.vertices.len() - reps.len();

    let mut removed_degenerate = 0;
    let mut removed_duplicate = 0;
    let mut seen = HashSet::new();
    let mut triangles = Vec::with_capacity(mesh.triangles.len());
    for tri in &mesh.triangles {
        let t = tri.map(|i| remap[i as usize]);
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || area(&reps, &t) < DEGENERATE_AREA {
            removed_degenerate += 1;
            continue;
        }
        let mut key = t;
        key.sort_unstable();
        if !seen.insert(key) {
            removed_duplicate += 1;
            continue;
        }
        triangles.push(t);
    }

    // Drop unreferenced vertices, keeping first-seen order.
    let mut used = vec![false; reps.len()];
    for t in &triangles {
        for &i in t {
            used[i as usize] = true;
        }
    }
    let mut compact = vec![u32::MAX; reps.len()];
    let mut vertices = Vec::new();
    for (i, p) in reps.iter().enumerate() {
        if used[i] {
            compact[i] = vertices.len() as u32;
            vertices.push(*p);
        }
    }
    for t in &mut triangles {
        *t = t.map(|i| compact[i as usize]);
    }

    let orient = orient(&vertices, &mut triangles);
    let manifold =
        !triangles.is_empty() && orient.boundary_edges == 0 && orient.non_manifold_edges == 0 && orient.orientable;

    let summary = RepairSummary {
        welded_vertices,
        removed_degenerate,
        removed_duplicate,
        flipped_triangles: orient.flipped,
        boundary_edges: orient.boundary_edges,
        non_manifold_edges: orient.non_manifold_edges,
        orientable: orient.orientable,
        manifold,
    };
    let repaired = TriangleMesh {
        vertices,
        triangles,
        format_origin: mesh.format_origin,
    };
    (repaired, summary)
}

fn area(vertices: &[Point3<f64>], t: &[u32; 3]) -> f64 {
    let [a, b, c] = t.map(|i| vertices[i as usize]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Greedy welding: each vertex joins the first representative within
/// `tol`, otherwise becomes one. Representatives end up pairwise farther apart
/// than `tol`, so a second pass is a no-op.
fn weld(vertices: &[Point3<f64>], tol: f64) -> (Vec<u32>, Vec<Point3<f64>>) {
    let mut reps: Vec<Point3<f64>> = Vec::new();
    let mut remap = Vec::with_capacity(vertices.len());
    if tol <= 0.0 {
        let mut exact: HashMap<[u64; 3], u32> = HashMap::new();
        for p in vertices {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            let id = *exact.entry(key).or_insert_with(|| {
                reps.push(*p);
                reps.len() as u32 - 1
            });
            remap.push(id);
        }
        return (remap, reps);
    }
    let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let cell = |p: &Point3<f64>| [0, 1, 2].map(|a| (p[a] / tol).floor() as i64);
    for p in vertices {
        let c = cell(p);
        let mut found: Option<u32> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(ids) = buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &id in ids {
                        if (reps[id as usize] - p).norm() <= tol && found.is_none_or(|f| id < f) {
                            found = Some(id);
                        }
                    }
                }
            }
        }
        let id = found.unwrap_or_else(|| {
            reps.push(*p);
            let id = reps.len() as u32 - 1;
            buckets.entry(c).or_default().push(id);
            id
        });
        remap.push(id);
    }
    (remap, reps)
}

struct Orientation {
    flipped: usize,
    boundary_edges: usize,
    non_manifold_edges: usize,
    orientable: bool,
}

/// Propagates a consistent winding across manifold edges, then turns each
/// closed component outward (positive signed volume).
fn orient(vertices: &[Point3<f64>], triangles: &mut [[u32; 3]]) -> Orientation {
    let mut edges: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let boundary_edges = edges.values().filter(|v| v.len() == 1).count();
    let non_manifold_edges = edges.values().filter(|v| v.len() > 2).count();

    let has_directed = |tri: &[u32; 3], a: u32, b: u32| (0..3).any(|e| tri[e] == a && tri[(e + 1) % 3] == b);

    let mut flip = vec![false; triangles.len()];
    let mut visited = vec![false; triangles.len()];
    let mut orientable = true;
    let mut components: Vec<(Vec<usize>, bool)> = Vec::new();

    for seed in 0..triangles.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut members = vec![seed];
        let mut closed = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            // (neighbour, must it be flipped relative to t)
            let mut neighbours: Vec<(usize, bool)> = Vec::with_capacity(3);
            let tri = triangles[t];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let shared = &edges[&(a.min(b), a.max(b))];
                if shared.len() != 2 {
                    closed = false;
                    continue;
                }
                let n = if shared[0] == t { shared[1] } else { shared[0] };
                // consistent neighbours walk the shared edge as b -> a
                neighbours.push((n, has_directed(&triangles[n], a, b)));
            }
            // visit in index order so the spanning tree ignores current winding
            neighbours.sort_unstable();
            for (n, relative) in neighbours {
                let wanted = flip[t] ^ relative;
                if !visited[n] {
                    visited[n] = true;
                    flip[n] = wanted;
                    members.push(n);
                    queue.push_back(n);
                } else if flip[n] != wanted {
                    orientable = false;
                }
            }
        }
        components.push((members, closed));
    }

    for (members, closed) in &components {
        if !closed {
            continue;
        }
        let volume: f64 = members
            .iter()
            .map(|&t| {
                let [a, b, c] = oriented(&triangles[t], flip[t]).map(|i| vertices[i as usize].coords);
                a.dot(&b.cross(&c))
            })
            .sum();
        if volume < 0.0 {
            for &t in members {
                flip[t] = !flip[t];
            }
        }
    }

    let mut flipped = 0;
    for (t, f) in flip.iter().enumerate() {
        if *f {
            triangles[t].swap(1, 2);
            flipped += 1;
        }
    }
    Orientation {
        flipped,
        boundary_edges,
        non_manifold_edges,
        orientable,
    }
}

fn oriented(tri: &[u32; 3], flip: bool) -> [u32; 3] {
    if flip {
        [tri[0], tri[2], tri[1]]
    } else {
        *tri
    }
}
