//! Procedural demo objects, in cm, each built to trip one family of checks.
//!
//! Interior faces sit halfway through a 10 cm cell so that voxelization is
//! unambiguous: a face lying exactly on a cell plane would touch the cells on
//! both sides.

use crate::discretize::aabb;
use crate::mesh::TriangleMesh;
use crate::shapes::box_union;

/// 40 x 40 x 60 seat on four corner legs: 60 components, otherwise sound.
pub fn stool() -> TriangleMesh {
    let mut parts = vec![aabb([0.0, 0.0, 35.0], [40.0, 40.0, 60.0])];
    for x in [0.0, 35.0] {
        for y in [0.0, 35.0] {
            parts.push(aabb([x, y, 0.0], [x + 5.0, y + 5.0, 35.0]));
        }
    }
    box_union(&parts)
}

/// Back wall with two full-depth shelves cantilevered four cells out.
pub fn shelf() -> TriangleMesh {
    box_union(&[
        aabb([0.0, 0.0, 0.0], [60.0, 5.0, 60.0]),
        aabb([0.0, 0.0, 22.5], [60.0, 50.0, 27.5]),
        aabb([0.0, 0.0, 42.5], [60.0, 50.0, 47.5]),
    ])
}

/// A T standing on its crossbar, so the stem is a lone five-cell column.
pub fn letter_t() -> TriangleMesh {
    box_union(&[
        aabb([0.0, 0.0, 0.0], [50.0, 10.0, 5.0]),
        aabb([22.5, 2.5, 5.0], [27.5, 7.5, 60.0]),
    ])
}

/// 50 x 50 top on four legs set one cell in from the edges. The top's
/// first cell in x-y order overhangs empty floor.
pub fn table() -> TriangleMesh {
    let mut parts = vec![aabb([0.0, 0.0, 25.0], [50.0, 50.0, 30.0])];
    for x in [12.5, 32.5] {
        for y in [12.5, 32.5] {
            parts.push(aabb([x, y, 0.0], [x + 5.0, y + 5.0, 25.0]));
        }
    }
    box_union(&parts)
}

/// All four, by name.
pub fn all() -> [(&'static str, TriangleMesh); 4] {
    [
        ("stool", stool()),
        ("shelf", shelf()),
        ("letter_t", letter_t()),
        ("table", table()),
    ]
}
