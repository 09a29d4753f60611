//! Marching-cubes case table, generated from cube topology.
//!
//! Corner `c` of the unit cube sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
//! Edge `4 * axis + combo` runs along `axis` from the corner whose other two
//! coordinates are `combo & 1` and `combo >> 1` (axes taken cyclically after
//! `axis`). On a face with diagonally opposite inside corners the inside
//! corners are kept apart, so neighbouring cells always agree on the contour
//! they share and the assembled surface is closed.

use std::sync::OnceLock;

/// A triangle corner: a point on a cube edge, or the centroid of one of the
/// case's contour loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellVertex {
    Edge(u8),
    Center(u8),
}

#[derive(Debug, Clone, Default)]
pub struct CellCase {
    /// Closed contour loops, as edge lists.
    pub loops: Vec<Vec<u8>>,
    /// Triangles wound so their normals face away from inside corners.
    pub triangles: Vec<[CellVertex; 3]>,
}

pub fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

fn corner_of(bits: [usize; 3]) -> usize {
    bits[0] | bits[1] << 1 | bits[2] << 2
}

/// Corners at the start and end of an edge.
pub fn edge_corners(e: usize) -> (usize, usize) {
    let axis = e / 4;
    let combo = e % 4;
    let mut bits = [0; 3];
    bits[(axis + 1) % 3] = combo & 1;
    bits[(axis + 2) % 3] = combo >> 1;
    let start = corner_of(bits);
    bits[axis] = 1;
    (start, corner_of(bits))
}

fn edge_between(a: usize, b: usize) -> usize {
    let diff = a ^ b;
    let axis = diff.trailing_zeros() as usize;
    debug_assert_eq!(diff.count_ones(), 1);
    let bits = corner_offset(a);
    axis * 4 + bits[(axis + 1) % 3] + 2 * bits[(axis + 2) % 3]
}

/// The two faces `(axis, side)` containing an edge.
fn edge_faces(e: usize) -> [(usize, usize); 2] {
    let (start, _) = edge_corners(e);
    let bits = corner_offset(start);
    let axis = e / 4;
    let u = (axis + 1) % 3;
    let v = (axis + 2) % 3;
    [(u, bits[u]), (v, bits[v])]
}

fn share_face(a: u8, b: u8) -> bool {
    let fa = edge_faces(a as usize);
    let fb = edge_faces(b as usize);
    fa.iter().any(|f| fb.contains(f))
}

/// Face corners in counter-clockwise order seen from outside the cube.
fn face_cycle(axis: usize, side: usize) -> [usize; 4] {
    let u = (axis + 1) % 3;
    let v = (axis + 2) % 3;
    let mut out = [0; 4];
    for (slot, (bu, bv)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
        let mut bits = [0; 3];
        bits[axis] = side;
        bits[u] = bu;
        bits[v] = bv;
        out[slot] = corner_of(bits);
    }
    if side == 0 {
        out.reverse();
    }
    out
}

fn build_case(mask: usize) -> CellCase {
    let inside = |c: usize| mask >> c & 1 == 1;
    // next[e] = edge following e along the contour.
    let mut next = [u8::MAX; 12];
    for axis in 0..3 {
        for side in 0..2 {
            let cyc = face_cycle(axis, side);
            for i in 0..4 {
                let (a, b) = (cyc[i], cyc[(i + 1) % 4]);
                if inside(a) || !inside(b) {
                    continue;
                }
                // Entering an inside run; follow it to the exit.
                let entry = edge_between(a, b);
                let mut j = (i + 1) % 4;
                while inside(cyc[(j + 1) % 4]) {
                    j = (j + 1) % 4;
                }
                let exit = edge_between(cyc[j], cyc[(j + 1) % 4]);
                next[entry] = exit as u8;
            }
        }
    }

    let mut case = CellCase::default();
    let mut seen = [false; 12];
    for start in 0..12 {
        if next[start] == u8::MAX || seen[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            lp.push(e as u8);
            e = next[e] as usize;
        }
        debug_assert_eq!(e, start);
        let id = case.loops.len() as u8;
        triangulate(&lp, id, &mut case.triangles);
        case.loops.push(lp);
    }
    case
}

/// Fans from a vertex whose diagonals all cross the cell interior; falls
/// back to a centroid fan when no such vertex exists.
fn triangulate(lp: &[u8], id: u8, out: &mut Vec<[CellVertex; 3]>) {
    let n = lp.len();
    let apex = (0..n).find(|&a| (2..n - 1).all(|d| !share_face(lp[a], lp[(a + d) % n])));
    match apex {
        Some(a) => {
            for d in 1..n - 1 {
                out.push([
                    CellVertex::Edge(lp[a]),
                    CellVertex::Edge(lp[(a + d) % n]),
                    CellVertex::Edge(lp[(a + d + 1) % n]),
                ]);
            }
        }
        None => {
            for i in 0..n {
                out.push([
                    CellVertex::Center(id),
                    CellVertex::Edge(lp[i]),
                    CellVertex::Edge(lp[(i + 1) % n]),
                ]);
            }
        }
    }
}

/// Case table indexed by the bitmask of inside corners.
pub fn case_table() -> &'static [CellCase] {
    static TABLE: OnceLock<Vec<CellCase>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(build_case).collect())
}
