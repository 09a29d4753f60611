use std::collections::HashMap;

use rayon::prelude::*;

use crate::mesh::tables::{case_table, corner_offset, edge_corners, CellVertex};
use crate::mesh::{ScalarVolume, TriMesh};
use crate::{Error, Result};

/// Keeps interpolated vertices strictly inside their edge so no triangle
/// collapses onto a grid point.
const EDGE_T_MARGIN: f64 = 1e-7;

#[derive(Clone, Copy)]
enum VertexRef {
    Edge(u64),
    Local(usize),
}

struct Slab {
    triangles: Vec<[VertexRef; 3]>,
    centers: Vec<[f64; 3]>,
}

/// Extracts the `iso` level set; voxels with value `>= iso` are inside and
/// triangle normals point away from them.
pub fn marching_cubes(vol: &ScalarVolume, iso: f64) -> Result<TriMesh> {
    let [nx, ny, nz] = vol.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::InvalidArgument(format!("volume {:?} needs at least 2 samples per axis", vol.dims)));
    }
    if !(iso > 0.0 && iso < 1.0) {
        return Err(Error::InvalidArgument(format!("iso level {iso} outside (0, 1)")));
    }

    let slabs: Vec<Slab> = (0..nz - 1).into_par_iter().map(|k| slab(vol, iso, k)).collect();

    let mut mesh = TriMesh::default();
    let mut welded: HashMap<u64, usize> = HashMap::new();
    for s in &slabs {
        let base = mesh.vertices.len();
        mesh.vertices.extend_from_slice(&s.centers);
        for tri in &s.triangles {
            let mut idx = [0; 3];
            for (slot, v) in tri.iter().enumerate() {
                idx[slot] = match *v {
                    VertexRef::Local(i) => base + i,
                    VertexRef::Edge(key) => *welded.entry(key).or_insert_with(|| {
                        mesh.vertices.push(edge_point(vol, iso, key));
                        mesh.vertices.len() - 1
                    }),
                };
            }
            mesh.triangles.push(idx);
        }
    }
    Ok(mesh)
}

fn slab(vol: &ScalarVolume, iso: f64, k: usize) -> Slab {
    let [nx, ny, _] = vol.dims;
    let table = case_table();
    let mut out = Slab {
        triangles: Vec::new(),
        centers: Vec::new(),
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let mut mask = 0;
            for c in 0..8 {
                let o = corner_offset(c);
                if vol.get(i + o[0], j + o[1], k + o[2]) >= iso {
                    mask |= 1 << c;
                }
            }
            let case = &table[mask];
            if case.triangles.is_empty() {
                continue;
            }
            let key = |e: u8| {
                let (start, _) = edge_corners(e as usize);
                let o = corner_offset(start);
                edge_key(vol, i + o[0], j + o[1], k + o[2], e as usize / 4)
            };
            let mut centers: Vec<Option<usize>> = vec![None; case.loops.len()];
            for tri in &case.triangles {
                out.triangles.push(tri.map(|v| match v {
                    CellVertex::Edge(e) => VertexRef::Edge(key(e)),
                    CellVertex::Center(l) => {
                        let l = l as usize;
                        let idx = *centers[l].get_or_insert_with(|| {
                            let lp = &case.loops[l];
                            let mut c = [0.0; 3];
                            for &e in lp {
                                let p = edge_point(vol, iso, key(e));
                                (0..3).for_each(|a| c[a] += p[a] / lp.len() as f64);
                            }
                            out.centers.push(c);
                            out.centers.len() - 1
                        });
                        VertexRef::Local(idx)
                    }
                }));
            }
        }
    }
    out
}

fn edge_key(vol: &ScalarVolume, i: usize, j: usize, k: usize, axis: usize) -> u64 {
    vol.index(i, j, k) as u64 * 3 + axis as u64
}

fn edge_point(vol: &ScalarVolume, iso: f64, key: u64) -> [f64; 3] {
    let axis = (key % 3) as usize;
    let flat = (key / 3) as usize;
    let [nx, ny, _] = vol.dims;
    let i = flat % nx;
    let j = (flat / nx) % ny;
    let k = flat / (nx * ny);
    let mut end = [i, j, k];
    end[axis] += 1;
    let v0 = vol.get(i, j, k);
    let v1 = vol.get(end[0], end[1], end[2]);
    let t = ((iso - v0) / (v1 - v0)).clamp(EDGE_T_MARGIN, 1.0 - EDGE_T_MARGIN);
    let p0 = vol.position(i, j, k);
    let p1 = vol.position(end[0], end[1], end[2]);
    [
        p0[0] + t * (p1[0] - p0[0]),
        p0[1] + t * (p1[1] - p0[1]),
        p0[2] + t * (p1[2] - p0[2]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(n: usize, radius: f64, ramp: f64) -> ScalarVolume {
        let h = 1.0 / (n - 1) as f64;
        ScalarVolume::from_fn([n; 3], [h; 3], |x, y, z| {
            let d = ((x - 0.5).powi(2) + (y - 0.5).powi(2) + (z - 0.5).powi(2)).sqrt();
            (0.5 + (radius - d) / ramp).clamp(0.0, 1.0)
        })
        .unwrap()
    }

    #[test]
    fn all_outside_is_empty() {
        let v = ScalarVolume::new([3, 3, 3], [1.0; 3], vec![0.2; 27]).unwrap();
        let m = marching_cubes(&v, 0.5).unwrap();
        assert!(m.triangles.is_empty());
    }

    #[test]
    fn one_corner_one_triangle() {
        let mut values = vec![0.0; 8];
        values[0] = 1.0;
        let v = ScalarVolume::new([2, 2, 2], [1.0; 3], values).unwrap();
        let m = marching_cubes(&v, 0.5).unwrap();
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(m.vertices.len(), 3);
        // Normal points away from the inside corner at the origin.
        let n = m.triangle_normal(0);
        assert!(n.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn sphere_area_close_to_analytic() {
        let m = marching_cubes(&sphere(64, 0.3, 0.05), 0.5).unwrap();
        let exact = 4.0 * std::f64::consts::PI * 0.09;
        assert!((m.area() - exact).abs() / exact < 0.05, "area {}", m.area());
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn binary_sphere_is_closed() {
        let m = marching_cubes(&sphere(24, 0.3, 0.05).binarized(0.5), 0.5).unwrap();
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        m.validate().unwrap();
    }

    #[test]
    fn two_blobs_give_two_components() {
        let h = 1.0 / 31.0;
        let v = ScalarVolume::from_fn([32; 3], [h; 3], |x, y, z| {
            let d1 = ((x - 0.25).powi(2) + (y - 0.5).powi(2) + (z - 0.5).powi(2)).sqrt();
            let d2 = ((x - 0.75).powi(2) + (y - 0.5).powi(2) + (z - 0.5).powi(2)).sqrt();
            (0.5 + (0.15 - d1.min(d2)) / 0.05).clamp(0.0, 1.0)
        })
        .unwrap();
        let m = marching_cubes(&v, 0.5).unwrap();
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 4);
    }

    #[test]
    fn random_fields_are_watertight_inside() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // Zero border keeps the surface closed.
            let n = 7;
            let v = ScalarVolume::from_fn([n; 3], [1.0; 3], |x, y, z| {
                let border = [x, y, z].iter().any(|&c| c == 0.0 || c == (n - 1) as f64);
                if border {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            });
            let m = marching_cubes(&v.unwrap(), 0.5).unwrap();
            assert!(m.is_watertight());
            assert!(m.is_consistently_oriented());
        }
    }
}
