use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub type Point3 = [f64; 3];

/// Indexed triangle mesh in world units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn corners(&self, t: usize) -> [Point3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    /// Unnormalized normal, twice the triangle area in length.
    pub fn triangle_normal(&self, t: usize) -> Point3 {
        let [a, b, c] = self.corners(t);
        cross(sub(b, a), sub(c, a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * norm(self.triangle_normal(t))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Volume enclosed by a closed mesh; positive when normals face outward.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                let n = cross(b, c);
                a[0] * n[0] + a[1] * n[1] + a[2] * n[2]
            })
            .sum::<f64>()
            / 6.0
    }

    fn edge_uses(&self) -> HashMap<(usize, usize), usize> {
        let mut uses = HashMap::new();
        for t in &self.triangles {
            for s in 0..3 {
                let (a, b) = (t[s], t[(s + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        uses
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_uses().values().all(|&n| n == 2)
    }

    /// Every directed edge occurs at most once, so neighbouring triangles
    /// agree on winding.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.triangles
            .iter()
            .all(|t| (0..3).all(|s| seen.insert((t[s], t[(s + 1) % 3]))))
    }

    pub fn edge_count(&self) -> usize {
        self.edge_uses().len()
    }

    /// `V - E + F`, counting only vertices referenced by some triangle.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Checks index ranges and rejects zero-area triangles.
    pub fn validate(&self) -> Result<()> {
        for (k, t) in self.triangles.iter().enumerate() {
            if let Some(&i) = t.iter().find(|&&i| i >= self.vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {k} references vertex {i} of {}",
                    self.vertices.len()
                )));
            }
            if self.triangle_area(k) <= 0.0 {
                return Err(Error::InvalidArgument(format!("triangle {k} has zero area")));
            }
        }
        Ok(())
    }
}

/// Area-weighted uniform samples on the mesh surface.
pub fn sample_surface(mesh: &TriMesh, count: usize, seed: u64) -> Result<Vec<Point3>> {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let pick = rng.random::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= pick).min(cumulative.len() - 1);
        let [a, b, c] = mesh.corners(t);
        let r1 = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        out.push([
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TriMesh {
        TriMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    fn tetrahedron() -> TriMesh {
        TriMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            triangles: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        }
    }

    #[test]
    fn tetrahedron_topology() {
        let m = tetrahedron();
        assert!(m.is_watertight());
        assert!(m.is_consistently_oriented());
        assert_eq!(m.euler_characteristic(), 2);
        assert!((m.signed_volume() - 1.0 / 6.0).abs() < 1e-15);
        assert!(!square().is_watertight());
    }

    #[test]
    fn samples_inside_single_triangle() {
        let m = TriMesh {
            vertices: vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
        };
        for p in sample_surface(&m, 1000, 3).unwrap() {
            assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] / 2.0 + p[1] <= 1.0 + 1e-12);
            assert_eq!(p[2], 0.0);
        }
    }

    #[test]
    fn equal_areas_split_evenly() {
        let pts = sample_surface(&square(), 10_000, 1).unwrap();
        // Triangle [0, 1, 2] is the half below the diagonal y = x.
        let below = pts.iter().filter(|p| p[1] < p[0]).count() as f64 / 1e4;
        assert!((below - 0.5).abs() < 0.03, "{below}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = tetrahedron();
        assert_eq!(sample_surface(&m, 50, 9).unwrap(), sample_surface(&m, 50, 9).unwrap());
        assert_ne!(sample_surface(&m, 50, 9).unwrap(), sample_surface(&m, 50, 10).unwrap());
    }

    #[test]
    fn empty_mesh_rejected() {
        assert!(matches!(sample_surface(&TriMesh::default(), 10, 0), Err(Error::EmptyMesh)));
    }
}
