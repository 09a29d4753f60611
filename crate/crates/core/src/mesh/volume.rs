use rayon::prelude::*;

use crate::gaussian::Scene;
use crate::render::render_frame;
use crate::{Error, Result};

/// Dense scalar field on a regular grid; voxel `(i, j, k)` sits at world
/// position `(i * sx, j * sy, k * sz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// `z`-major slices, each row-major with `x` fastest.
    pub values: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], values: Vec<f64>) -> Result<Self> {
        let count = dims.iter().product::<usize>();
        if values.len() != count {
            return Err(Error::InvalidArgument(format!(
                "volume {dims:?} needs {count} values, got {}",
                values.len()
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("spacing {spacing:?} must be positive")));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("volume value {v} outside [0, 1]")));
        }
        Ok(Self { dims, spacing, values })
    }

    /// Samples `f(x, y, z)` at every voxel's world position.
    pub fn from_fn(dims: [usize; 3], spacing: [f64; 3], mut f: impl FnMut(f64, f64, f64) -> f64) -> Result<Self> {
        let [nx, ny, nz] = dims;
        let mut values = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    values.push(f(i as f64 * spacing[0], j as f64 * spacing[1], k as f64 * spacing[2]));
                }
            }
        }
        Self::new(dims, spacing, values)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            i as f64 * self.spacing[0],
            j as f64 * self.spacing[1],
            k as f64 * self.spacing[2],
        ]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.dims[0] * self.dims[1];
        &self.values[k * n..(k + 1) * n]
    }

    /// Hard threshold: 1 where the value is at least `threshold`, else 0.
    pub fn binarized(&self, threshold: f64) -> ScalarVolume {
        ScalarVolume {
            values: self
                .values
                .iter()
                .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
                .collect(),
            ..self.clone()
        }
    }
}

/// Renders `nz` slices at evenly spaced times `k / (nz - 1)`, each at
/// `nx` x `ny` pixels.
pub fn render_volume(scene: &Scene, nx: usize, ny: usize, nz: usize, spacing: [f64; 3]) -> Result<ScalarVolume> {
    if nz < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 slices, got {nz}")));
    }
    let slices = (0..nz)
        .into_par_iter()
        .map(|k| render_frame(scene, k as f64 / (nz - 1) as f64, nx, ny))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(nx * ny * nz);
    for s in &slices {
        values.extend_from_slice(s.pixels());
    }
    ScalarVolume::new([nx, ny, nz], spacing, values)
}

/// Slice count after inserting `factor - 1` slices between every pair.
pub fn upsampled_count(frames: usize, factor: usize) -> usize {
    (frames - 1) * factor + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{FoldedGaussian, Mode};

    #[test]
    fn empty_scene_gives_zero_volume() {
        let s = Scene::new(4, 8, 8, Mode::Mesh, 2, 2);
        let v = render_volume(&s, 8, 8, 5, [1.0; 3]).unwrap();
        assert_eq!(v.values.len(), 320);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn slices_match_frame_renders_at_training_times() {
        let mut s = Scene::new(3, 16, 16, Mode::Mesh, 2, 2);
        s.gaussians
            .push(FoldedGaussian::isotropic([0.4, 0.5], 0.5, 0.3, 0.1, 0.9, 0.8, 2, 2));
        let v = render_volume(&s, 16, 16, 3, [1.0; 3]).unwrap();
        for k in 0..3 {
            let f = render_frame(&s, k as f64 / 2.0, 16, 16).unwrap();
            assert_eq!(v.slice(k), f.pixels());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScalarVolume::new([2, 2, 2], [1.0; 3], vec![0.0; 7]).is_err());
        assert!(ScalarVolume::new([2, 2, 2], [1.0, 0.0, 1.0], vec![0.0; 8]).is_err());
        assert!(ScalarVolume::new([2, 2, 2], [1.0; 3], vec![2.0; 8]).is_err());
    }

    #[test]
    fn upsampled_counts() {
        assert_eq!(upsampled_count(33, 4), 129);
        assert_eq!(upsampled_count(2, 1), 2);
    }
}
