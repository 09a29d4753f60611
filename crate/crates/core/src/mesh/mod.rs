//! Dense volume rendering, isosurface extraction and surface distances.

pub mod distance;
pub mod kdtree;
pub mod marching;
pub mod obj;
pub mod tables;
pub mod trimesh;
pub mod volume;

pub use distance::{chamfer, directed_distances, hausdorff, hd95, quantile, surface_distances, SurfaceDistances};
pub use kdtree::KdTree;
pub use marching::marching_cubes;
pub use obj::{read_obj, write_obj};
pub use trimesh::{sample_surface, Point3, TriMesh};
pub use volume::{render_volume, upsampled_count, ScalarVolume};

/// Surface samples per mesh used for distance metrics.
pub const DEFAULT_SURFACE_SAMPLES: usize = 10_000;

use crate::gaussian::Scene;
use crate::Result;

/// Settings for turning a trained scene into a surface.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeshOptions {
    /// Rendered slices per original slice interval.
    pub upsample: usize,
    pub iso: f64,
    /// Threshold the rendered volume before extraction.
    pub binarize: bool,
    /// World distance between consecutive original slices, in image widths;
    /// `None` means one pixel width.
    pub slice_spacing: Option<f64>,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            upsample: 4,
            iso: 0.5,
            binarize: false,
            slice_spacing: None,
        }
    }
}

/// Renders a dense volume from `scene` and extracts a closed surface.
///
/// Vertices are in normalized image coordinates for `x`/`y` (pixel centers at
/// `(col + 0.5) / width`) and world slice height for `z`, slice 0 at `z = 0`.
pub fn extract_mesh(scene: &Scene, opts: &MeshOptions) -> Result<TriMesh> {
    if opts.upsample == 0 {
        return Err(crate::Error::InvalidArgument("upsample factor must be positive".into()));
    }
    let (w, h) = (scene.width, scene.height);
    let spacing_z = opts.slice_spacing.unwrap_or(1.0 / w as f64) / opts.upsample as f64;
    let nz = upsampled_count(scene.frame_count.max(2), opts.upsample);
    let spacing = [1.0 / w as f64, 1.0 / h as f64, spacing_z];
    let mut vol = render_volume(scene, w, h, nz, spacing)?;
    if opts.binarize {
        vol = vol.binarized(opts.iso);
    }
    let mut mesh = marching_cubes(&pad(&vol), opts.iso)?;
    let shift = [0.5 * spacing[0] - spacing[0], 0.5 * spacing[1] - spacing[1], -spacing[2]];
    for v in &mut mesh.vertices {
        (0..3).for_each(|a| v[a] += shift[a]);
    }
    Ok(mesh)
}

/// Surrounds a volume with one layer of zeros so every surface closes.
pub fn pad(vol: &ScalarVolume) -> ScalarVolume {
    let [nx, ny, nz] = vol.dims;
    let dims = [nx + 2, ny + 2, nz + 2];
    let mut values = vec![0.0; dims.iter().product()];
    for k in 0..nz {
        for j in 0..ny {
            let src = vol.index(0, j, k);
            let dst = ((k + 1) * dims[1] + j + 1) * dims[0] + 1;
            values[dst..dst + nx].copy_from_slice(&vol.values[src..src + nx]);
        }
    }
    ScalarVolume {
        dims,
        spacing: vol.spacing,
        values,
    }
}
