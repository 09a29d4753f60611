//! Fixtures shared by the benchmarks.

use foldsplat_core::gaussian::{FoldedGaussian, Mode, Scene};
use foldsplat_core::mesh::{Point3, ScalarVolume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `count` random Gaussians spread over the unit square and time interval.
pub fn random_scene(count: usize, size: usize, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Scene::new(17, size, size, Mode::Interpolation, 7, 2);
    for _ in 0..count {
        let mut g = FoldedGaussian::isotropic(
            [rng.random(), rng.random()],
            rng.random(),
            rng.random_range(0.1..0.6),
            rng.random_range(0.01..0.06),
            rng.random_range(0.05..0.5),
            rng.random(),
            7,
            2,
        );
        g.rotation = rng.random_range(-1.5..1.5);
        g.motion_coeffs[0][0] = rng.random_range(-0.2..0.2);
        scene.gaussians.push(g);
    }
    scene
}

/// Smooth ball in an `n^3` grid.
pub fn ball_volume(n: usize) -> ScalarVolume {
    let h = 1.0 / (n - 1) as f64;
    ScalarVolume::from_fn([n; 3], [h; 3], |x, y, z| {
        let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2) + (z - 0.5).powi(2)).sqrt();
        (0.5 + 4.0 * (0.35 - r)).clamp(0.0, 1.0)
    })
    .unwrap()
}

pub fn random_points(count: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}
