//! Synthetic slice stacks with known geometry.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::Image;
use crate::io::FrameStack;
use crate::Result;

/// A bright disk whose center follows a path through the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskPhantom {
    pub frames: usize,
    pub size: usize,
    /// Radius as a fraction of the image width.
    pub radius: f64,
    pub intensity: f64,
    /// Edge softness in pixels; 0 gives a hard mask.
    pub edge_px: f64,
    pub motion: DiskMotion,
    /// Standard deviation of additive Gaussian noise (clamped to `[0, 1]`).
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiskMotion {
    /// Straight line from `from` to `to`.
    Linear { from: [f64; 2], to: [f64; 2] },
    /// `center + amplitude * sin(2 pi cycles t)` along x.
    Sinusoidal { center: [f64; 2], amplitude: f64, cycles: f64 },
}

impl DiskMotion {
    pub fn center(&self, t: f64) -> [f64; 2] {
        match *self {
            DiskMotion::Linear { from, to } => [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])],
            DiskMotion::Sinusoidal { center, amplitude, cycles } => [
                center[0] + amplitude * (2.0 * std::f64::consts::PI * cycles * t).sin(),
                center[1],
            ],
        }
    }
}

impl DiskPhantom {
    /// Disk moving left to right across a 64x64 frame.
    pub fn translating(frames: usize, size: usize) -> Self {
        Self {
            frames,
            size,
            radius: 0.16,
            intensity: 0.8,
            edge_px: 1.5,
            motion: DiskMotion::Linear {
                from: [0.3, 0.5],
                to: [0.7, 0.5],
            },
            noise: 0.0,
            seed: 0,
        }
    }

    /// Disk oscillating horizontally, one full period over the stack.
    pub fn sinusoidal(frames: usize, size: usize) -> Self {
        Self {
            motion: DiskMotion::Sinusoidal {
                center: [0.5, 0.5],
                amplitude: 0.22,
                cycles: 1.0,
            },
            ..Self::translating(frames, size)
        }
    }

    /// Noise-free frame at time `t`.
    pub fn clean_frame(&self, t: f64) -> Result<Image> {
        let c = self.motion.center(t);
        let edge = self.edge_px / self.size as f64;
        Image::from_fn(self.size, self.size, |x, y| {
            let d = (x - c[0]).hypot(y - c[1]);
            self.intensity * soft_step(self.radius - d, edge)
        })
    }

    pub fn stack(&self) -> Result<FrameStack> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise.max(0.0)).expect("finite noise level");
        let frames = (0..self.frames)
            .map(|k| {
                let img = self.clean_frame(k as f64 / (self.frames - 1) as f64)?;
                if self.noise <= 0.0 {
                    return Ok(img);
                }
                let px = img
                    .pixels()
                    .iter()
                    .map(|&v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect();
                Image::from_pixels(self.size, self.size, px)
            })
            .collect::<Result<Vec<_>>>()?;
        FrameStack::from_frames(frames)
    }
}

/// Smooth 0-to-1 ramp of width `2 * edge` centred on `x = 0`; a hard step
/// when `edge` is 0.
fn soft_step(x: f64, edge: f64) -> f64 {
    if edge <= 0.0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    0.5 * (1.0 + (x / edge).tanh())
}

/// Binary cross-sections of a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePhantom {
    pub frames: usize,
    pub size: usize,
    pub center: [f64; 3],
    pub radius: f64,
    /// World distance between consecutive slices, in image widths.
    pub slice_spacing: f64,
}

impl SpherePhantom {
    /// Sphere spanning most of a cube whose side equals the image width.
    pub fn new(frames: usize, size: usize) -> Self {
        Self {
            frames,
            size,
            center: [0.5, 0.5, 0.5],
            radius: 0.35,
            slice_spacing: 1.0 / (frames - 1) as f64,
        }
    }

    /// Height of slice `k`.
    pub fn slice_z(&self, k: usize) -> f64 {
        k as f64 * self.slice_spacing
    }

    pub fn stack(&self) -> Result<FrameStack> {
        let frames = (0..self.frames)
            .map(|k| {
                let dz = self.slice_z(k) - self.center[2];
                let r2 = self.radius * self.radius - dz * dz;
                Image::from_fn(self.size, self.size, |x, y| {
                    let d2 = (x - self.center[0]).powi(2) + (y - self.center[1]).powi(2);
                    if r2 > 0.0 && d2 <= r2 {
                        1.0
                    } else {
                        0.0
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FrameStack::from_frames(frames)
    }

    /// Uniform points on the sphere surface, generated by normalizing
    /// Gaussian vectors.
    pub fn surface_points(&self, count: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..count)
            .map(|_| loop {
                let v: [f64; 3] = std::array::from_fn(|_| normal.sample(&mut rng));
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-12 {
                    break std::array::from_fn(|a| self.center[a] + self.radius * v[a] / n);
                }
            })
            .collect()
    }
}
