//! Adaptive density control: clone or split Gaussians with large positional
//! gradients, drop nearly transparent ones.

use nalgebra::Vector2;

use crate::gaussian::{sym_eigen, Scene};
use crate::render::GradientBuffer;
use crate::train::config::TrainConfig;

/// Scale divisor applied to both halves of a split.
pub const SPLIT_SHRINK: f64 = 1.6;
/// Offset of a clone along the major axis, in major-axis standard deviations.
pub const CLONE_JITTER: f64 = 0.1;
/// Offset of each split half along the major axis, in standard deviations.
pub const SPLIT_OFFSET: f64 = 0.5;

/// Running sums of spatial-mean gradient norms, measured with respect to
/// pixel-unit positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensifyStats {
    grad_sum: Vec<f64>,
    seen: Vec<u32>,
}

impl DensifyStats {
    pub fn new(len: usize) -> Self {
        Self {
            grad_sum: vec![0.0; len],
            seen: vec![0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.grad_sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad_sum.is_empty()
    }

    /// Adds one iteration's gradients; Gaussians with an exactly zero
    /// positional gradient did not touch the rendered frames and are skipped.
    pub fn record(&mut self, grads: &GradientBuffer, width: usize, height: usize) {
        for i in 0..grads.len().min(self.len()) {
            let m = grads.gaussians[i].spatial_mean;
            let n = (m[0] / width as f64).hypot(m[1] / height as f64);
            if n > 0.0 {
                self.grad_sum[i] += n;
                self.seen[i] += 1;
            }
        }
    }

    /// Sets the accumulated mean for Gaussian `i` directly.
    pub fn force(&mut self, i: usize, mean_norm: f64) {
        self.grad_sum[i] = mean_norm;
        self.seen[i] = 1;
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.seen[i] == 0 {
            0.0
        } else {
            self.grad_sum[i] / self.seen[i] as f64
        }
    }
}

/// Result of one densification pass.
#[derive(Debug, Clone)]
pub struct DensifyOutcome {
    pub scene: Scene,
    /// For every output Gaussian, the input index it continues, or `None`
    /// for a newly created one.
    pub origin: Vec<Option<usize>>,
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

pub fn densify_and_prune(scene: &Scene, stats: &DensifyStats, config: &TrainConfig) -> DensifyOutcome {
    let mut out = scene.clone();
    let mut origin: Vec<Option<usize>> = (0..scene.len()).map(Some).collect();
    let mut cloned = 0;
    let mut split = 0;
    let mut budget = config.max_gaussians.saturating_sub(scene.len());

    for i in 0..scene.len().min(stats.len()) {
        if budget == 0 {
            break;
        }
        if stats.mean(i) <= config.densify_grad_threshold {
            continue;
        }
        let g = &scene.gaussians[i];
        let (l1, _, v1, _) = sym_eigen(&g.spatial_cov());
        let major = l1.sqrt();
        let axis: Vector2<f64> = v1;
        let max_scale = g.log_scales[0].max(g.log_scales[1]).exp();

        if max_scale > config.split_scale_fraction {
            let shift = axis * (SPLIT_OFFSET * major);
            let mut a = g.clone();
            let shrink = SPLIT_SHRINK.ln();
            for s in &mut a.log_scales {
                *s -= shrink;
            }
            let mut b = a.clone();
            a.spatial_mean = [g.spatial_mean[0] + shift.x, g.spatial_mean[1] + shift.y];
            b.spatial_mean = [g.spatial_mean[0] - shift.x, g.spatial_mean[1] - shift.y];
            out.gaussians[i] = a;
            origin[i] = None;
            out.gaussians.push(b);
            origin.push(None);
            split += 1;
        } else {
            let shift = axis * (CLONE_JITTER * major);
            let mut c = g.clone();
            c.spatial_mean = [g.spatial_mean[0] + shift.x, g.spatial_mean[1] + shift.y];
            out.gaussians.push(c);
            origin.push(None);
            cloned += 1;
        }
        budget -= 1;
    }

    let before = out.gaussians.len();
    let keep: Vec<bool> = out
        .gaussians
        .iter()
        .map(|g| g.opacity() >= config.prune_opacity_threshold)
        .collect();
    let mut k = 0;
    out.gaussians.retain(|_| {
        k += 1;
        keep[k - 1]
    });
    let mut k = 0;
    origin.retain(|_| {
        k += 1;
        keep[k - 1]
    });
    let pruned = before - out.gaussians.len();

    DensifyOutcome {
        scene: out,
        origin,
        cloned,
        split,
        pruned,
    }
}
