//! Objective terms and their assembly.

use serde::{Deserialize, Serialize};

use crate::gaussian::{Mode, Scene};
use crate::image::Image;
use crate::metrics::ssim;
use crate::render::{render_with_grad, FrameLossWeights, GradientBuffer};
use crate::train::config::LossWeights;
use crate::{Error, Result};

/// Unweighted loss terms plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub l1: f64,
    pub ssim: f64,
    pub interp: f64,
    pub sigma: f64,
    pub total: f64,
}

impl LossParts {
    fn finish(mut self, w: &LossWeights) -> Self {
        self.total = w.l1 * self.l1 + w.ssim * self.ssim + w.interp * self.interp + w.sigma * self.sigma;
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.l1, self.ssim, self.interp, self.sigma, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

impl LossWeights {
    /// Weights actually used for `mode`: mesh training keeps only the L1
    /// and temporal-spread terms.
    pub fn for_mode(&self, mode: Mode) -> LossWeights {
        match mode {
            Mode::Interpolation => *self,
            Mode::Mesh => LossWeights {
                ssim: 0.0,
                interp: 0.0,
                ..*self
            },
        }
    }
}

/// Lower edge of the temporal-spread band for `frame_count` training frames.
pub fn sigma_band_low(frame_count: usize) -> f64 {
    2.0 / frame_count as f64
}

/// Mean hinge penalty pushing every `sigma_t` into `[2/N, 1]`.
pub fn loss_sigma(scene: &Scene) -> f64 {
    if scene.is_empty() {
        return 0.0;
    }
    let low = sigma_band_low(scene.frame_count);
    let sum: f64 = scene
        .gaussians
        .iter()
        .map(|g| {
            let s = g.temporal_spread();
            (low - s).max(0.0) + (s - 1.0).max(0.0)
        })
        .sum();
    sum / scene.len() as f64
}

/// Adds `weight * d(loss_sigma)` to `grads` (with respect to `log sigma_t`).
pub fn add_sigma_grad(scene: &Scene, weight: f64, grads: &mut GradientBuffer) {
    if scene.is_empty() || weight == 0.0 {
        return;
    }
    let low = sigma_band_low(scene.frame_count);
    let n = scene.len() as f64;
    for (g, out) in scene.gaussians.iter().zip(&mut grads.gaussians) {
        let s = g.temporal_spread();
        let d_sigma = if s < low {
            -1.0
        } else if s > 1.0 {
            1.0
        } else {
            0.0
        };
        out.log_temporal_spread += weight * d_sigma * s / n;
    }
}

fn mean_abs_error(a: &[Image], b: &[Image]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} targets",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        x.ensure_same_dims(y)?;
        total += x
            .pixels()
            .iter()
            .zip(y.pixels())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
            / x.pixels().len() as f64;
    }
    Ok(total / a.len() as f64)
}

/// Full interpolation objective over sets of frames.
pub fn loss_interp(
    rendered: &[Image],
    originals: &[Image],
    rendered_ibfr: &[Image],
    ibfr_targets: &[Image],
    scene: &Scene,
    weights: &LossWeights,
) -> Result<LossParts> {
    let mut parts = LossParts {
        l1: mean_abs_error(rendered, originals)?,
        interp: mean_abs_error(rendered_ibfr, ibfr_targets)?,
        sigma: loss_sigma(scene),
        ..LossParts::default()
    };
    if weights.ssim != 0.0 && !rendered.is_empty() {
        let mut s = 0.0;
        for (x, y) in rendered.iter().zip(originals) {
            s += 1.0 - ssim(x, y)?;
        }
        parts.ssim = s / rendered.len() as f64;
    }
    Ok(parts.finish(weights))
}

/// Mesh objective: L1 on the masks plus the temporal-spread penalty.
pub fn loss_mesh(
    rendered: &[Image],
    targets: &[Image],
    scene: &Scene,
    weights: &LossWeights,
) -> Result<LossParts> {
    let w = weights.for_mode(Mode::Mesh);
    let parts = LossParts {
        l1: mean_abs_error(rendered, targets)?,
        sigma: loss_sigma(scene),
        ..LossParts::default()
    };
    Ok(parts.finish(&w))
}

/// The frames scored in one optimization step.
#[derive(Debug, Clone)]
pub struct StepTargets<'a> {
    pub frame_time: f64,
    pub frame: &'a Image,
    /// In-between target `(t_alpha, I_alpha)`, when used.
    pub ibfr: Option<(f64, Image)>,
}

/// Loss for one step and its exact gradient with respect to every parameter.
pub fn objective_with_grad(
    scene: &Scene,
    targets: &StepTargets<'_>,
    weights: &LossWeights,
) -> Result<(LossParts, GradientBuffer)> {
    let (_, frame_loss, mut grads) = render_with_grad(
        scene,
        targets.frame_time,
        targets.frame,
        FrameLossWeights {
            l1: weights.l1,
            ssim: weights.ssim,
        },
    )?;
    let mut parts = LossParts {
        l1: frame_loss.l1,
        ssim: frame_loss.ssim,
        sigma: loss_sigma(scene),
        ..LossParts::default()
    };
    if let Some((t, target)) = &targets.ibfr {
        let (_, interp_loss, g) = render_with_grad(
            scene,
            *t,
            target,
            FrameLossWeights {
                l1: weights.interp,
                ssim: 0.0,
            },
        )?;
        parts.interp = interp_loss.l1;
        grads.add_scaled(&g, 1.0);
    }
    add_sigma_grad(scene, weights.sigma, &mut grads);
    Ok((parts.finish(weights), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::FoldedGaussian;
    use approx::assert_relative_eq;

    fn scene_with_spreads(spreads: &[f64], n: usize) -> Scene {
        let mut s = Scene::new(n, 16, 16, Mode::Interpolation, 1, 1);
        for &sigma in spreads {
            s.gaussians
                .push(FoldedGaussian::isotropic([0.5, 0.5], 0.5, sigma, 0.1, 0.5, 0.5, 1, 1));
        }
        s
    }

    #[test]
    fn sigma_penalty_examples() {
        assert_relative_eq!(loss_sigma(&scene_with_spreads(&[0.05], 10)), 0.15, epsilon = 1e-12);
        assert_eq!(loss_sigma(&scene_with_spreads(&[0.5], 10)), 0.0);
        assert_relative_eq!(loss_sigma(&scene_with_spreads(&[1.2, 0.5], 10)), 0.1, epsilon = 1e-12);
        assert_eq!(loss_sigma(&scene_with_spreads(&[], 10)), 0.0);
    }

    #[test]
    fn sigma_subgradient() {
        let s = scene_with_spreads(&[0.05, 0.5, 1.5], 10);
        let mut g = GradientBuffer::zeros_like(&s);
        add_sigma_grad(&s, 1.0, &mut g);
        // d/d(log s) = sign * s / n
        assert_relative_eq!(g.gaussians[0].log_temporal_spread, -0.05 / 3.0, epsilon = 1e-12);
        assert_eq!(g.gaussians[1].log_temporal_spread, 0.0);
        assert_relative_eq!(g.gaussians[2].log_temporal_spread, 1.5 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn interp_loss_examples() {
        let s = scene_with_spreads(&[0.5], 10);
        let img = Image::from_fn(16, 16, |x, y| 0.2 + 0.5 * x * y).unwrap();
        let w = LossWeights::default();
        let perfect = loss_interp(&[img.clone()], &[img.clone()], &[img.clone()], &[img.clone()], &s, &w).unwrap();
        assert_relative_eq!(perfect.total, 0.0, epsilon = 1e-12);

        let shifted = Image::from_fn(16, 16, |x, y| 0.3 + 0.5 * x * y).unwrap();
        let l1_only = LossWeights { l1: 1.0, ssim: 0.0, interp: 0.0, sigma: 0.0 };
        let p = loss_interp(&[shifted], &[img.clone()], &[], &[], &s, &l1_only).unwrap();
        assert_relative_eq!(p.total, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn mesh_loss_examples() {
        let s = scene_with_spreads(&[0.5], 10);
        let a = Image::filled(4, 4, 0.25).unwrap();
        let b = Image::filled(4, 4, 0.0).unwrap();
        let w = LossWeights { l1: 0.7, ssim: 0.3, interp: 0.2, sigma: 0.0 };
        let p = loss_mesh(&[a.clone()], &[b.clone()], &s, &w).unwrap();
        assert_relative_eq!(p.total, 0.25 * 0.7, epsilon = 1e-12);
        assert_eq!(loss_mesh(&[a.clone()], &[a.clone()], &s, &w).unwrap().total, 0.0);

        let reduced = LossWeights { ssim: 0.0, interp: 0.0, ..w };
        let via_interp = loss_interp(&[a.clone()], &[b.clone()], &[], &[], &s, &reduced).unwrap();
        assert_relative_eq!(via_interp.total, p.total);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let s = scene_with_spreads(&[0.5], 10);
        let a = Image::filled(4, 4, 0.25).unwrap();
        let b = Image::filled(4, 5, 0.0).unwrap();
        assert!(loss_mesh(&[a], &[b], &s, &LossWeights::default()).is_err());
    }
}
