//! Adam with bias correction and per-group learning rates.

use crate::gaussian::{FoldedGaussian, Scene};
use crate::render::GradientBuffer;
use crate::train::config::LearningRates;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-15;

/// First and second moments for every parameter of every Gaussian.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(scene: &Scene) -> Self {
        let mut s = Self::default();
        s.resize_to(scene);
        s
    }

    fn resize_to(&mut self, scene: &Scene) {
        self.first.resize_with(scene.len(), Vec::new);
        self.second.resize_with(scene.len(), Vec::new);
        for (i, g) in scene.gaussians.iter().enumerate() {
            let n = g.param_count();
            self.first[i].resize(n, 0.0);
            self.second[i].resize(n, 0.0);
        }
    }

    /// Rebuilds the moment arrays after densification. `origin[i]` is the
    /// pre-densification index whose moments Gaussian `i` inherits, or
    /// `None` for a fresh Gaussian starting from zero moments.
    pub fn remap(&mut self, origin: &[Option<usize>], scene: &Scene) {
        let pick = |src: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            origin
                .iter()
                .zip(&scene.gaussians)
                .map(|(o, g)| match o {
                    Some(k) => src[*k].clone(),
                    None => vec![0.0; g.param_count()],
                })
                .collect()
        };
        self.first = pick(&self.first);
        self.second = pick(&self.second);
    }

    pub fn moments(&self, gaussian: usize) -> (&[f64], &[f64]) {
        (&self.first[gaussian], &self.second[gaussian])
    }
}

/// One Adam update of every parameter. `progress` in `[0, 1]` drives the
/// spatial-mean rate decay. Any non-finite gradient aborts the step before
/// anything is modified.
pub fn adam_step(
    scene: &mut Scene,
    grads: &GradientBuffer,
    state: &mut AdamState,
    lrs: &LearningRates,
    progress: f64,
) -> Result<()> {
    if grads.len() != scene.len() {
        return Err(Error::InvalidArgument(format!(
            "gradient buffer has {} entries for {} gaussians",
            grads.len(),
            scene.len()
        )));
    }
    for (i, g) in grads.gaussians.iter().enumerate() {
        let mut bad = None;
        g.for_each_param(|kind, v| {
            if bad.is_none() && !v.is_finite() {
                bad = Some(kind);
            }
        });
        if let Some(kind) = bad {
            return Err(Error::NonFiniteGradient {
                gaussian: i,
                param: kind.name(),
            });
        }
    }
    state.resize_to(scene);
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - BETA1.powi(t);
    let bias2 = 1.0 - BETA2.powi(t);

    for (i, (param, grad)) in scene.gaussians.iter_mut().zip(&grads.gaussians).enumerate() {
        let flat = flatten(grad);
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        let mut k = 0;
        param.for_each_param_mut(|kind, p| {
            let g = flat[k];
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * g;
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * g * g;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            *p -= lrs.rate(kind, progress) * m_hat / (v_hat.sqrt() + EPSILON);
            k += 1;
        });
    }
    Ok(())
}

fn flatten(g: &FoldedGaussian) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.param_count());
    g.for_each_param(|_, v| out.push(v));
    out
}

/// Keeps parameters inside their admissible ranges after an update.
pub(crate) fn project(scene: &mut Scene) {
    for g in &mut scene.gaussians {
        g.color = g.color.clamp(0.0, 1.0);
        g.temporal_mean = g.temporal_mean.clamp(0.0, 1.0);
        g.opacity_logit = g.opacity_logit.clamp(-20.0, 20.0);
        for s in &mut g.log_scales {
            *s = s.clamp(-12.0, 1.0);
        }
        g.log_temporal_spread = g.log_temporal_spread.clamp(-12.0, 3.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Mode;
    use approx::assert_relative_eq;

    fn scene() -> Scene {
        let mut s = Scene::new(4, 8, 8, Mode::Interpolation, 2, 1);
        s.gaussians
            .push(FoldedGaussian::isotropic([0.3, 0.6], 0.4, 0.3, 0.1, 0.5, 0.5, 2, 1));
        s
    }

    fn constant_grads(s: &Scene, value: f64) -> GradientBuffer {
        let mut g = GradientBuffer::zeros_like(s);
        g.gaussians[0].for_each_param_mut(|_, v| *v = value);
        g
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut s = scene();
        let before = s.clone();
        let mut st = AdamState::new(&s);
        let g = constant_grads(&s, 0.3);
        adam_step(&mut s, &g, &mut st, &LearningRates::default(), 0.0).unwrap();
        let m1 = st.moments(0).0.to_vec();
        let mut after_first = s.clone();
        adam_step(&mut after_first, &constant_grads(&s, 0.0), &mut st, &LearningRates::default(), 0.0).unwrap();
        assert!(st.moments(0).0.iter().zip(&m1).all(|(a, b)| (a - BETA1 * b).abs() < 1e-15));

        let mut fresh = before.clone();
        let mut st = AdamState::new(&fresh);
        let g = constant_grads(&fresh, 0.0);
        adam_step(&mut fresh, &g, &mut st, &LearningRates::default(), 0.0).unwrap();
        assert_eq!(fresh, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = scene();
        let before = s.clone();
        let mut st = AdamState::new(&s);
        let lrs = LearningRates::default();
        let g = constant_grads(&s, -0.7);
        adam_step(&mut s, &g, &mut st, &lrs, 0.0).unwrap();
        assert_relative_eq!(s.gaussians[0].color - before.gaussians[0].color, lrs.color, epsilon = 1e-12);
        assert_relative_eq!(
            s.gaussians[0].spatial_mean[0] - before.gaussians[0].spatial_mean[0],
            lrs.spatial_mean,
            epsilon = 1e-12
        );
    }

    #[test]
    fn opposite_steps_follow_bias_corrected_moments() {
        let mut s = scene();
        let before = s.clone();
        let mut st = AdamState::new(&s);
        let lrs = LearningRates::default();
        let g = constant_grads(&s, 1.0);
        adam_step(&mut s, &g, &mut st, &lrs, 0.0).unwrap();
        let g = constant_grads(&s, -1.0);
        adam_step(&mut s, &g, &mut st, &lrs, 0.0).unwrap();
        // Step 2: m = 0.9 * 0.1 - 0.1 = -0.01, m_hat = -0.01 / 0.19,
        // v_hat = (0.999 * 0.001 + 0.001) / (1 - 0.999^2) = 1.
        let second = -0.01 / (1.0 - BETA1 * BETA1);
        let expected = -lrs.color * (1.0 + second);
        let moved = s.gaussians[0].color - before.gaussians[0].color;
        assert_relative_eq!(moved, expected, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = scene();
        let mut st = AdamState::new(&s);
        let mut g = GradientBuffer::zeros_like(&s);
        g.gaussians[0].opacity_logit = f64::NAN;
        let err = adam_step(&mut s, &g, &mut st, &LearningRates::default(), 0.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { gaussian: 0, param: "opacity_logit" }));
    }
}
