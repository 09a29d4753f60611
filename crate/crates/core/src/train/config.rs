use serde::{Deserialize, Serialize};

use crate::gaussian::{Mode, ParamKind, SCALE_DEGREE};
use crate::{Error, Result};

/// Weights of the four objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Mean absolute error on original frames.
    pub l1: f64,
    /// `1 - SSIM` on original frames.
    pub ssim: f64,
    /// Mean absolute error on in-between frames.
    pub interp: f64,
    /// Temporal-spread band penalty.
    pub sigma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            l1: 0.8,
            ssim: 0.2,
            interp: 0.4,
            sigma: 0.1,
        }
    }
}

/// Per-group Adam learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub spatial_mean: f64,
    /// Final spatial-mean rate; the rate decays exponentially towards it.
    pub spatial_mean_final: f64,
    pub rotation: f64,
    pub log_scales: f64,
    pub polynomials: f64,
    pub temporal: f64,
    pub opacity: f64,
    pub color: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            spatial_mean: 2e-3,
            spatial_mean_final: 2e-5,
            rotation: 5e-3,
            log_scales: 5e-3,
            polynomials: 2e-3,
            temporal: 2e-3,
            opacity: 5e-3,
            color: 2.5e-3,
        }
    }
}

impl LearningRates {
    /// Rate for `kind` at `progress` in `[0, 1]` through training.
    pub fn rate(&self, kind: ParamKind, progress: f64) -> f64 {
        match kind {
            ParamKind::SpatialMean => {
                let p = progress.clamp(0.0, 1.0);
                if self.spatial_mean_final > 0.0 && self.spatial_mean > 0.0 {
                    (self.spatial_mean.ln() * (1.0 - p) + self.spatial_mean_final.ln() * p).exp()
                } else {
                    self.spatial_mean
                }
            }
            ParamKind::Rotation => self.rotation,
            ParamKind::LogScales => self.log_scales,
            ParamKind::MotionCoeffs | ParamKind::ScaleCoeffs => self.polynomials,
            ParamKind::TemporalMean | ParamKind::TemporalSpread => self.temporal,
            ParamKind::OpacityLogit => self.opacity,
            ParamKind::Color => self.color,
        }
    }
}

/// Every knob of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub weights: LossWeights,
    pub iterations: usize,
    pub learning_rates: LearningRates,
    /// Range the in-between blend factor is drawn from.
    pub ibfr_alpha_range: (f64, f64),
    pub densify: bool,
    pub densify_interval: usize,
    pub densify_start: usize,
    /// Last iteration at which densification may fire.
    pub densify_stop: usize,
    pub densify_grad_threshold: f64,
    /// Split instead of clone when the largest scale exceeds this fraction
    /// of the image width.
    pub split_scale_fraction: f64,
    pub prune_opacity_threshold: f64,
    pub max_gaussians: usize,
    pub initial_gaussian_count: usize,
    pub motion_degree: usize,
    pub scale_degree: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_mode(Mode::Interpolation)
    }
}

impl TrainConfig {
    pub fn for_mode(mode: Mode) -> Self {
        let iterations = 3000;
        Self {
            mode,
            weights: LossWeights::default(),
            iterations,
            learning_rates: LearningRates::default(),
            ibfr_alpha_range: (0.2, 0.8),
            densify: true,
            densify_interval: 200,
            densify_start: 500,
            densify_stop: (0.7 * iterations as f64) as usize,
            densify_grad_threshold: 2e-4,
            split_scale_fraction: 0.01,
            prune_opacity_threshold: 0.005,
            max_gaussians: 20_000,
            initial_gaussian_count: 2000,
            motion_degree: mode.default_motion_degree(),
            scale_degree: SCALE_DEGREE,
            rng_seed: 0,
        }
    }

    /// Sets `iterations` and moves the densification stop to 70% of it.
    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self.densify_stop = (0.7 * iterations as f64) as usize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if [w.l1, w.ssim, w.interp, w.sigma]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("loss weights must be finite and non-negative");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        let (lo, hi) = self.ibfr_alpha_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return bad("alpha range must satisfy 0 < lo <= hi < 1");
        }
        if self.densify_interval == 0
            || !(self.densify_grad_threshold > 0.0)
            || !(self.prune_opacity_threshold > 0.0)
            || !(self.split_scale_fraction > 0.0)
        {
            return bad("densification thresholds and interval must be positive");
        }
        if self.initial_gaussian_count == 0 {
            return bad("initial gaussian count must be positive");
        }
        Ok(())
    }

    /// Applies one `key=value` setting, as found in config files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value `{v}` for `{key}`")))
        }
        let lr = &mut self.learning_rates;
        match key {
            "mode" => self.mode = value.parse().map_err(Error::InvalidArgument)?,
            "lambda1" | "l1" => self.weights.l1 = num(key, value)?,
            "lambda2" | "ssim" => self.weights.ssim = num(key, value)?,
            "lambda3" | "interp" => self.weights.interp = num(key, value)?,
            "lambda4" | "sigma" => self.weights.sigma = num(key, value)?,
            "iterations" => *self = self.clone().with_iterations(num(key, value)?),
            "lr_mean" => lr.spatial_mean = num(key, value)?,
            "lr_mean_final" => lr.spatial_mean_final = num(key, value)?,
            "lr_rotation" => lr.rotation = num(key, value)?,
            "lr_scales" => lr.log_scales = num(key, value)?,
            "lr_poly" => lr.polynomials = num(key, value)?,
            "lr_temporal" => lr.temporal = num(key, value)?,
            "lr_opacity" => lr.opacity = num(key, value)?,
            "lr_color" => lr.color = num(key, value)?,
            "alpha_min" => self.ibfr_alpha_range.0 = num(key, value)?,
            "alpha_max" => self.ibfr_alpha_range.1 = num(key, value)?,
            "densify" => self.densify = num(key, value)?,
            "densify_interval" => self.densify_interval = num(key, value)?,
            "densify_start" => self.densify_start = num(key, value)?,
            "densify_stop" => self.densify_stop = num(key, value)?,
            "densify_grad_threshold" => self.densify_grad_threshold = num(key, value)?,
            "split_scale_fraction" => self.split_scale_fraction = num(key, value)?,
            "prune_opacity_threshold" => self.prune_opacity_threshold = num(key, value)?,
            "max_gaussians" => self.max_gaussians = num(key, value)?,
            "initial_gaussian_count" | "gaussians" => {
                self.initial_gaussian_count = num(key, value)?
            }
            "motion_degree" => self.motion_degree = num(key, value)?,
            "scale_degree" => self.scale_degree = num(key, value)?,
            "seed" | "rng_seed" => self.rng_seed = num(key, value)?,
            other => {
                return Err(Error::InvalidArgument(format!("unknown config key `{other}`")))
            }
        }
        Ok(())
    }

    /// Parses a plain `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "config".into(),
                line: n + 1,
                msg: "expected key=value".into(),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
        let mesh = TrainConfig::for_mode(Mode::Mesh);
        assert_eq!(mesh.motion_degree, 2);
        assert_eq!(TrainConfig::default().motion_degree, 7);
    }

    #[test]
    fn config_text_overrides() {
        let mut c = TrainConfig::default();
        c.apply_text("# demo\niterations = 1000\nlambda3=0\nseed=7\n").unwrap();
        assert_eq!(c.iterations, 1000);
        assert_eq!(c.densify_stop, 700);
        assert_eq!(c.weights.interp, 0.0);
        assert_eq!(c.rng_seed, 7);
        assert!(c.apply_text("bogus=1").is_err());
    }

    #[test]
    fn invalid_alpha_range() {
        let mut c = TrainConfig::default();
        c.ibfr_alpha_range = (0.0, 0.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn mean_rate_decays() {
        let lr = LearningRates::default();
        assert!((lr.rate(ParamKind::SpatialMean, 0.0) - 2e-3).abs() < 1e-15);
        assert!((lr.rate(ParamKind::SpatialMean, 1.0) - 2e-5).abs() < 1e-15);
        assert_eq!(lr.rate(ParamKind::Color, 0.5), 2.5e-3);
    }
}
