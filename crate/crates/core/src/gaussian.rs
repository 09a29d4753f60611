//! Folded Gaussians: space-time primitives whose spatial mean and covariance
//! are polynomial functions of the offset from their temporal centre.
//!
//! A primitive conditioned at time `t` is a plain 2D Gaussian with mean
//! `m_s + f(m_t - t)` and covariance `a(t) * Sigma_s`, weighted by the
//! temporal factor `exp(-(t - m_t)^2 / (2 sigma_t^2))`. Both `f` and
//! `log a` are polynomials in `u = m_t - t` with no constant term, so the
//! conditioned Gaussian at `t = m_t` is exactly `(m_s, Sigma_s)`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Default motion polynomial degree for frame interpolation.
pub const INTERP_MOTION_DEGREE: usize = 7;
/// Default motion polynomial degree for mesh extraction.
pub const MESH_MOTION_DEGREE: usize = 2;
/// Default degree of the log-rescaling polynomial.
pub const SCALE_DEGREE: usize = 2;

/// Which workflow a scene was trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Grayscale frames, trained with in-between frame targets.
    Interpolation,
    /// Binary masks, trained with the reduced objective.
    Mesh,
}

impl Mode {
    pub fn default_motion_degree(self) -> usize {
        match self {
            Mode::Interpolation => INTERP_MOTION_DEGREE,
            Mode::Mesh => MESH_MOTION_DEGREE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Interpolation => "interpolation",
            Mode::Mesh => "mesh",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interp" | "interpolation" => Ok(Mode::Interpolation),
            "mesh" => Ok(Mode::Mesh),
            other => Err(format!("unknown mode `{other}` (expected interp or mesh)")),
        }
    }
}

/// Evaluates `sum_j coeffs[j-1] * u^j` for `j = 1..=D`.
pub fn poly_eval(coeffs: &[f64], u: f64) -> f64 {
    // Horner on the shifted polynomial, then one extra factor of u.
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c) * u
}

/// Derivative of [`poly_eval`] with respect to `u`.
pub fn poly_derivative(coeffs: &[f64], u: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (j, &c)| acc * u + (j as f64 + 1.0) * c)
}

/// Rotation matrix for angle `theta`.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `R(rotation) * diag(exp(2 * log_scales)) * R(rotation)^T`.
pub fn cov_from_params(rotation_angle: f64, log_scales: [f64; 2]) -> Matrix2<f64> {
    let r = rotation(rotation_angle);
    let d = Matrix2::new((2.0 * log_scales[0]).exp(), 0.0, 0.0, (2.0 * log_scales[1]).exp());
    let cov = r * d * r.transpose();
    // Exact symmetry regardless of rounding in the product.
    let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    Matrix2::new(cov[(0, 0)], off, off, cov[(1, 1)])
}

/// Eigendecomposition of a symmetric 2x2 matrix.
///
/// Returns `(lambda1, lambda2, v1, v2)` with `lambda1 >= lambda2` and each
/// eigenvector's first nonzero component positive.
pub fn sym_eigen(m: &Matrix2<f64>) -> (f64, f64, Vector2<f64>, Vector2<f64>) {
    let a = m[(0, 0)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let d = m[(1, 1)];
    let half_trace = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let radius = half_diff.hypot(b);
    let l1 = half_trace + radius;
    let l2 = half_trace - radius;

    let v1 = if b == 0.0 {
        if a >= d {
            Vector2::new(1.0, 0.0)
        } else {
            Vector2::new(0.0, 1.0)
        }
    } else {
        // Angle of the major axis; stable for both signs of half_diff.
        let theta = 0.5 * b.atan2(half_diff);
        let (s, c) = theta.sin_cos();
        Vector2::new(c, s)
    };
    let v1 = canonical_sign(v1);
    let v2 = canonical_sign(Vector2::new(-v1.y, v1.x));
    (l1, l2, v1, v2)
}

fn canonical_sign(v: Vector2<f64>) -> Vector2<f64> {
    let first = if v.x != 0.0 { v.x } else { v.y };
    if first < 0.0 {
        -v
    } else {
        v
    }
}

/// One scene primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldedGaussian {
    /// Mean in normalized image coordinates (x right, y down).
    pub spatial_mean: [f64; 2],
    pub temporal_mean: f64,
    /// Natural log of the temporal standard deviation.
    pub log_temporal_spread: f64,
    pub rotation: f64,
    pub log_scales: [f64; 2],
    /// `motion_coeffs[axis][j-1]` multiplies `u^j`.
    pub motion_coeffs: [Vec<f64>; 2],
    /// `scale_coeffs[j-1]` multiplies `u^j` inside the exponent of `a`.
    pub scale_coeffs: Vec<f64>,
    pub opacity_logit: f64,
    pub color: f64,
}

impl FoldedGaussian {
    /// A static primitive with zero motion and rescaling polynomials.
    pub fn isotropic(
        mean: [f64; 2],
        temporal_mean: f64,
        temporal_spread: f64,
        scale: f64,
        opacity: f64,
        color: f64,
        motion_degree: usize,
        scale_degree: usize,
    ) -> Self {
        Self {
            spatial_mean: mean,
            temporal_mean,
            log_temporal_spread: temporal_spread.ln(),
            rotation: 0.0,
            log_scales: [scale.ln(); 2],
            motion_coeffs: [vec![0.0; motion_degree], vec![0.0; motion_degree]],
            scale_coeffs: vec![0.0; scale_degree],
            opacity_logit: logit(opacity),
            color,
        }
    }

    pub fn motion_degree(&self) -> usize {
        self.motion_coeffs[0].len()
    }

    pub fn scale_degree(&self) -> usize {
        self.scale_coeffs.len()
    }

    pub fn temporal_spread(&self) -> f64 {
        self.log_temporal_spread.exp()
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn spatial_cov(&self) -> Matrix2<f64> {
        cov_from_params(self.rotation, self.log_scales)
    }

    pub fn temporal_weight(&self, t: f64) -> f64 {
        let sigma = self.temporal_spread();
        let dt = t - self.temporal_mean;
        (-dt * dt / (2.0 * sigma * sigma)).exp()
    }

    /// Number of scalar parameters in the flattened layout.
    pub fn param_count(&self) -> usize {
        param_count(self.motion_degree(), self.scale_degree())
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_param(|_, v| ok &= v.is_finite());
        ok
    }

    /// Visits every scalar parameter in declared field order.
    pub fn for_each_param(&self, mut f: impl FnMut(ParamKind, f64)) {
        f(ParamKind::SpatialMean, self.spatial_mean[0]);
        f(ParamKind::SpatialMean, self.spatial_mean[1]);
        f(ParamKind::TemporalMean, self.temporal_mean);
        f(ParamKind::TemporalSpread, self.log_temporal_spread);
        f(ParamKind::Rotation, self.rotation);
        f(ParamKind::LogScales, self.log_scales[0]);
        f(ParamKind::LogScales, self.log_scales[1]);
        for axis in &self.motion_coeffs {
            for &c in axis {
                f(ParamKind::MotionCoeffs, c);
            }
        }
        for &c in &self.scale_coeffs {
            f(ParamKind::ScaleCoeffs, c);
        }
        f(ParamKind::OpacityLogit, self.opacity_logit);
        f(ParamKind::Color, self.color);
    }

    /// Mutable counterpart of [`Self::for_each_param`].
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(ParamKind, &mut f64)) {
        f(ParamKind::SpatialMean, &mut self.spatial_mean[0]);
        f(ParamKind::SpatialMean, &mut self.spatial_mean[1]);
        f(ParamKind::TemporalMean, &mut self.temporal_mean);
        f(ParamKind::TemporalSpread, &mut self.log_temporal_spread);
        f(ParamKind::Rotation, &mut self.rotation);
        f(ParamKind::LogScales, &mut self.log_scales[0]);
        f(ParamKind::LogScales, &mut self.log_scales[1]);
        for axis in &mut self.motion_coeffs {
            for c in axis {
                f(ParamKind::MotionCoeffs, c);
            }
        }
        for c in &mut self.scale_coeffs {
            f(ParamKind::ScaleCoeffs, c);
        }
        f(ParamKind::OpacityLogit, &mut self.opacity_logit);
        f(ParamKind::Color, &mut self.color);
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn quantize(&mut self) {
        self.for_each_param_mut(|_, v| *v = *v as f32 as f64);
    }
}

/// Parameter groups, in flattened order. Learning rates are set per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    SpatialMean,
    TemporalMean,
    TemporalSpread,
    Rotation,
    LogScales,
    MotionCoeffs,
    ScaleCoeffs,
    OpacityLogit,
    Color,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::SpatialMean => "spatial_mean",
            ParamKind::TemporalMean => "temporal_mean",
            ParamKind::TemporalSpread => "log_temporal_spread",
            ParamKind::Rotation => "rotation",
            ParamKind::LogScales => "log_scales",
            ParamKind::MotionCoeffs => "motion_coeffs",
            ParamKind::ScaleCoeffs => "scale_coeffs",
            ParamKind::OpacityLogit => "opacity_logit",
            ParamKind::Color => "color",
        }
    }
}

pub fn param_count(motion_degree: usize, scale_degree: usize) -> usize {
    2 + 1 + 1 + 1 + 2 + 2 * motion_degree + scale_degree + 1 + 1
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// A folded Gaussian evaluated at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedGaussian {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub cov_inverse: Matrix2<f64>,
    pub temporal_weight: f64,
}

/// Conditions `g` on time `t`.
pub fn condition_at_time(g: &FoldedGaussian, t: f64) -> ConditionedGaussian {
    let u = g.temporal_mean - t;
    let mean = Vector2::new(
        g.spatial_mean[0] + poly_eval(&g.motion_coeffs[0], u),
        g.spatial_mean[1] + poly_eval(&g.motion_coeffs[1], u),
    );
    let rescale = poly_eval(&g.scale_coeffs, u).exp();
    let cov = g.spatial_cov() * rescale;

    // Inverse from the factored form: R diag(exp(-2 s)) R^T / a.
    let r = rotation(g.rotation);
    let d = Matrix2::new(
        (-2.0 * g.log_scales[0]).exp(),
        0.0,
        0.0,
        (-2.0 * g.log_scales[1]).exp(),
    );
    let inv = r * d * r.transpose() / rescale;
    let off = 0.5 * (inv[(0, 1)] + inv[(1, 0)]);
    let cov_inverse = Matrix2::new(inv[(0, 0)], off, off, inv[(1, 1)]);

    ConditionedGaussian {
        mean,
        cov,
        cov_inverse,
        temporal_weight: g.temporal_weight(t),
    }
}

/// Unnormalized spatial kernel `exp(-0.5 * d^T Sigma^-1 d)` with `d = p - mean`.
pub fn eval_density(cg: &ConditionedGaussian, p: Vector2<f64>) -> f64 {
    let d = p - cg.mean;
    (-0.5 * d.dot(&(cg.cov_inverse * d))).exp()
}

/// An ordered set of folded Gaussians plus the geometry of the frames it models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub gaussians: Vec<FoldedGaussian>,
    /// Number of frames in the training set (enters the temporal-spread band).
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub mode: Mode,
    pub motion_degree: usize,
    pub scale_degree: usize,
}

impl Scene {
    pub fn new(
        frame_count: usize,
        width: usize,
        height: usize,
        mode: Mode,
        motion_degree: usize,
        scale_degree: usize,
    ) -> Self {
        Self {
            gaussians: Vec::new(),
            frame_count,
            width,
            height,
            mode,
            motion_degree,
            scale_degree,
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Checks the structural invariants: finite parameters, consistent
    /// polynomial degrees and at least two frames.
    pub fn validate(&self) -> crate::Result<()> {
        if self.frame_count < 2 {
            return Err(crate::Error::InvalidArgument(format!(
                "scene frame count must be at least 2, got {}",
                self.frame_count
            )));
        }
        for (i, g) in self.gaussians.iter().enumerate() {
            if g.motion_degree() != self.motion_degree
                || g.motion_coeffs[1].len() != self.motion_degree
                || g.scale_degree() != self.scale_degree
            {
                return Err(crate::Error::InvalidArgument(format!(
                    "gaussian {i} has polynomial degrees inconsistent with the scene"
                )));
            }
            if !g.is_finite() {
                return Err(crate::Error::InvalidArgument(format!(
                    "gaussian {i} has non-finite parameters"
                )));
            }
        }
        Ok(())
    }

    pub fn quantize(&mut self) {
        self.gaussians.iter_mut().for_each(FoldedGaussian::quantize);
    }
}
