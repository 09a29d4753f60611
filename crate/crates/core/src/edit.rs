//! Geometric editing through control triangles and affine edit rules.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::gaussian::{sym_eigen, FoldedGaussian, Scene};
use crate::{Error, Result};

/// Three points encoding a 2D Gaussian: its center and the tips of its two
/// standard-deviation-scaled principal axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTriangle {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    pub p2: [f64; 2],
}

pub fn control_points(mean: [f64; 2], cov: &Matrix2<f64>) -> Result<ControlTriangle> {
    let (l1, l2, v1, v2) = sym_eigen(cov);
    let symmetric = (cov[(0, 1)] - cov[(1, 0)]).abs() <= 1e-12 * cov.abs().max();
    if !(l2 > 0.0) || !symmetric || !l1.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let (a, b) = (v1 * l1.sqrt(), v2 * l2.sqrt());
    Ok(ControlTriangle {
        p0: mean,
        p1: [mean[0] + a.x, mean[1] + a.y],
        p2: [mean[0] + b.x, mean[1] + b.y],
    })
}

/// Inverse of [`control_points`]: `Sigma = A A^T` with `A = [p1 - p0 | p2 - p0]`.
pub fn gaussian_from_control_points(tri: &ControlTriangle) -> Result<([f64; 2], Matrix2<f64>)> {
    let a = Matrix2::new(
        tri.p1[0] - tri.p0[0],
        tri.p2[0] - tri.p0[0],
        tri.p1[1] - tri.p0[1],
        tri.p2[1] - tri.p0[1],
    );
    let scale = a.abs().max();
    if !(scale > 0.0) || a.determinant().abs() <= 1e-14 * scale * scale {
        return Err(Error::DegenerateTriangle);
    }
    let cov = a * a.transpose();
    let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    Ok((tri.p0, Matrix2::new(cov[(0, 0)], off, off, cov[(1, 1)])))
}

/// Rotation angle and log standard deviations of an SPD matrix.
pub fn decompose_cov(cov: &Matrix2<f64>) -> Result<(f64, [f64; 2])> {
    let (l1, l2, v1, _) = sym_eigen(cov);
    if !(l2 > 0.0) || !l1.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok((v1.y.atan2(v1.x), [0.5 * l1.ln(), 0.5 * l2.ln()]))
}

/// One affine edit applied to Gaussians selected by temporal mean and
/// spatial position.
#[derive(Debug, Clone, PartialEq)]
pub struct EditRule {
    /// Inclusive range of temporal means.
    pub time_range: (f64, f64),
    /// `[x0, y0, x1, y1]`, inclusive.
    pub region: [f64; 4],
    pub pivot: [f64; 2],
    pub linear: Matrix2<f64>,
    pub translation: [f64; 2],
}

impl EditRule {
    /// Uniform scaling about `pivot` for every Gaussian.
    pub fn uniform_scale(factor: f64, pivot: [f64; 2]) -> Self {
        Self {
            time_range: (f64::NEG_INFINITY, f64::INFINITY),
            region: [f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY],
            pivot,
            linear: Matrix2::new(factor, 0.0, 0.0, factor),
            translation: [0.0; 2],
        }
    }

    pub fn matches(&self, g: &FoldedGaussian) -> bool {
        let [x0, y0, x1, y1] = self.region;
        let [x, y] = g.spatial_mean;
        (self.time_range.0..=self.time_range.1).contains(&g.temporal_mean)
            && (x0..=x1).contains(&x)
            && (y0..=y1).contains(&y)
    }

    fn validate(&self, index: usize) -> Result<()> {
        let (t0, t1) = self.time_range;
        let [x0, y0, x1, y1] = self.region;
        if !(t0 <= t1 && x0 <= x1 && y0 <= y1) {
            return Err(Error::InvalidArgument(format!("edit rule {index}: malformed range")));
        }
        let det = self.linear.determinant();
        if !(det.abs() > 1e-12) || !det.is_finite() {
            return Err(Error::SingularEdit { rule: index });
        }
        Ok(())
    }

    fn apply(&self, g: &mut FoldedGaussian) -> Result<()> {
        let m = self.linear;
        let rel = Vector2::new(g.spatial_mean[0] - self.pivot[0], g.spatial_mean[1] - self.pivot[1]);
        let moved = m * rel;
        g.spatial_mean = [
            self.pivot[0] + moved.x + self.translation[0],
            self.pivot[1] + moved.y + self.translation[1],
        ];
        let cov = m * g.spatial_cov() * m.transpose();
        let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
        let (angle, log_scales) = decompose_cov(&Matrix2::new(cov[(0, 0)], off, off, cov[(1, 1)]))?;
        g.rotation = angle;
        g.log_scales = log_scales;
        let [mx, my] = &mut g.motion_coeffs;
        for (cx, cy) in mx.iter_mut().zip(my.iter_mut()) {
            let v = m * Vector2::new(*cx, *cy);
            *cx = v.x;
            *cy = v.y;
        }
        Ok(())
    }
}

/// Ordered list of edit rules.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EditSpec {
    pub rules: Vec<EditRule>,
}

impl EditSpec {
    pub fn validate(&self) -> Result<()> {
        self.rules.iter().enumerate().try_for_each(|(i, r)| r.validate(i))
    }
}

fn parse_list(value: &str, sep: char, want: usize) -> Option<Vec<f64>> {
    let out: Vec<f64> = value.split(sep).map(|s| s.trim().parse().ok()).collect::<Option<_>>()?;
    (out.len() == want).then_some(out)
}

impl FromStr for EditSpec {
    type Err = Error;

    /// One rule per line:
    /// `trange=a:b box=x0:y0:x1:y1 pivot=px:py M=a,b,c,d t=tx,ty`.
    /// `M` is row-major; `t` defaults to zero. `#` starts a comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: "edit spec".into(),
                line: n + 1,
                msg,
            };
            let (mut trange, mut region, mut pivot, mut linear) = (None, None, None, None);
            let mut translation = [0.0; 2];
            for field in line.split_whitespace() {
                let (key, value) = field
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, got {field:?}")))?;
                let bad = || err(format!("bad value for {key}: {value:?}"));
                match key {
                    "trange" => trange = Some(parse_list(value, ':', 2).ok_or_else(bad)?),
                    "box" => region = Some(parse_list(value, ':', 4).ok_or_else(bad)?),
                    "pivot" => pivot = Some(parse_list(value, ':', 2).ok_or_else(bad)?),
                    "M" => linear = Some(parse_list(value, ',', 4).ok_or_else(bad)?),
                    "t" => {
                        let v = parse_list(value, ',', 2).ok_or_else(bad)?;
                        translation = [v[0], v[1]];
                    }
                    other => return Err(err(format!("unknown field {other:?}"))),
                }
            }
            let missing = |name: &str| err(format!("missing {name}"));
            let t = trange.ok_or_else(|| missing("trange"))?;
            let b = region.ok_or_else(|| missing("box"))?;
            let p = pivot.ok_or_else(|| missing("pivot"))?;
            let m = linear.ok_or_else(|| missing("M"))?;
            rules.push(EditRule {
                time_range: (t[0], t[1]),
                region: [b[0], b[1], b[2], b[3]],
                pivot: [p[0], p[1]],
                linear: Matrix2::new(m[0], m[1], m[2], m[3]),
                translation,
            });
        }
        let spec = EditSpec { rules };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for EditSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            let m = r.linear;
            writeln!(
                f,
                "trange={}:{} box={}:{}:{}:{} pivot={}:{} M={},{},{},{} t={},{}",
                r.time_range.0,
                r.time_range.1,
                r.region[0],
                r.region[1],
                r.region[2],
                r.region[3],
                r.pivot[0],
                r.pivot[1],
                m[(0, 0)],
                m[(0, 1)],
                m[(1, 0)],
                m[(1, 1)],
                r.translation[0],
                r.translation[1]
            )?;
        }
        Ok(())
    }
}

/// Applies every rule in order to the Gaussians it selects.
pub fn apply_edits(scene: &Scene, spec: &EditSpec) -> Result<Scene> {
    spec.validate()?;
    let mut out = scene.clone();
    for rule in &spec.rules {
        out.gaussians
            .par_iter_mut()
            .filter(|g| rule.matches(g))
            .try_for_each(|g| rule.apply(g))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{cov_from_params, rotation, Mode};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
    }

    #[test]
    fn identity_covariance() {
        let tri = control_points([0.5, 0.5], &Matrix2::identity()).unwrap();
        assert!(close(tri.p1, [1.5, 0.5]));
        assert!(close(tri.p2, [0.5, 1.5]));
    }

    #[test]
    fn axis_aligned() {
        let tri = control_points([0.0, 0.0], &Matrix2::new(4.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(close(tri.p1, [2.0, 0.0]));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            control_points([0.0; 2], &Matrix2::new(1.0, 2.0, 2.0, 1.0)),
            Err(Error::NotPositiveDefinite)
        ));
        let flat = ControlTriangle { p0: [0.0; 2], p1: [1.0, 1.0], p2: [2.0, 2.0] };
        assert!(matches!(gaussian_from_control_points(&flat), Err(Error::DegenerateTriangle)));
    }

    #[test]
    fn rotating_points_conjugates_covariance() {
        let cov = cov_from_params(0.3, [-1.0, -2.0]);
        let tri = control_points([0.2, 0.4], &cov).unwrap();
        let r = rotation(0.7);
        let rot = |p: [f64; 2]| {
            let v = r * Vector2::new(p[0] - tri.p0[0], p[1] - tri.p0[1]);
            [tri.p0[0] + v.x, tri.p0[1] + v.y]
        };
        let moved = ControlTriangle { p0: tri.p0, p1: rot(tri.p1), p2: rot(tri.p2) };
        let (_, cov2) = gaussian_from_control_points(&moved).unwrap();
        let expect = r * cov * r.transpose();
        assert!((cov2 - expect).abs().max() < 1e-12);
    }

    #[test]
    fn stretching_axis_quadruples_variance() {
        let cov = Matrix2::new(0.09, 0.0, 0.0, 0.01);
        let mut tri = control_points([0.0; 2], &cov).unwrap();
        tri.p1 = [2.0 * tri.p1[0], 2.0 * tri.p1[1]];
        let (_, cov2) = gaussian_from_control_points(&tri).unwrap();
        assert_relative_eq!(cov2[(0, 0)], 0.36, epsilon = 1e-12);
        assert_relative_eq!(cov2[(1, 1)], 0.01, epsilon = 1e-12);
    }

    fn scene() -> Scene {
        let mut s = Scene::new(5, 32, 32, Mode::Interpolation, 2, 1);
        for i in 0..6 {
            let mut g = FoldedGaussian::isotropic([0.1 + 0.15 * i as f64, 0.5], 0.15 * i as f64, 0.3, 0.05, 0.5, 0.7, 2, 1);
            g.rotation = 0.2 * i as f64;
            g.log_scales = [-2.5, -3.0];
            g.motion_coeffs = [vec![0.1, -0.02], vec![0.05, 0.01]];
            s.gaussians.push(g);
        }
        s
    }

    #[test]
    fn identity_edit_is_noop() {
        let s = scene();
        let spec: EditSpec = "trange=0:1 box=0:0:1:1 pivot=0.5:0.5 M=1,0,0,1".parse().unwrap();
        let out = apply_edits(&s, &spec).unwrap();
        for (a, b) in out.gaussians.iter().zip(&s.gaussians) {
            assert!(close(a.spatial_mean, b.spatial_mean));
            assert!((a.spatial_cov() - b.spatial_cov()).abs().max() < 1e-12);
            assert_eq!(a.motion_coeffs, b.motion_coeffs);
        }
    }

    #[test]
    fn empty_time_range_is_noop() {
        let s = scene();
        let spec: EditSpec = "trange=2:3 box=0:0:1:1 pivot=0:0 M=2,0,0,2 t=0.1,0".parse().unwrap();
        assert_eq!(apply_edits(&s, &spec).unwrap(), s);
    }

    #[test]
    fn predicates_select_gaussians() {
        let s = scene();
        let spec: EditSpec = "trange=0:0.35 box=0:0:1:1 pivot=0:0 M=1,0,0,1 t=0.1,0".parse().unwrap();
        let out = apply_edits(&s, &spec).unwrap();
        for (a, b) in out.gaussians.iter().zip(&s.gaussians) {
            let shift = a.spatial_mean[0] - b.spatial_mean[0];
            let expect = if b.temporal_mean <= 0.35 { 0.1 } else { 0.0 };
            assert!((shift - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_map_rejected() {
        let err = "trange=0:1 box=0:0:1:1 pivot=0:0 M=1,2,2,4".parse::<EditSpec>().unwrap_err();
        assert!(matches!(err, Error::SingularEdit { rule: 0 }));
        assert!("trange=0:1 box=0:0:1:1 M=1,0,0,1".parse::<EditSpec>().is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        let text = "trange=0:0.5 box=0.1:0.2:0.9:0.8 pivot=0.5:0.5 M=1,0.5,0,2 t=0.01,-0.02\n";
        let spec: EditSpec = text.parse().unwrap();
        assert_eq!(spec.to_string(), text);
        assert_eq!(spec.to_string().parse::<EditSpec>().unwrap(), spec);
    }

    #[test]
    fn rigid_motion_keeps_scales_and_is_deterministic() {
        let s = scene();
        let (sn, cs) = 0.9f64.sin_cos();
        let spec = EditSpec {
            rules: vec![EditRule {
                time_range: (0.0, 1.0),
                region: [0.0, 0.0, 1.0, 1.0],
                pivot: [0.5, 0.5],
                linear: Matrix2::new(cs, -sn, sn, cs),
                translation: [0.05, -0.1],
            }],
        };
        let out = apply_edits(&s, &spec).unwrap();
        assert_eq!(out, apply_edits(&s, &spec).unwrap());
        for (a, b) in out.gaussians.iter().zip(&s.gaussians) {
            let (la1, la2, _, _) = sym_eigen(&a.spatial_cov());
            let (lb1, lb2, _, _) = sym_eigen(&b.spatial_cov());
            assert!((la1 - lb1).abs() < 1e-9 && (la2 - lb2).abs() < 1e-9);
        }
    }

    #[test]
    fn edit_transforms_every_conditioned_gaussian() {
        let s = scene();
        let m = Matrix2::new(1.3, 0.2, -0.1, 0.8);
        let pivot = [0.4, 0.6];
        let spec = EditSpec {
            rules: vec![EditRule {
                time_range: (0.0, 1.0),
                region: [0.0, 0.0, 1.0, 1.0],
                pivot,
                linear: m,
                translation: [0.0; 2],
            }],
        };
        let out = apply_edits(&s, &spec).unwrap();
        for t in [0.1, 0.5, 0.8] {
            for (a, b) in out.gaussians.iter().zip(&s.gaussians) {
                let ca = crate::gaussian::condition_at_time(a, t);
                let cb = crate::gaussian::condition_at_time(b, t);
                let expect = Vector2::from(pivot) + m * (cb.mean - Vector2::from(pivot));
                assert!((ca.mean - expect).norm() < 1e-12);
                assert!((ca.cov - m * cb.cov * m.transpose()).abs().max() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn control_round_trip(angle in -3.0f64..3.0, s0 in -4.0f64..0.0, s1 in -4.0f64..0.0, mx in 0.0f64..1.0, my in 0.0f64..1.0) {
            let cov = cov_from_params(angle, [s0, s1]);
            let tri = control_points([mx, my], &cov).unwrap();
            let (mean, back) = gaussian_from_control_points(&tri).unwrap();
            prop_assert_eq!(mean, [mx, my]);
            prop_assert!((back - cov).abs().max() < 1e-9);
            // Principal axes are only well defined for distinct scales.
            let again = control_points(mean, &back).unwrap();
            for (p, q) in [(tri.p1, again.p1), (tri.p2, again.p2)] {
                if (s0 - s1).abs() < 1e-3 { break; }
                prop_assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
            }
        }
    }
}
