//! Tile-based additive rasterization of a scene at one time instant, and the
//! matching analytic backward pass.
//!
//! A pixel's value is `clamp(sum_i c_i * rho_i * tau_i(t) * g_i(p | t), 0, 1)`,
//! summed in Gaussian index order. Compositing is order independent, so the
//! forward and backward passes parallelize over tiles without changing a
//! single bit of the result.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::gaussian::{
    condition_at_time, poly_derivative, rotation, ConditionedGaussian, FoldedGaussian, Scene,
};
use crate::image::Image;
use crate::{Error, Result};

/// Edge length of a rasterization tile, in pixels.
pub const TILE_SIZE: usize = 16;

/// Minimum culling radius, in standard deviations.
pub const CULL_SIGMAS: f64 = 3.0;

/// Upper bound on the contribution any culled Gaussian can make to a pixel.
/// Bright Gaussians get a culling radius wider than [`CULL_SIGMAS`] so that
/// the bound holds for them too. Amplitudes never exceed 1, so the radius
/// stays below 4.8 sigma.
pub const CULL_EPSILON: f64 = 1e-5;

/// Squared culling radius for a Gaussian of peak amplitude `amplitude`.
fn cull_radius_sq(amplitude: f64) -> f64 {
    let min = CULL_SIGMAS * CULL_SIGMAS;
    if amplitude <= CULL_EPSILON {
        return min;
    }
    (2.0 * (amplitude / CULL_EPSILON).ln()).max(min)
}

/// A Gaussian that survived culling, conditioned at the render time.
#[derive(Debug, Clone)]
struct Splat {
    index: usize,
    cond: ConditionedGaussian,
    /// `c * rho * tau`.
    amplitude: f64,
    /// Squared Mahalanobis radius beyond which the kernel is skipped.
    radius_sq: f64,
    /// Inclusive pixel bounds `(col0, col1, row0, row1)`.
    bounds: (usize, usize, usize, usize),
}

/// Prepared rasterization state for one `(scene, t, width, height)`.
struct Raster {
    width: usize,
    height: usize,
    splats: Vec<Splat>,
    tiles_x: usize,
    tiles_y: usize,
    /// Splat indices per tile, ascending.
    tile_lists: Vec<Vec<u32>>,
}

/// Indices of the Gaussians that can contribute to a `width x height`
/// render at time `t`.
///
/// A Gaussian is kept when `|t - m_t| <= k_t * sigma_t` and the bounding box
/// of its `k_s`-sigma ellipse (for the rescaled covariance) meets the unit
/// square. Both radii are at least [`CULL_SIGMAS`] and grow with the
/// Gaussian's peak amplitude so that nothing brighter than
/// [`CULL_EPSILON`] is dropped.
pub fn cull(scene: &Scene, t: f64, width: usize, height: usize) -> Vec<usize> {
    prepare_splats(scene, t, width, height)
        .into_iter()
        .map(|s| s.index)
        .collect()
}

fn prepare_splats(scene: &Scene, t: f64, width: usize, height: usize) -> Vec<Splat> {
    scene
        .gaussians
        .iter()
        .enumerate()
        .filter_map(|(index, g)| prepare_one(index, g, t, width, height))
        .collect()
}

fn prepare_one(
    index: usize,
    g: &FoldedGaussian,
    t: f64,
    width: usize,
    height: usize,
) -> Option<Splat> {
    let peak = g.color.abs() * g.opacity();
    let sigma_t = g.temporal_spread();
    let dt = t - g.temporal_mean;
    if dt * dt > cull_radius_sq(peak) * sigma_t * sigma_t {
        return None;
    }

    let cond = condition_at_time(g, t);
    let amplitude = g.color * g.opacity() * cond.temporal_weight;
    let radius_sq = cull_radius_sq(amplitude.abs());
    let radius = radius_sq.sqrt();
    let half_x = radius * cond.cov[(0, 0)].sqrt();
    let half_y = radius * cond.cov[(1, 1)].sqrt();
    let (x0, x1) = (cond.mean.x - half_x, cond.mean.x + half_x);
    let (y0, y1) = (cond.mean.y - half_y, cond.mean.y + half_y);
    if !(x1 >= 0.0 && x0 <= 1.0 && y1 >= 0.0 && y0 <= 1.0) {
        return None;
    }

    // Pixels whose centres fall inside [x0, x1] x [y0, y1].
    let col0 = ((x0 * width as f64 - 0.5).ceil().max(0.0)) as usize;
    let row0 = ((y0 * height as f64 - 0.5).ceil().max(0.0)) as usize;
    let col1 = (x1 * width as f64 - 0.5).floor();
    let row1 = (y1 * height as f64 - 0.5).floor();
    if col1 < 0.0 || row1 < 0.0 || col0 >= width || row0 >= height {
        // Overlaps the unit square but covers no pixel centre; it is
        // still reported by `cull` but never rasterized.
        return Some(Splat {
            index,
            cond,
            amplitude,
            radius_sq,
            bounds: (1, 0, 1, 0),
        });
    }
    let col1 = (col1 as usize).min(width - 1);
    let row1 = (row1 as usize).min(height - 1);
    Some(Splat {
        index,
        cond,
        amplitude,
        radius_sq,
        bounds: (col0, col1, row0, row1),
    })
}

impl Raster {
    fn new(scene: &Scene, t: f64, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        let splats = prepare_splats(scene, t, width, height);
        let tiles_x = width.div_ceil(TILE_SIZE);
        let tiles_y = height.div_ceil(TILE_SIZE);
        let mut tile_lists = vec![Vec::new(); tiles_x * tiles_y];
        for (k, s) in splats.iter().enumerate() {
            let (c0, c1, r0, r1) = s.bounds;
            if c0 > c1 || r0 > r1 {
                continue;
            }
            for ty in r0 / TILE_SIZE..=r1 / TILE_SIZE {
                for tx in c0 / TILE_SIZE..=c1 / TILE_SIZE {
                    tile_lists[ty * tiles_x + tx].push(k as u32);
                }
            }
        }
        Ok(Self {
            width,
            height,
            splats,
            tiles_x,
            tiles_y,
            tile_lists,
        })
    }

    fn tile_pixels(&self, tile: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        let cols = tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(self.width);
        let rows = ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(self.height);
        (cols, rows)
    }

    /// Unclamped accumulated values, row-major.
    fn forward(&self) -> Vec<f64> {
        let tiles: Vec<Vec<f64>> = (0..self.tiles_x * self.tiles_y)
            .into_par_iter()
            .map(|tile| {
                let (cols, rows) = self.tile_pixels(tile);
                let list = &self.tile_lists[tile];
                let mut out = Vec::with_capacity(cols.len() * rows.len());
                for row in rows.clone() {
                    for col in cols.clone() {
                        let p = pixel(col, row, self.width, self.height);
                        let mut acc = 0.0;
                        for &k in list {
                            let s = &self.splats[k as usize];
                            if let Some((g, _)) = kernel(s, p) {
                                acc += s.amplitude * g;
                            }
                        }
                        out.push(acc);
                    }
                }
                out
            })
            .collect();

        let mut raw = vec![0.0; self.width * self.height];
        for (tile, values) in tiles.into_iter().enumerate() {
            let (cols, rows) = self.tile_pixels(tile);
            let mut it = values.into_iter();
            for row in rows {
                for col in cols.clone() {
                    raw[row * self.width + col] = it.next().unwrap_or(0.0);
                }
            }
        }
        raw
    }

    /// Per-splat sums over pixels of the upstream-weighted kernel terms.
    fn backward(&self, raw: &[f64], upstream: &[f64]) -> Vec<SplatAccum> {
        let partials: Vec<Vec<(u32, SplatAccum)>> = (0..self.tiles_x * self.tiles_y)
            .into_par_iter()
            .map(|tile| {
                let (cols, rows) = self.tile_pixels(tile);
                let list = &self.tile_lists[tile];
                let mut acc = vec![SplatAccum::default(); list.len()];
                for row in rows.clone() {
                    for col in cols.clone() {
                        let idx = row * self.width + col;
                        let v = raw[idx];
                        // Clamp subgradient: pass-through strictly inside (0, 1).
                        if !(v > 0.0 && v < 1.0) {
                            continue;
                        }
                        let up = upstream[idx];
                        if up == 0.0 {
                            continue;
                        }
                        let p = pixel(col, row, self.width, self.height);
                        for (slot, &k) in acc.iter_mut().zip(list) {
                            let s = &self.splats[k as usize];
                            if let Some((g, d)) = kernel(s, p) {
                                slot.add(up, g, s.amplitude, d, &s.cond.cov_inverse);
                            }
                        }
                    }
                }
                list.iter().copied().zip(acc).collect()
            })
            .collect();

        let mut total = vec![SplatAccum::default(); self.splats.len()];
        for tile in partials {
            for (k, a) in tile {
                total[k as usize].merge(&a);
            }
        }
        total
    }
}

fn pixel(col: usize, row: usize, width: usize, height: usize) -> Vector2<f64> {
    Vector2::new(
        (col as f64 + 0.5) / width as f64,
        (row as f64 + 0.5) / height as f64,
    )
}

/// Kernel value and offset `p - mean`, or `None` beyond the culling radius.
#[inline]
fn kernel(s: &Splat, p: Vector2<f64>) -> Option<(f64, Vector2<f64>)> {
    let d = p - s.cond.mean;
    let ci = &s.cond.cov_inverse;
    let q = d.x * (ci[(0, 0)] * d.x + 2.0 * ci[(0, 1)] * d.y) + ci[(1, 1)] * d.y * d.y;
    if q > s.radius_sq {
        return None;
    }
    Some(((-0.5 * q).exp(), d))
}

#[derive(Debug, Clone, Default)]
struct SplatAccum {
    /// sum G * g
    kernel: f64,
    /// dL / d(conditioned mean)
    mean: Vector2<f64>,
    /// dL / d(conditioned inverse covariance), full symmetric matrix
    precision: Matrix2<f64>,
}

impl SplatAccum {
    #[inline]
    fn add(&mut self, up: f64, g: f64, amplitude: f64, d: Vector2<f64>, prec: &Matrix2<f64>) {
        let gk = up * g;
        self.kernel += gk;
        let a = gk * amplitude;
        self.mean += prec * d * a;
        self.precision -= d * d.transpose() * (0.5 * a);
    }

    fn merge(&mut self, other: &SplatAccum) {
        self.kernel += other.kernel;
        self.mean += other.mean;
        self.precision += other.precision;
    }
}

/// Partial derivatives for every stored parameter of every Gaussian, in the
/// same field layout as [`FoldedGaussian`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub gaussians: Vec<FoldedGaussian>,
}

impl GradientBuffer {
    pub fn zeros_like(scene: &Scene) -> Self {
        Self {
            gaussians: scene
                .gaussians
                .iter()
                .map(zero_like)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Adds `scale * other` in place.
    pub fn add_scaled(&mut self, other: &GradientBuffer, scale: f64) {
        for (a, b) in self.gaussians.iter_mut().zip(&other.gaussians) {
            let mut vals = Vec::with_capacity(b.param_count());
            b.for_each_param(|_, v| vals.push(v));
            let mut it = vals.into_iter();
            a.for_each_param_mut(|_, v| *v += scale * it.next().unwrap_or(0.0));
        }
    }

    /// Norm of the spatial-mean partials of Gaussian `i`.
    pub fn mean_grad_norm(&self, i: usize) -> f64 {
        let m = self.gaussians[i].spatial_mean;
        m[0].hypot(m[1])
    }
}

pub(crate) fn zero_like(g: &FoldedGaussian) -> FoldedGaussian {
    FoldedGaussian {
        spatial_mean: [0.0; 2],
        temporal_mean: 0.0,
        log_temporal_spread: 0.0,
        rotation: 0.0,
        log_scales: [0.0; 2],
        motion_coeffs: [
            vec![0.0; g.motion_coeffs[0].len()],
            vec![0.0; g.motion_coeffs[1].len()],
        ],
        scale_coeffs: vec![0.0; g.scale_coeffs.len()],
        opacity_logit: 0.0,
        color: 0.0,
    }
}

/// Renders `scene` at time `t`.
pub fn render_frame(scene: &Scene, t: f64, width: usize, height: usize) -> Result<Image> {
    let raster = Raster::new(scene, t, width, height)?;
    let raw = raster.forward();
    Ok(clamp_image(width, height, &raw))
}

/// Renders every Gaussian at every pixel with no culling. Slow; this is the
/// reference the tiled renderer is checked against.
pub fn render_frame_exhaustive(scene: &Scene, t: f64, width: usize, height: usize) -> Result<Image> {
    let mut img = Image::zeros(width, height)?;
    let conds: Vec<(f64, ConditionedGaussian)> = scene
        .gaussians
        .iter()
        .map(|g| {
            let cg = condition_at_time(g, t);
            (g.color * g.opacity() * cg.temporal_weight, cg)
        })
        .collect();
    for row in 0..height {
        for col in 0..width {
            let p = pixel(col, row, width, height);
            let v: f64 = conds
                .iter()
                .map(|(amp, cg)| amp * crate::gaussian::eval_density(cg, p))
                .sum();
            img.pixels_mut()[row * width + col] = v.clamp(0.0, 1.0);
        }
    }
    Ok(img)
}

fn clamp_image(width: usize, height: usize, raw: &[f64]) -> Image {
    let pixels = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Image::from_pixels(width, height, pixels).expect("clamped raster is a valid image")
}

/// Weights of the per-frame image losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLossWeights {
    pub l1: f64,
    pub ssim: f64,
}

/// Unweighted values of the per-frame image losses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameLoss {
    /// Mean absolute error.
    pub l1: f64,
    /// `1 - SSIM`; zero when the SSIM weight is zero and it was not computed.
    pub ssim: f64,
}

impl FrameLoss {
    pub fn weighted(&self, w: FrameLossWeights) -> f64 {
        w.l1 * self.l1 + w.ssim * self.ssim
    }
}

/// Renders at `t`, scores the result against `target` and returns exact
/// gradients of `w.l1 * L1 + w.ssim * (1 - SSIM)` for every parameter.
pub fn render_with_grad(
    scene: &Scene,
    t: f64,
    target: &Image,
    w: FrameLossWeights,
) -> Result<(Image, FrameLoss, GradientBuffer)> {
    let (width, height) = target.dims();
    let raster = Raster::new(scene, t, width, height)?;
    let raw = raster.forward();
    let rendered = clamp_image(width, height, &raw);

    let n = (width * height) as f64;
    let mut upstream = vec![0.0; width * height];
    let mut loss = FrameLoss::default();
    for ((u, &r), &y) in upstream.iter_mut().zip(rendered.pixels()).zip(target.pixels()) {
        let diff = r - y;
        loss.l1 += diff.abs();
        if diff != 0.0 {
            *u = w.l1 * diff.signum() / n;
        }
    }
    loss.l1 /= n;

    if w.ssim != 0.0 {
        let (value, grad) = crate::metrics::ssim_with_grad(&rendered, target)?;
        loss.ssim = 1.0 - value;
        for (u, g) in upstream.iter_mut().zip(grad) {
            *u -= w.ssim * g;
        }
    }

    let grads = backward_from_upstream(scene, &raster, t, &raw, &upstream);
    Ok((rendered, loss, grads))
}

/// Gradients of an arbitrary image-space loss, given `dL/dI` for the
/// clamped image rendered at `t`.
pub fn backpropagate(scene: &Scene, t: f64, upstream: &Image, dl_dimage: &[f64]) -> Result<GradientBuffer> {
    let (width, height) = upstream.dims();
    if dl_dimage.len() != width * height {
        return Err(Error::InvalidArgument("upstream gradient has wrong length".into()));
    }
    let raster = Raster::new(scene, t, width, height)?;
    let raw = raster.forward();
    Ok(backward_from_upstream(scene, &raster, t, &raw, dl_dimage))
}

fn backward_from_upstream(
    scene: &Scene,
    raster: &Raster,
    t: f64,
    raw: &[f64],
    upstream: &[f64],
) -> GradientBuffer {
    let accums = raster.backward(raw, upstream);
    let mut out = GradientBuffer::zeros_like(scene);
    for (splat, acc) in raster.splats.iter().zip(&accums) {
        let g = &scene.gaussians[splat.index];
        chain_to_params(g, t, acc, &mut out.gaussians[splat.index]);
    }
    out
}

/// Maps the conditioned-space sums of one Gaussian onto its stored parameters.
fn chain_to_params(g: &FoldedGaussian, t: f64, acc: &SplatAccum, out: &mut FoldedGaussian) {
    let rho = g.opacity();
    let sigma = g.temporal_spread();
    let dt = t - g.temporal_mean;
    let tau = (-dt * dt / (2.0 * sigma * sigma)).exp();
    let u = g.temporal_mean - t;

    out.color += rho * tau * acc.kernel;
    out.opacity_logit += g.color * tau * rho * (1.0 - rho) * acc.kernel;
    let d_tau = g.color * rho * acc.kernel;
    out.temporal_mean += d_tau * tau * dt / (sigma * sigma);
    out.log_temporal_spread += d_tau * tau * dt * dt / (sigma * sigma);

    // Conditioned mean = m_s + f(u).
    let dm = acc.mean;
    out.spatial_mean[0] += dm.x;
    out.spatial_mean[1] += dm.y;
    let mut d_u = dm.x * poly_derivative(&g.motion_coeffs[0], u)
        + dm.y * poly_derivative(&g.motion_coeffs[1], u);
    let mut power = u;
    for j in 0..g.motion_degree() {
        out.motion_coeffs[0][j] += dm.x * power;
        out.motion_coeffs[1][j] += dm.y * power;
        power *= u;
    }

    // Conditioned precision = R diag(s1^-2, s2^-2) R^T / a(u).
    let a = crate::gaussian::poly_eval(&g.scale_coeffs, u).exp();
    let r = rotation(g.rotation);
    let r1 = r.column(0).into_owned();
    let r2 = r.column(1).into_owned();
    let inv_s1 = (-2.0 * g.log_scales[0]).exp();
    let inv_s2 = (-2.0 * g.log_scales[1]).exp();
    let dp = &acc.precision;
    let frob = |m: Matrix2<f64>| dp.component_mul(&m).sum();

    let precision = (r1 * r1.transpose() * inv_s1 + r2 * r2.transpose() * inv_s2) / a;
    // d(log a): dP/d(log a) = -P.
    let d_log_a = -frob(precision);
    let mut power = u;
    for j in 0..g.scale_degree() {
        out.scale_coeffs[j] += d_log_a * power;
        power *= u;
    }
    d_u += d_log_a * poly_derivative(&g.scale_coeffs, u);

    out.log_scales[0] += frob(r1 * r1.transpose() * (-2.0 * inv_s1 / a));
    out.log_scales[1] += frob(r2 * r2.transpose() * (-2.0 * inv_s2 / a));
    let sym = r2 * r1.transpose() + r1 * r2.transpose();
    out.rotation += frob(sym * ((inv_s1 - inv_s2) / a));

    out.temporal_mean += d_u;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{logit, Mode};

    fn one_gaussian_scene(g: FoldedGaussian) -> Scene {
        let mut s = Scene::new(4, 16, 16, Mode::Interpolation, g.motion_degree(), g.scale_degree());
        s.gaussians.push(g);
        s
    }

    #[test]
    fn empty_scene_renders_black() {
        let s = Scene::new(2, 8, 8, Mode::Interpolation, 7, 2);
        let img = render_frame(&s, 0.5, 8, 8).unwrap();
        assert!(img.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_size_is_empty_raster() {
        let s = Scene::new(2, 8, 8, Mode::Interpolation, 7, 2);
        assert!(matches!(
            render_frame(&s, 0.5, 0, 8),
            Err(Error::EmptyRaster { .. })
        ));
    }

    #[test]
    fn peak_on_pixel_centre_is_one() {
        // Mean exactly on the centre of pixel (5, 7) of a 16x16 grid.
        let mut g = FoldedGaussian::isotropic([5.5 / 16.0, 7.5 / 16.0], 0.5, 0.2, 0.05, 0.5, 1.0, 2, 2);
        g.opacity_logit = 60.0;
        let img = render_frame(&one_gaussian_scene(g), 0.5, 16, 16).unwrap();
        assert_eq!(img.get(5, 7), 1.0);
    }

    #[test]
    fn peak_off_centre_matches_kernel() {
        let scale = 1.0 / 16.0;
        let mut g = FoldedGaussian::isotropic([5.8 / 16.0, 7.5 / 16.0], 0.5, 0.2, scale, 0.5, 1.0, 2, 2);
        g.opacity_logit = 60.0;
        let img = render_frame(&one_gaussian_scene(g), 0.5, 16, 16).unwrap();
        let d_pix: f64 = 0.3;
        assert!(img.get(5, 7) >= (-0.5 * d_pix * d_pix).exp() - 1e-12);
    }

    #[test]
    fn stacked_gaussians_clamp() {
        let g = FoldedGaussian::isotropic([0.5 / 16.0 * 17.0, 0.5], 0.5, 0.2, 0.05, 0.9, 1.0, 2, 2);
        let mut s = one_gaussian_scene(g.clone());
        s.gaussians.push(g);
        let img = render_frame(&s, 0.5, 16, 16).unwrap();
        let max = img.pixels().iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn cull_examples() {
        let far_in_time = FoldedGaussian::isotropic([0.5, 0.5], 0.0, 0.1, 0.05, 0.5, 1.0, 2, 2);
        let on_time = FoldedGaussian::isotropic([0.5, 0.5], 0.5, 0.1, 0.05, 0.5, 1.0, 2, 2);
        let off_screen = FoldedGaussian::isotropic([10.0, 10.0], 0.5, 0.1, 1e-3, 0.5, 1.0, 2, 2);
        let mut s = one_gaussian_scene(far_in_time);
        s.gaussians.push(on_time);
        s.gaussians.push(off_screen);
        assert_eq!(cull(&s, 0.5, 16, 16), vec![1]);
    }

    #[test]
    fn dim_gaussians_cull_at_three_sigma() {
        // Amplitude below the epsilon floor: plain 3-sigma rule in time.
        let mut g = FoldedGaussian::isotropic([0.5, 0.5], 0.5, 0.1, 0.05, 0.5, 1e-7, 2, 2);
        g.opacity_logit = logit(0.5);
        let s = one_gaussian_scene(g);
        assert_eq!(cull(&s, 0.79, 16, 16), vec![0]);
        assert!(cull(&s, 0.81, 16, 16).is_empty());
    }

    #[test]
    fn color_gradient_hand_check() {
        // 2x2 image, pure L1: dL/dc = sum_p sign(I^ - I) * rho * tau * g(p) / P.
        let mut g = FoldedGaussian::isotropic([0.4, 0.55], 0.5, 0.3, 0.4, 0.6, 0.5, 1, 1);
        g.rotation = 0.0;
        let s = one_gaussian_scene(g.clone());
        let t = 0.6;
        let target = Image::from_pixels(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let (img, _, grads) =
            render_with_grad(&s, t, &target, FrameLossWeights { l1: 1.0, ssim: 0.0 }).unwrap();
        let cg = condition_at_time(&g, t);
        let mut expected = 0.0;
        for row in 0..2 {
            for col in 0..2 {
                let p = pixel(col, row, 2, 2);
                let v = img.get(col, row);
                let sign = (v - target.get(col, row)).signum();
                expected += sign * g.opacity() * cg.temporal_weight
                    * crate::gaussian::eval_density(&cg, p)
                    / 4.0;
            }
        }
        assert!((grads.gaussians[0].color - expected).abs() < 1e-14);
    }
}
