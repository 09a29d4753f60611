//! Image quality metrics: PSNR, SSIM, Dice and IoU, plus per-frame reports.

use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::{Error, Result};

/// SSIM window edge length.
pub const SSIM_WINDOW: usize = 11;
/// Standard deviation of the Gaussian SSIM window, in pixels.
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Default binarization threshold for the overlap metrics.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.5;

/// Peak signal-to-noise ratio in dB for unit dynamic range.
/// Identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let mse = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.pixels().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Normalized 1D Gaussian taps of the SSIM window.
pub fn ssim_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - half;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Mean SSIM over all fully contained 11x11 windows.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    Ok(SsimMaps::new(a, b)?.mean())
}

/// SSIM of `a` against `b` and its gradient with respect to every pixel of `a`.
pub fn ssim_with_grad(a: &Image, b: &Image) -> Result<(f64, Vec<f64>)> {
    let maps = SsimMaps::new(a, b)?;
    let value = maps.mean();
    Ok((value, maps.grad_wrt_first(a, b)))
}

/// Local statistics on the valid window grid.
struct SsimMaps {
    out_w: usize,
    out_h: usize,
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    exx: Vec<f64>,
    eyy: Vec<f64>,
    exy: Vec<f64>,
}

impl SsimMaps {
    fn new(a: &Image, b: &Image) -> Result<Self> {
        a.ensure_same_dims(b)?;
        let (w, h) = a.dims();
        if w < SSIM_WINDOW || h < SSIM_WINDOW {
            return Err(Error::ImageTooSmall {
                width: w,
                height: h,
                window: SSIM_WINDOW,
            });
        }
        let taps = ssim_taps();
        let x = a.pixels();
        let y = b.pixels();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
        Ok(Self {
            out_w: w - SSIM_WINDOW + 1,
            out_h: h - SSIM_WINDOW + 1,
            mu_x: filter_valid(x, w, h, &taps),
            mu_y: filter_valid(y, w, h, &taps),
            exx: filter_valid(&xx, w, h, &taps),
            eyy: filter_valid(&yy, w, h, &taps),
            exy: filter_valid(&xy, w, h, &taps),
        })
    }

    fn local(&self, i: usize) -> f64 {
        let (mx, my) = (self.mu_x[i], self.mu_y[i]);
        let vx = self.exx[i] - mx * mx;
        let vy = self.eyy[i] - my * my;
        let cxy = self.exy[i] - mx * my;
        ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
            / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
    }

    fn mean(&self) -> f64 {
        let n = self.mu_x.len();
        (0..n).map(|i| self.local(i)).sum::<f64>() / n as f64
    }

    fn grad_wrt_first(&self, a: &Image, b: &Image) -> Vec<f64> {
        let (w, h) = a.dims();
        let n = self.mu_x.len();
        let scale = 1.0 / n as f64;
        let mut d_mu = vec![0.0; n];
        let mut d_exx = vec![0.0; n];
        let mut d_exy = vec![0.0; n];
        for i in 0..n {
            let (mx, my) = (self.mu_x[i], self.mu_y[i]);
            let vx = self.exx[i] - mx * mx;
            let vy = self.eyy[i] - my * my;
            let cxy = self.exy[i] - mx * my;
            let a1 = 2.0 * mx * my + SSIM_C1;
            let a2 = 2.0 * cxy + SSIM_C2;
            let b1 = mx * mx + my * my + SSIM_C1;
            let b2 = vx + vy + SSIM_C2;
            let s = a1 * a2 / (b1 * b2);
            d_mu[i] = scale
                * (2.0 * my * (a2 - a1) / (b1 * b2) - 2.0 * mx * s / b1 + 2.0 * mx * s / b2);
            d_exx[i] = -scale * s / b2;
            d_exy[i] = scale * 2.0 * a1 / (b1 * b2);
        }
        let taps = ssim_taps();
        let g_mu = filter_transpose(&d_mu, self.out_w, self.out_h, w, h, &taps);
        let g_xx = filter_transpose(&d_exx, self.out_w, self.out_h, w, h, &taps);
        let g_xy = filter_transpose(&d_exy, self.out_w, self.out_h, w, h, &taps);
        let x = a.pixels();
        let y = b.pixels();
        (0..w * h)
            .map(|k| g_mu[k] + 2.0 * x[k] * g_xx[k] + y[k] * g_xy[k])
            .collect()
    }
}

/// Separable correlation keeping only fully contained windows.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut horiz = vec![0.0; ow * h];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        for col in 0..ow {
            horiz[row * ow + col] = taps.iter().zip(&line[col..col + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for row in 0..oh {
        for col in 0..ow {
            out[row * ow + col] = taps
                .iter()
                .enumerate()
                .map(|(j, t)| t * horiz[(row + j) * ow + col])
                .sum();
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters each window value back over its support.
fn filter_transpose(src: &[f64], ow: usize, oh: usize, w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let mut vert = vec![0.0; ow * h];
    for row in 0..oh {
        for col in 0..ow {
            let v = src[row * ow + col];
            for (j, t) in taps.iter().enumerate() {
                vert[(row + j) * ow + col] += t * v;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..ow {
            let v = vert[row * ow + col];
            for (j, t) in taps.iter().enumerate().take(k) {
                out[row * w + col + j] += t * v;
            }
        }
    }
    out
}

/// Binary mask of pixels at or above `threshold`.
pub fn binarize(img: &Image, threshold: f64) -> Vec<bool> {
    img.pixels().iter().map(|&v| v >= threshold).collect()
}

fn overlap_counts(a: &[bool], b: &[bool]) -> Result<(usize, usize, usize)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: (a.len(), 1),
            actual: (b.len(), 1),
        });
    }
    let mut inter = 0;
    let mut na = 0;
    let mut nb = 0;
    for (&x, &y) in a.iter().zip(b) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    Ok((inter, na, nb))
}

/// `2|A n B| / (|A| + |B|)`; 1 when both masks are empty.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64> {
    let (inter, na, nb) = overlap_counts(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// `|A n B| / |A u B|`; 1 when both masks are empty.
pub fn iou(a: &[bool], b: &[bool]) -> Result<f64> {
    let (inter, na, nb) = overlap_counts(a, b)?;
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Scores for one frame pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub psnr: f64,
    pub ssim: f64,
    pub dice: f64,
    pub iou: f64,
}

pub fn score_frame(predicted: &Image, truth: &Image, threshold: f64) -> Result<FrameScores> {
    let pm = binarize(predicted, threshold);
    let tm = binarize(truth, threshold);
    Ok(FrameScores {
        psnr: psnr(predicted, truth)?,
        ssim: ssim(predicted, truth)?,
        dice: dice(&pm, &tm)?,
        iou: iou(&pm, &tm)?,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let prec = f.precision().unwrap_or(2);
        write!(f, "{:.*} ± {:.*}", prec, self.mean, prec, self.std)
    }
}

/// Per-frame image metrics for one method plus their summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub threshold: f64,
    pub frames: Vec<FrameScores>,
}

impl MetricReport {
    pub fn new(method: impl Into<String>, threshold: f64) -> Self {
        Self {
            method: method.into(),
            threshold,
            frames: Vec::new(),
        }
    }

    fn summary_of(&self, f: impl Fn(&FrameScores) -> f64) -> Summary {
        // Identical frames give infinite PSNR; cap them so summaries stay finite.
        let vals: Vec<f64> = self.frames.iter().map(|s| f(s).min(100.0)).collect();
        Summary::of(&vals)
    }

    pub fn psnr(&self) -> Summary {
        self.summary_of(|s| s.psnr)
    }

    pub fn ssim(&self) -> Summary {
        self.summary_of(|s| s.ssim)
    }

    pub fn dice(&self) -> Summary {
        self.summary_of(|s| s.dice)
    }

    pub fn iou(&self) -> Summary {
        self.summary_of(|s| s.iou)
    }

    /// One JSON record per frame, then one summary record.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.frames.iter().enumerate() {
            let rec = serde_json::json!({
                "method": self.method,
                "frame": i,
                "psnr": finite_or_null(s.psnr),
                "ssim": s.ssim,
                "dice": s.dice,
                "iou": s.iou,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        let rec = serde_json::json!({
            "method": self.method,
            "summary": true,
            "threshold": self.threshold,
            "psnr_mean": self.psnr().mean, "psnr_std": self.psnr().std,
            "ssim_mean": self.ssim().mean, "ssim_std": self.ssim().std,
            "dice_mean": self.dice().mean, "dice_std": self.dice().std,
            "iou_mean": self.iou().mean, "iou_std": self.iou().std,
        });
        out.push_str(&rec.to_string());
        out.push('\n');
        out
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::Value::Null
    }
}

/// Renders reports as a `mean ± std` table with one row per method.
pub fn format_table(title: &str, reports: &[MetricReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{title}\n"));
    out.push_str(&format!(
        "{:<22} {:>16} {:>14} {:>14} {:>14}\n",
        "Method", "PSNR", "Dice Coeff.", "IoU", "SSIM"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<22} {:>16} {:>14} {:>14} {:>14}\n",
            r.method,
            format!("{:.2}", r.psnr()),
            format!("{:.2}", r.dice()),
            format!("{:.2}", r.iou()),
            format!("{:.2}", r.ssim()),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant(v: f64) -> Image {
        Image::filled(16, 16, v).unwrap()
    }

    #[test]
    fn psnr_examples() {
        assert_eq!(psnr(&constant(0.3), &constant(0.3)).unwrap(), f64::INFINITY);
        assert_relative_eq!(psnr(&constant(0.2), &constant(0.3)).unwrap(), 20.0, epsilon = 1e-9);
        assert_relative_eq!(psnr(&constant(0.0), &constant(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn psnr_dimension_mismatch() {
        let a = Image::zeros(4, 4).unwrap();
        let b = Image::zeros(4, 5).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ssim_examples() {
        let a = Image::from_fn(16, 16, |x, y| 0.5 + 0.4 * (9.0 * x).sin() * y).unwrap();
        assert_relative_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        let expect = SSIM_C1 / (1.0 + SSIM_C1);
        assert_relative_eq!(ssim(&constant(0.0), &constant(1.0)).unwrap(), expect, epsilon = 1e-12);
        assert!((expect - 1.0e-4).abs() < 1e-7);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Image::zeros(10, 20).unwrap();
        assert!(matches!(ssim(&a, &a), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn ssim_drops_under_shift() {
        let a = Image::from_fn(20, 20, |x, y| 0.5 + 0.4 * (13.0 * x + 5.0 * y).sin()).unwrap();
        let mut shifted = a.clone();
        for row in 0..20 {
            for col in 0..20 {
                shifted.set(col, row, a.get((col + 1) % 20, row));
            }
        }
        assert!(ssim(&a, &shifted).unwrap() < 1.0);
    }

    #[test]
    fn ssim_grad_matches_differences() {
        let a = Image::from_fn(14, 13, |x, y| 0.5 + 0.3 * (7.0 * x * y).sin()).unwrap();
        let b = Image::from_fn(14, 13, |x, y| 0.4 + 0.3 * (5.0 * x - 3.0 * y).cos()).unwrap();
        let (_, grad) = ssim_with_grad(&a, &b).unwrap();
        let h = 1e-5;
        for k in [0, 17, 60, 100, 181] {
            let mut p = a.pixels().to_vec();
            p[k] += h;
            let up = ssim(&Image::from_pixels(14, 13, p.clone()).unwrap(), &b).unwrap();
            p[k] -= 2.0 * h;
            let down = ssim(&Image::from_pixels(14, 13, p).unwrap(), &b).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-7 + 1e-5 * fd.abs(), "pixel {k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn overlap_examples() {
        let a = vec![true, true, false, false];
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let b = vec![false, false, true, true];
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        let all = vec![true; 4];
        assert_relative_eq!(dice(&a, &all).unwrap(), 2.0 / 3.0);
        assert_relative_eq!(iou(&a, &all).unwrap(), 0.5);
        let empty = vec![false; 4];
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn table_layout() {
        let mut r = MetricReport::new("Linear", 0.5);
        r.frames.push(FrameScores { psnr: 30.0, ssim: 0.9, dice: 0.5, iou: 0.4 });
        r.frames.push(FrameScores { psnr: 32.0, ssim: 0.9, dice: 0.7, iou: 0.6 });
        let t = format_table("Every 2nd frame", &[r]);
        assert!(t.contains("31.00 ± 1.00"));
        assert!(t.contains("Dice Coeff."));
    }
}
