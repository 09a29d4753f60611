//! In-between frame targets: convex blends of adjacent training frames.

use crate::image::Image;
use crate::{Error, Result};

/// Allowed range of the blend factor.
pub const ALPHA_RANGE: (f64, f64) = (0.2, 0.8);

/// Two consecutive frames of the training subset.
#[derive(Debug, Clone, Copy)]
pub struct FramePair<'a> {
    pub earlier: &'a Image,
    pub t_earlier: f64,
    pub later: &'a Image,
    pub t_later: f64,
}

impl<'a> FramePair<'a> {
    pub fn new(earlier: &'a Image, t_earlier: f64, later: &'a Image, t_later: f64) -> Result<Self> {
        if !(t_earlier < t_later) {
            return Err(Error::InvalidArgument(format!(
                "frame pair timestamps must increase ({t_earlier} >= {t_later})"
            )));
        }
        earlier.ensure_same_dims(later)?;
        Ok(Self {
            earlier,
            t_earlier,
            later,
            t_later,
        })
    }
}

/// Returns `(t_alpha, I_alpha)` with `I_alpha = alpha * I_t + (1 - alpha) * I_{t+1}`
/// and the timestamp blended the same way. `alpha` close to 1 favours the
/// earlier frame.
pub fn ibfr_sample(pair: &FramePair<'_>, alpha: f64) -> Result<(f64, Image)> {
    ibfr_sample_in(pair, alpha, ALPHA_RANGE)
}

/// [`ibfr_sample`] with a caller-chosen admissible range.
pub fn ibfr_sample_in(pair: &FramePair<'_>, alpha: f64, range: (f64, f64)) -> Result<(f64, Image)> {
    if !(alpha >= range.0 && alpha <= range.1) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [{}, {}]",
            range.0, range.1
        )));
    }
    let t = alpha * pair.t_earlier + (1.0 - alpha) * pair.t_later;
    Ok((t, pair.earlier.blend(pair.later, alpha)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_blend() {
        let a = Image::filled(4, 4, 0.0).unwrap();
        let b = Image::filled(4, 4, 1.0).unwrap();
        let pair = FramePair::new(&a, 0.25, &b, 0.5).unwrap();
        let (t, img) = ibfr_sample(&pair, 0.5).unwrap();
        assert_relative_eq!(t, 0.375);
        assert!(img.pixels().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn equal_operands() {
        let a = Image::from_fn(5, 3, |x, y| x * y).unwrap();
        let pair = FramePair::new(&a, 0.0, &a, 1.0).unwrap();
        for alpha in [0.2, 0.37, 0.8] {
            let (_, img) = ibfr_sample(&pair, alpha).unwrap();
            for (p, q) in img.pixels().iter().zip(a.pixels()) {
                assert_relative_eq!(p, q, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn alpha_weights_the_earlier_frame() {
        let a = Image::filled(2, 2, 1.0).unwrap();
        let b = Image::filled(2, 2, 0.0).unwrap();
        let pair = FramePair::new(&a, 0.0, &b, 1.0).unwrap();
        let (t, img) = ibfr_sample(&pair, 0.2).unwrap();
        assert_relative_eq!(t, 0.8);
        assert!(img.pixels().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn out_of_range_alpha() {
        let a = Image::filled(2, 2, 1.0).unwrap();
        let pair = FramePair::new(&a, 0.0, &a, 1.0).unwrap();
        assert!(ibfr_sample(&pair, 0.1).is_err());
        assert!(ibfr_sample(&pair, 0.85).is_err());
    }

    #[test]
    fn pair_requires_increasing_times() {
        let a = Image::filled(2, 2, 1.0).unwrap();
        assert!(FramePair::new(&a, 0.5, &a, 0.5).is_err());
    }
}
