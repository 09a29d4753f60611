use crate::{Error, Result};

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        Ok(Self {
            width,
            height,
            pixels: vec![value; width * height],
        })
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster { width, height });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "pixel buffer has {} values, expected {}",
                pixels.len(),
                width * height
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from a function of the normalized pixel-centre
    /// coordinates, clamping the result to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut img = Self::zeros(width, height)?;
        for row in 0..height {
            for col in 0..width {
                let (x, y) = pixel_center(col, row, width, height);
                img.pixels[row * width + col] = f(x, y).clamp(0.0, 1.0);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.pixels[row * self.width + col] = value.clamp(0.0, 1.0);
    }

    pub fn ensure_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    /// Pixelwise `alpha * self + (1 - alpha) * other`.
    pub fn blend(&self, other: &Image, alpha: f64) -> Result<Image> {
        self.ensure_same_dims(other)?;
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| (alpha * a + (1.0 - alpha) * b).clamp(0.0, 1.0))
            .collect();
        Ok(Image {
            width: self.width,
            height: self.height,
            pixels,
        })
    }

    /// Bilinear sample at normalized coordinates, clamping to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let fx = (x * self.width as f64 - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y * self.height as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
        let c0 = fx.floor() as usize;
        let r0 = fy.floor() as usize;
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let wx = fx - c0 as f64;
        let wy = fy - r0 as f64;
        let top = self.get(c0, r0) * (1.0 - wx) + self.get(c1, r0) * wx;
        let bottom = self.get(c0, r1) * (1.0 - wx) + self.get(c1, r1) * wx;
        top * (1.0 - wy) + bottom * wy
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }
}

/// Continuous coordinate of the centre of pixel `(col, row)`.
pub fn pixel_center(col: usize, row: usize, width: usize, height: usize) -> (f64, f64) {
    (
        (col as f64 + 0.5) / width as f64,
        (row as f64 + 0.5) / height as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_size_is_rejected() {
        assert!(matches!(Image::zeros(0, 4), Err(Error::EmptyRaster { .. })));
    }

    #[test]
    fn out_of_range_pixels_rejected() {
        assert!(Image::from_pixels(1, 2, vec![0.5, 1.5]).is_err());
        assert!(Image::from_pixels(1, 2, vec![0.5, f64::NAN]).is_err());
    }

    #[test]
    fn bilinear_hits_pixel_centres() {
        let img = Image::from_pixels(2, 2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        let (x, y) = pixel_center(1, 1, 2, 2);
        assert_eq!(img.sample_bilinear(x, y), 0.25);
        assert_eq!(img.sample_bilinear(0.5, 0.25), 0.5);
    }
}
