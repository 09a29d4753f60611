//! Binary PGM (P5) images, 8 or 16 bits per sample.

use std::fs;
use std::path::Path;

use crate::image::Image;
use crate::{Error, Result};

/// Sample depth used when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

pub fn encode_pgm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.max_value();
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    for &v in img.pixels() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

pub fn write_pgm(img: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img, depth)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, &path.display().to_string())
}

/// Parses a P5 image; intensities are divided by the header's maxval.
pub fn decode_pgm(bytes: &[u8], name: &str) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::BadMagic { expected: "P5" });
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = header_number(bytes, &mut pos, name)?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse {
            path: name.into(),
            line: 1,
            msg: format!("maxval {maxval} out of range"),
        });
    }
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let needed = width * height * bytes_per;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: payload.len(),
        });
    }
    let scale = maxval as f64;
    let pixels = (0..width * height)
        .map(|i| {
            let raw = if bytes_per == 1 {
                payload[i] as u32
            } else {
                u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u32
            };
            (raw as f64 / scale).min(1.0)
        })
        .collect();
    Image::from_pixels(width, height, pixels)
}

fn header_number(bytes: &[u8], pos: &mut usize, name: &str) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&c) = bytes.get(*pos) {
                    *pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => {
                return Err(Error::Truncated {
                    needed: *pos + 1,
                    found: bytes.len(),
                })
            }
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|c| c.is_ascii_digit()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            path: name.into(),
            line: 1,
            msg: "malformed PGM header".into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eight_bit_max_is_one() {
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0]);
        let img = decode_pgm(&bytes, "mem").unwrap();
        assert_eq!(img.pixels(), &[1.0, 0.0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5 # made by hand\n1 1\n# another\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x80, 0x00]);
        let img = decode_pgm(&bytes, "mem").unwrap();
        assert_eq!(img.get(0, 0), 32768.0 / 65535.0);
    }

    #[test]
    fn truncated_raster() {
        let bytes = b"P5\n4 4\n255\n\x01\x02".to_vec();
        assert!(matches!(decode_pgm(&bytes, "mem"), Err(Error::Truncated { .. })));
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0", "mem"), Err(Error::BadMagic { .. })));
    }

    proptest! {
        #[test]
        fn quantized_round_trip(vals in proptest::collection::vec(0u16..=65535, 12), sixteen in any::<bool>()) {
            let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
            let max = depth.max_value() as f64;
            let pixels: Vec<f64> = vals
                .iter()
                .map(|&v| (v as u32 % (depth.max_value() + 1)) as f64 / max)
                .collect();
            let img = Image::from_pixels(4, 3, pixels).unwrap();
            let back = decode_pgm(&encode_pgm(&img, depth), "mem").unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
