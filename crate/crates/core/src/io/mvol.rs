//! `MVOL1` raw float volumes.
//!
//! ```text
//! MVOL1\n
//! nx ny nz\n
//! sx sy sz\n
//! nx*ny*nz little-endian f32 values, z-major
//! ```

use std::fs;
use std::path::Path;

use crate::image::Image;
use crate::io::frames::FrameStack;
use crate::mesh::ScalarVolume;
use crate::{Error, Result};

pub const VOLUME_MAGIC: &str = "MVOL1";

pub fn encode_volume(vol: &ScalarVolume) -> Vec<u8> {
    let [nx, ny, nz] = vol.dims;
    let [sx, sy, sz] = vol.spacing;
    let mut out = format!("{VOLUME_MAGIC}\n{nx} {ny} {nz}\n{sx} {sy} {sz}\n").into_bytes();
    for &v in &vol.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8], name: &str) -> Result<ScalarVolume> {
    let mut lines = Vec::with_capacity(3);
    let mut pos = 0;
    for _ in 0..3 {
        let Some(end) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            if lines.is_empty() {
                return Err(Error::BadMagic { expected: VOLUME_MAGIC });
            }
            return Err(Error::Truncated {
                needed: pos + 1,
                found: bytes.len(),
            });
        };
        lines.push(String::from_utf8_lossy(&bytes[pos..pos + end]).into_owned());
        pos += end + 1;
        if lines.len() == 1 && lines[0] != VOLUME_MAGIC {
            return Err(Error::BadMagic { expected: VOLUME_MAGIC });
        }
    }
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: name.into(),
        line,
        msg,
    };
    let dims: Vec<usize> = lines[1]
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_err(2, format!("bad dimension {s:?}"))))
        .collect::<Result<_>>()?;
    let spacing: Vec<f64> = lines[2]
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_err(3, format!("bad spacing {s:?}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(parse_err(2, "expected three dimensions".into()));
    }
    if spacing.len() != 3 {
        return Err(parse_err(3, "expected three spacings".into()));
    }
    let count = dims[0] * dims[1] * dims[2];
    let payload = &bytes[pos..];
    if payload.len() < 4 * count {
        return Err(Error::Truncated {
            needed: 4 * count,
            found: payload.len(),
        });
    }
    if payload.len() > 4 * count {
        return Err(Error::InvalidArgument(format!(
            "{} trailing bytes after volume payload",
            payload.len() - 4 * count
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    ScalarVolume::new(
        [dims[0], dims[1], dims[2]],
        [spacing[0], spacing[1], spacing[2]],
        values,
    )
}

pub fn write_volume(vol: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_volume(vol)).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_volume(&bytes, &path.display().to_string())
}

/// Treats each z slice of a volume as one frame.
pub fn volume_to_frames(vol: &ScalarVolume) -> Result<FrameStack> {
    let frames = (0..vol.dims[2])
        .map(|k| Image::from_pixels(vol.dims[0], vol.dims[1], vol.slice(k).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    FrameStack::from_frames(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol() -> ScalarVolume {
        let values = (0..24).map(|i| i as f64 / 32.0).collect();
        ScalarVolume::new([2, 3, 4], [0.5, 0.25, 1.0], values).unwrap()
    }

    #[test]
    fn round_trip() {
        let v = vol();
        let back = decode_volume(&encode_volume(&v), "mem").unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn errors() {
        assert!(matches!(decode_volume(b"MVOL2\n", "m"), Err(Error::BadMagic { .. })));
        let bytes = encode_volume(&vol());
        assert!(matches!(
            decode_volume(&bytes[..bytes.len() - 1], "m"),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            decode_volume(b"MVOL1\n2 x 1\n1 1 1\n", "m"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn slices_become_frames() {
        let s = volume_to_frames(&vol()).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.dims(), (2, 3));
        assert_eq!(s.frames[1].get(0, 0), 6.0 / 32.0);
    }
}
