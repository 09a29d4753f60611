//! `MGS1` scene files.
//!
//! Layout (all integers `u32`, all floats `f32`, little endian):
//!
//! ```text
//! "MGS1" version count frame_count width height mode motion_degree scale_degree
//! then one array of `count` floats per parameter slot, in field order:
//!   mean_x, mean_y, temporal_mean, log_temporal_spread, rotation,
//!   log_scale_0, log_scale_1, motion_x[0..D], motion_y[0..D],
//!   scale[0..Da], opacity_logit, color
//! ```
//!
//! Parameters are stored as `f32`; scenes whose parameters are already
//! `f32`-representable (every trained or loaded scene) round-trip bit-exactly.

use std::fs;
use std::path::Path;

use crate::gaussian::{param_count, FoldedGaussian, Mode, Scene};
use crate::{Error, Result};

pub const SCENE_MAGIC: &[u8; 4] = b"MGS1";
pub const SCENE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 8 * 4;

pub fn encode_scene(scene: &Scene) -> Vec<u8> {
    let n = scene.len();
    let slots = param_count(scene.motion_degree, scene.scale_degree);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * slots);
    out.extend_from_slice(SCENE_MAGIC);
    let mode = match scene.mode {
        Mode::Interpolation => 0u32,
        Mode::Mesh => 1,
    };
    for v in [
        SCENE_VERSION,
        n as u32,
        scene.frame_count as u32,
        scene.width as u32,
        scene.height as u32,
        mode,
        scene.motion_degree as u32,
        scene.scale_degree as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }

    let flat: Vec<Vec<f64>> = scene
        .gaussians
        .iter()
        .map(|g| {
            let mut v = Vec::with_capacity(slots);
            g.for_each_param(|_, x| v.push(x));
            v
        })
        .collect();
    for slot in 0..slots {
        for g in &flat {
            out.extend_from_slice(&(g[slot] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_scene(bytes: &[u8]) -> Result<Scene> {
    if bytes.len() < 4 || &bytes[..4] != SCENE_MAGIC {
        return Err(Error::BadMagic { expected: "MGS1" });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != SCENE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: SCENE_VERSION,
        });
    }
    let n = word(1) as usize;
    let frame_count = word(2) as usize;
    let width = word(3) as usize;
    let height = word(4) as usize;
    let mode = match word(5) {
        0 => Mode::Interpolation,
        1 => Mode::Mesh,
        other => {
            return Err(Error::InvalidArgument(format!("unknown scene mode tag {other}")))
        }
    };
    let motion_degree = word(6) as usize;
    let scale_degree = word(7) as usize;
    let slots = param_count(motion_degree, scale_degree);

    let needed = HEADER_LEN + 4 * n * slots;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::InvalidArgument(format!(
            "{} trailing bytes after scene payload",
            bytes.len() - needed
        )));
    }

    let value = |slot: usize, i: usize| {
        let off = HEADER_LEN + 4 * (slot * n + i);
        f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64
    };
    let mut scene = Scene::new(frame_count, width, height, mode, motion_degree, scale_degree);
    for i in 0..n {
        let mut g = FoldedGaussian::isotropic([0.0; 2], 0.0, 1.0, 1.0, 0.5, 0.0, motion_degree, scale_degree);
        let mut slot = 0;
        g.for_each_param_mut(|_, v| {
            *v = value(slot, i);
            slot += 1;
        });
        scene.gaussians.push(g);
    }
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_scene(scene)).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_scene(&bytes)
}
