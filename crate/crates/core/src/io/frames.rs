use std::fs;
use std::path::{Path, PathBuf};

use crate::image::Image;
use crate::io::pgm::read_pgm;
use crate::{Error, Result};

/// Ordered grayscale frames on parallel, equispaced planes.
///
/// Timestamps are `k / (M - 1)` for the `k`-th of the `M` frames originally
/// loaded; subsets keep the timestamps and indices of their source frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub frames: Vec<Image>,
    pub timestamps: Vec<f64>,
    /// Position of each frame in the originally loaded sequence.
    pub source_indices: Vec<usize>,
}

impl FrameStack {
    /// Wraps a full sequence, assigning evenly spaced timestamps in `[0, 1]`.
    pub fn from_frames(frames: Vec<Image>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFewFrames(frames.len()));
        }
        for f in &frames[1..] {
            frames[0].ensure_same_dims(f)?;
        }
        let m = frames.len();
        Ok(Self {
            timestamps: (0..m).map(|k| timestamp(k, m)).collect(),
            source_indices: (0..m).collect(),
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames.first().map(Image::dims).unwrap_or((0, 0))
    }

    /// True when every pixel of every frame is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.frames
            .iter()
            .all(|f| f.pixels().iter().all(|&v| v == 0.0 || v == 1.0))
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> FrameStack {
        let mut out = FrameStack {
            frames: Vec::new(),
            timestamps: Vec::new(),
            source_indices: Vec::new(),
        };
        for k in (0..self.len()).filter(|&k| keep(k)) {
            out.frames.push(self.frames[k].clone());
            out.timestamps.push(self.timestamps[k]);
            out.source_indices.push(self.source_indices[k]);
        }
        out
    }
}

/// Timestamp of frame `k` of `m`.
pub fn timestamp(k: usize, m: usize) -> f64 {
    k as f64 / (m - 1) as f64
}

/// Leave-frame-out split: frames `0, s, 2s, ...` train, the rest are held out.
/// `stride == 1` yields an empty held-out set.
pub fn subsample(stack: &FrameStack, stride: usize) -> Result<(FrameStack, FrameStack)> {
    if stride == 0 || stride >= stack.len() {
        return Err(Error::InvalidArgument(format!(
            "stride {stride} must be in 1..{}",
            stack.len()
        )));
    }
    let train = stack.select(|k| k % stride == 0);
    let held_out = stack.select(|k| k % stride != 0);
    if train.len() < 2 {
        return Err(Error::TooFewFrames(train.len()));
    }
    Ok((train, held_out))
}

/// Shell-style match supporting `*` and `?`.
pub fn wildcard_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let n: Vec<char> = name.chars().collect();
    let (mut pi, mut ni) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ni < n.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == n[ni]) {
            pi += 1;
            ni += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ni));
            pi += 1;
        } else if let Some((sp, sn)) = star {
            pi = sp + 1;
            ni = sn + 1;
            star = Some((sp, sn + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

/// Loads every file in `dir` whose name matches `pattern`, in lexicographic
/// order, as one frame stack.
pub fn load_frame_stack(dir: impl AsRef<Path>, pattern: &str) -> Result<FrameStack> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if name.to_ascii_lowercase().contains("pose") {
            return Err(Error::PoseUnsupported(path));
        }
        if path.is_file() && wildcard_match(pattern, name) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.len() < 2 {
        return Err(Error::TooFewFrames(paths.len()));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = read_pgm(p)?;
        if let Some(first) = frames.first() {
            let first: &Image = first;
            if first.dims() != img.dims() {
                return Err(Error::FrameSizeMismatch {
                    first: paths[0].clone(),
                    first_dims: first.dims(),
                    second: p.clone(),
                    second_dims: img.dims(),
                });
            }
        }
        frames.push(img);
    }
    FrameStack::from_frames(frames)
}

/// Writes frames as `frame_0000.pgm`, `frame_0001.pgm`, ... in `dir`.
pub fn write_frame_stack(
    stack: &FrameStack,
    dir: impl AsRef<Path>,
    depth: crate::io::pgm::BitDepth,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for (img, idx) in stack.frames.iter().zip(&stack.source_indices) {
        let path = dir.join(format!("frame_{idx:04}.pgm"));
        crate::io::pgm::write_pgm(img, &path, depth)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::pgm::{write_pgm, BitDepth};

    fn stack(m: usize) -> FrameStack {
        let frames = (0..m)
            .map(|k| Image::filled(3, 2, k as f64 / m as f64).unwrap())
            .collect();
        FrameStack::from_frames(frames).unwrap()
    }

    #[test]
    fn three_frames_timestamps() {
        assert_eq!(stack(3).timestamps, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn stride_two_of_nine() {
        let (train, test) = subsample(&stack(9), 2).unwrap();
        assert_eq!(train.source_indices, vec![0, 2, 4, 6, 8]);
        assert_eq!(test.source_indices, vec![1, 3, 5, 7]);
        assert_eq!(test.timestamps[0], 1.0 / 8.0);
    }

    #[test]
    fn stride_three_of_ten() {
        let (train, test) = subsample(&stack(10), 3).unwrap();
        assert_eq!(train.source_indices, vec![0, 3, 6, 9]);
        assert_eq!(test.len(), 6);
    }

    #[test]
    fn stride_one_and_too_large() {
        let (_, test) = subsample(&stack(5), 1).unwrap();
        assert!(test.is_empty());
        assert!(subsample(&stack(5), 5).is_err());
        assert!(subsample(&stack(5), 0).is_err());
    }

    #[test]
    fn held_out_timestamps_are_stable() {
        let s = stack(16);
        for stride in [2, 3, 5] {
            let (train, test) = subsample(&s, stride).unwrap();
            for part in [&train, &test] {
                for (t, &k) in part.timestamps.iter().zip(&part.source_indices) {
                    assert_eq!(*t, timestamp(k, 16));
                }
            }
        }
    }

    #[test]
    fn wildcard() {
        assert!(wildcard_match("*.pgm", "slice_01.pgm"));
        assert!(wildcard_match("slice_??.pgm", "slice_01.pgm"));
        assert!(!wildcard_match("*.pgm", "slice_01.png"));
        assert!(wildcard_match("*", "anything"));
    }

    #[test]
    fn loads_directory_in_order_and_rejects_mixed_sizes() {
        let dir = tempfile::tempdir().unwrap();
        for k in 0..3 {
            let img = Image::filled(4, 4, k as f64 / 2.0).unwrap();
            write_pgm(&img, dir.path().join(format!("s{k}.pgm")), BitDepth::Eight).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let s = load_frame_stack(dir.path(), "*.pgm").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.frames[2].get(0, 0), 1.0);

        write_pgm(&Image::zeros(5, 4).unwrap(), dir.path().join("s3.pgm"), BitDepth::Eight).unwrap();
        let err = load_frame_stack(dir.path(), "*.pgm").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s0.pgm") && msg.contains("s3.pgm"), "{msg}");
    }

    #[test]
    fn pose_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("poses.txt"), "1 0 0").unwrap();
        assert!(matches!(
            load_frame_stack(dir.path(), "*.pgm"),
            Err(Error::PoseUnsupported(_))
        ));
    }
}
