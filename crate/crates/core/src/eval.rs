//! Leave-frame-out evaluation, the linear baseline, and loss ablations.

use std::fmt;
use std::str::FromStr;

use crate::image::Image;
use crate::io::{subsample, FrameStack};
use crate::metrics::{score_frame, MetricReport, DEFAULT_MASK_THRESHOLD};
use crate::render::render_frame;
use crate::train::{train, TrainConfig};
use crate::{Error, Result};

/// Pixelwise blend of the two frames bracketing `t`; exact at frame times.
pub fn linear_baseline(stack: &FrameStack, t: f64) -> Result<Image> {
    let times = &stack.timestamps;
    let (first, last) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::TooFewFrames(0)),
    };
    if !(t >= first && t <= last) {
        return Err(Error::InvalidArgument(format!(
            "time {t} outside the frame span [{first}, {last}]"
        )));
    }
    if let Some(k) = times.iter().position(|&s| s == t) {
        return Ok(stack.frames[k].clone());
    }
    let hi = times.partition_point(|&s| s < t);
    let lo = hi - 1;
    // Weight of the earlier frame, matching the in-between blend convention.
    let alpha = (times[hi] - t) / (times[hi] - times[lo]);
    stack.frames[lo].blend(&stack.frames[hi], alpha)
}

/// Which regularizers a training run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ablation {
    Full,
    NoIbfr,
    NoSigma,
    Neither,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoIbfr, Ablation::NoSigma, Ablation::Neither];

    pub fn apply(self, config: &TrainConfig) -> TrainConfig {
        let mut c = config.clone();
        if matches!(self, Ablation::NoIbfr | Ablation::Neither) {
            c.weights.interp = 0.0;
        }
        if matches!(self, Ablation::NoSigma | Ablation::Neither) {
            c.weights.sigma = 0.0;
        }
        c
    }

    pub fn label(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoIbfr => "no-ibfr",
            Ablation::NoSigma => "no-sigma",
            Ablation::Neither => "neither",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| format!("unknown ablation `{s}` (expected full, no-ibfr, no-sigma or neither)"))
    }
}

/// A training/held-out partition of a stack.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: FrameStack,
    pub held_out: FrameStack,
}

impl Split {
    pub fn new(stack: &FrameStack, stride: usize) -> Result<Self> {
        let (train, held_out) = subsample(stack, stride)?;
        if held_out.is_empty() {
            return Err(Error::InvalidArgument(format!("stride {stride} leaves no held-out frames")));
        }
        let leaked = train.source_indices.iter().any(|i| held_out.source_indices.contains(i));
        assert!(!leaked, "held-out frames leaked into the training set");
        Ok(Self { train, held_out })
    }
}

/// Scores `predict(t)` against every held-out frame.
pub fn score_predictions(
    method: &str,
    held_out: &FrameStack,
    mut predict: impl FnMut(f64) -> Result<Image>,
) -> Result<MetricReport> {
    let mut report = MetricReport::new(method, DEFAULT_MASK_THRESHOLD);
    for (truth, &t) in held_out.frames.iter().zip(&held_out.timestamps) {
        let pred = predict(t)?;
        report.frames.push(score_frame(&pred, truth, DEFAULT_MASK_THRESHOLD)?);
    }
    Ok(report)
}

/// Metric reports for the linear baseline and one trained variant per
/// requested ablation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub stride: usize,
    pub baseline: MetricReport,
    pub variants: Vec<(Ablation, MetricReport)>,
}

impl Evaluation {
    pub fn reports(&self) -> Vec<MetricReport> {
        let mut out: Vec<MetricReport> = self.variants.iter().map(|(_, r)| r.clone()).collect();
        out.push(self.baseline.clone());
        out
    }

    pub fn variant(&self, ablation: Ablation) -> Option<&MetricReport> {
        self.variants.iter().find(|(a, _)| *a == ablation).map(|(_, r)| r)
    }
}

pub fn method_name(ablation: Ablation) -> String {
    match ablation {
        Ablation::Full => "foldsplat".into(),
        other => format!("foldsplat-{other}"),
    }
}

/// Trains on every `stride`-th frame and scores interpolation of the rest.
pub fn evaluate(stack: &FrameStack, stride: usize, config: &TrainConfig, ablations: &[Ablation]) -> Result<Evaluation> {
    let split = Split::new(stack, stride)?;
    let (w, h) = stack.dims();
    let baseline = score_predictions("linear", &split.held_out, |t| linear_baseline(&split.train, t))?;
    let mut variants = Vec::new();
    for &ab in ablations {
        let scene = train(&split.train, &ab.apply(config))?.scene;
        let report = score_predictions(&method_name(ab), &split.held_out, |t| render_frame(&scene, t, w, h))?;
        variants.push((ab, report));
    }
    Ok(Evaluation {
        stride,
        baseline,
        variants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_stack(values: &[f64]) -> FrameStack {
        FrameStack::from_frames(values.iter().map(|&v| Image::filled(4, 4, v).unwrap()).collect()).unwrap()
    }

    #[test]
    fn exact_at_frame_times() {
        let s = const_stack(&[0.1, 0.7, 0.3]);
        assert_eq!(linear_baseline(&s, 0.5).unwrap(), s.frames[1]);
        assert_eq!(linear_baseline(&s, 1.0).unwrap(), s.frames[2]);
    }

    #[test]
    fn midpoint_of_black_and_white() {
        let s = const_stack(&[0.0, 1.0]);
        assert!((linear_baseline(&s, 0.5).unwrap().get(1, 1) - 0.5).abs() < 1e-15);
        assert!(linear_baseline(&s, 1.5).is_err());
    }

    #[test]
    fn matches_in_between_blend() {
        use crate::train::ibfr::{ibfr_sample, FramePair};
        let s = const_stack(&[0.2, 0.9]);
        let pair = FramePair::new(&s.frames[0], 0.0, &s.frames[1], 1.0).unwrap();
        let (t, img) = ibfr_sample(&pair, 0.3).unwrap();
        let lin = linear_baseline(&s, t).unwrap();
        assert!((lin.get(0, 0) - img.get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn split_is_disjoint_and_rejects_bad_strides() {
        let s = const_stack(&[0.0; 9]);
        let split = Split::new(&s, 2).unwrap();
        assert_eq!(split.train.len() + split.held_out.len(), 9);
        assert!(Split::new(&s, 9).is_err());
        assert!(Split::new(&s, 1).is_err());
    }

    #[test]
    fn ablations_zero_weights() {
        let c = TrainConfig::default();
        let n = Ablation::Neither.apply(&c);
        assert_eq!((n.weights.interp, n.weights.sigma), (0.0, 0.0));
        assert_eq!(Ablation::Full.apply(&c), c);
        assert_eq!("no-sigma".parse::<Ablation>().unwrap(), Ablation::NoSigma);
    }
}
