use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gaussian::{logit, FoldedGaussian, Mode, Scene};
use crate::io::FrameStack;
use crate::train::adam::{adam_step, project, AdamState};
use crate::train::config::TrainConfig;
use crate::train::densify::{densify_and_prune, DensifyStats};
use crate::train::ibfr::{ibfr_sample_in, FramePair};
use crate::train::loss::{objective_with_grad, LossParts, StepTargets};
use crate::{Error, Result};

/// Initial opacity of every Gaussian.
pub const INITIAL_OPACITY: f64 = 0.1;
/// Initial spatial standard deviation, in pixels.
pub const INITIAL_SCALE_PX: f64 = 2.0;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub frame: usize,
    pub loss: LossParts,
    pub gaussians: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub densify: Option<DensifyEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensifyEvent {
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub scene: Scene,
    pub log: Vec<TrainRecord>,
}

/// Random scene seeded from the frames: uniform positions and times,
/// colors sampled from the nearest frame.
pub fn initial_scene(frames: &FrameStack, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Scene {
    let (w, h) = frames.dims();
    let n = frames.len();
    let mut scene = Scene::new(n, w, h, config.mode, config.motion_degree, config.scale_degree);
    let spread = 1.5 * 2.0 / n as f64;
    for _ in 0..config.initial_gaussian_count {
        let mean = [rng.random::<f64>(), rng.random::<f64>()];
        let t = rng.random::<f64>();
        let nearest = nearest_frame(&frames.timestamps, t);
        let color = frames.frames[nearest].sample_bilinear(mean[0], mean[1]).clamp(0.0, 1.0);
        let mut g = FoldedGaussian::isotropic(
            mean,
            t,
            spread,
            1.0,
            INITIAL_OPACITY,
            color,
            config.motion_degree,
            config.scale_degree,
        );
        g.log_scales = [(INITIAL_SCALE_PX / w as f64).ln(), (INITIAL_SCALE_PX / h as f64).ln()];
        g.opacity_logit = logit(INITIAL_OPACITY);
        scene.gaussians.push(g);
    }
    scene
}

fn nearest_frame(times: &[f64], t: f64) -> usize {
    (0..times.len())
        .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
        .unwrap_or(0)
}

/// Fits a scene to `frames`. Deterministic for a fixed seed, independent of
/// the thread count.
pub fn train(frames: &FrameStack, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(frames, config, |_| {})
}

/// [`train`], calling `observe` after every iteration.
pub fn train_with_observer(
    frames: &FrameStack,
    config: &TrainConfig,
    mut observe: impl FnMut(&TrainRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if frames.len() < 2 {
        return Err(Error::TooFewFrames(frames.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut scene = initial_scene(frames, config, &mut rng);
    let (w, h) = frames.dims();
    let weights = config.weights.for_mode(config.mode);
    let use_ibfr = config.mode == Mode::Interpolation && weights.interp > 0.0;
    let m = frames.len();

    let mut adam = AdamState::new(&scene);
    let mut stats = DensifyStats::new(scene.len());
    let mut log = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let k = it % m;
        let ibfr = if use_ibfr {
            let lo = if k == 0 {
                0
            } else if k == m - 1 || rng.random::<bool>() {
                k - 1
            } else {
                k
            };
            let pair = FramePair::new(
                &frames.frames[lo],
                frames.timestamps[lo],
                &frames.frames[lo + 1],
                frames.timestamps[lo + 1],
            )?;
            let (a0, a1) = config.ibfr_alpha_range;
            let alpha = rng.random_range(a0..=a1);
            Some(ibfr_sample_in(&pair, alpha, config.ibfr_alpha_range)?)
        } else {
            None
        };
        let targets = StepTargets {
            frame_time: frames.timestamps[k],
            frame: &frames.frames[k],
            ibfr,
        };
        let (parts, grads) = objective_with_grad(&scene, &targets, &weights)?;
        if !parts.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                detail: format!("{parts:?}"),
            });
        }
        let progress = it as f64 / config.iterations as f64;
        adam_step(&mut scene, &grads, &mut adam, &config.learning_rates, progress)?;
        project(&mut scene);
        if config.densify {
            stats.record(&grads, w, h);
        }

        let mut event = None;
        let step = it + 1;
        if config.densify
            && step >= config.densify_start
            && step <= config.densify_stop
            && step % config.densify_interval == 0
        {
            let out = densify_and_prune(&scene, &stats, config);
            adam.remap(&out.origin, &out.scene);
            scene = out.scene;
            stats = DensifyStats::new(scene.len());
            event = Some(DensifyEvent {
                cloned: out.cloned,
                split: out.split,
                pruned: out.pruned,
            });
        }
        let record = TrainRecord {
            iteration: it,
            frame: frames.source_indices[k],
            loss: parts,
            gaussians: scene.len(),
            densify: event,
        };
        observe(&record);
        log.push(record);
    }
    scene.quantize();
    Ok(TrainOutcome { scene, log })
}
