//! Time-conditioned 2D Gaussian scenes for slice stacks.
//!
//! A stack of parallel grayscale slices is modelled as a set of folded
//! Gaussians: 2D Gaussians whose mean and covariance move with a
//! polynomial in time and whose presence is gated by a temporal Gaussian.
//! The crate trains such scenes against frame stacks, renders them at
//! arbitrary times, extracts isosurface meshes from dense renders, and
//! applies geometric edits through control points.

pub mod edit;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod image;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod phantom;
pub mod render;
pub mod train;

pub use error::{Error, Result};
pub use gaussian::{
    condition_at_time, cov_from_params, eval_density, poly_eval, ConditionedGaussian,
    FoldedGaussian, Mode, ParamKind, Scene,
};
pub use image::Image;
pub use io::FrameStack;
pub use mesh::{marching_cubes, render_volume, ScalarVolume, TriMesh};
pub use render::{render_frame, render_with_grad, FrameLoss, FrameLossWeights, GradientBuffer};
pub use train::{train, TrainConfig, TrainOutcome};
