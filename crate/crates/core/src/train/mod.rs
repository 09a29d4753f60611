//! Scene fitting: objective, optimizer, density control and the loop.

pub mod adam;
pub mod config;
pub mod densify;
pub mod ibfr;
pub mod loss;
pub mod trainer;

pub use config::{LearningRates, LossWeights, TrainConfig};
pub use loss::LossParts;
pub use trainer::{initial_scene, train, train_with_observer, TrainOutcome, TrainRecord};
