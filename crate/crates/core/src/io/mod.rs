//! File formats: PGM frames, `MGS1` scenes, `MVOL1` volumes.

pub mod frames;
pub mod mvol;
pub mod pgm;
pub mod scene_file;

pub use frames::{load_frame_stack, subsample, timestamp, write_frame_stack, FrameStack};
pub use mvol::{read_volume, volume_to_frames, write_volume};
pub use pgm::{read_pgm, write_pgm, BitDepth};
pub use scene_file::{load_scene, save_scene};
