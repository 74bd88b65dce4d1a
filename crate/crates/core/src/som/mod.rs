//! Self-organizing maps with vector weights (one aspect) or matrix weights
//! (domain × building).
//!
//! Matrix weights are stored row-major as flat vectors, so Frobenius
//! distance between matrices is the Euclidean distance between their flat
//! forms and both kinds of map share one training loop.

pub(crate) mod grid;
mod init;
pub(crate) mod io;
pub(crate) mod model;
mod schedule;
mod train;

pub use grid::{map_distance, neighborhood, GridSpec, Topology};
pub use init::{initialize, map_dimensions, InitMode};
pub use io::{read_model, write_model};
pub use model::{
    find_bmu, quantization_error, topographic_error, FeatureLabels, SomModel, TrainingData,
};
pub use schedule::{Decay, TrainingSchedule};
pub use train::{train, train_from, TrainOutcome, Trainer};
