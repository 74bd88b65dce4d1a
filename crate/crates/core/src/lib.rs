//! Trend modeling for wireless network usage traces.
//!
//! The crate covers the whole path from raw trace files to trained maps and
//! synthetic data:
//!
//! - [`ingest`] parses netflow, DHCP and AP-session logs and aggregates online
//!   time per user, domain, building and month.
//! - [`matrix`] turns usage records into normalized user×feature matrices and
//!   user×domain×building tensors.
//! - [`som`] trains self-organizing maps with vector or matrix weights.
//! - [`analysis`] computes U-matrices, clusters map nodes into major trends and
//!   clusters features by correlation distance.
//! - [`gmm`] derives a Gaussian mixture from a trained map and samples from it.
//! - [`render`] writes grid images with a blue-to-red colormap.
//!
//! Data-parallel inner loops run on rayon when the `parallel` feature is
//! enabled (the default). Every result is identical with and without it.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod gmm;
pub mod ingest;
pub mod linalg;
pub mod matrix;
pub mod par;
pub mod render;
pub mod som;
pub mod textfmt;

pub use error::{Error, Result};
pub use par::Exec;
