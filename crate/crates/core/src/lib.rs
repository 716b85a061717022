//! Pseudo-stereo pair synthesis from single images and depth maps, with a
//! classical matcher, evaluation metrics and dataset-mixture planning.

pub mod error;
pub mod fill;
pub mod formats;
pub mod metrics;
pub mod mix;
pub mod numeric;
pub mod pipeline;
pub mod sgm;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
