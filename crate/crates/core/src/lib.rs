//! Dual-exposure sensor toolkit: learn spatio-temporal distortion models
//! (pixel noise, row/column noise, dual-exposure motion blur) from paired
//! captures, synthesize unlimited distorted/clean training pairs from clean
//! high-speed video, and evaluate with the direct fusion baseline and DSSIM.

pub mod blur;
pub mod dataset;
pub mod error;
pub mod fusion;
pub mod image;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod model_io;
pub mod noise;
pub mod rng;
pub mod rowcol;
pub mod virtual_sensor;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
