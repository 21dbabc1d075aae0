//! Error type shared by all modules of the crate.

use std::path::PathBuf;

use crate::image::{Axis, ExposureClass};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite sample {value} at flat index {index}")]
    NonFiniteInput { index: usize, value: f32 },

    #[error("sample {value} at flat index {index} outside [{lo}, {hi}]")]
    OutOfRange {
        index: usize,
        value: f32,
        lo: f32,
        hi: f32,
    },

    #[error("size mismatch: expected (w,h,c)={expected:?}, got {actual:?}")]
    SizeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("width {width} is odd; interleaved mosaics need an even width")]
    OddWidth { width: usize },

    #[error("height {height} is odd; row-interleaved mosaics need an even height")]
    OddHeight { height: usize },

    #[error("frame index {index} out of bounds for stack of {len}")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("need at least {need} readings, got {got}")]
    TooFewReadings { got: usize, need: usize },

    #[error("exposure layouts differ between paired readings")]
    LayoutMismatch,

    #[error("bit depth mismatch: {left} vs {right}")]
    BitDepthMismatch { left: u8, right: u8 },

    #[error("model axis is {model:?} but {actual:?} was requested")]
    AxisMismatch { model: Axis, actual: Axis },

    #[error("channel count mismatch: model has {expected}, image has {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("no observations for channel {channel} {exposure} exposure")]
    EmptyModel {
        channel: usize,
        exposure: ExposureClass,
    },

    #[error("need at least {need} populated bins, got {got}")]
    InsufficientBins { got: usize, need: usize },

    #[error("image {image:?} too small for {patch:?} patches")]
    PatchTooLarge {
        patch: (usize, usize),
        image: (usize, usize),
    },

    #[error("malformed header: {reason}")]
    MalformedHeader { reason: String },

    #[error("payload truncated: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },

    #[error("unsupported max value {maxval}; expected 2^B - 1 with B in 8..=16")]
    UnsupportedMaxVal { maxval: u32 },

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("{entry} path does not exist: {path}")]
    MissingPath { path: PathBuf, entry: String },

    #[error("{path} assigned to both split '{first}' and split '{second}'")]
    DuplicateSplit {
        path: PathBuf,
        first: String,
        second: String,
    },

    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
