//! Dual-exposure capture simulation from clean high-speed frames.
//!
//! A burst window of `n` frames simulates one capture: the low exposure is a
//! single sharp frame, the high exposure is the temporal mean of the window
//! scaled by the exposure ratio and clamped. Both are then interleaved into
//! a full-width mosaic with one exposure class per scanline parity.

use crate::error::Error;
use crate::image::{
    interleave_columns, Alignment, Axis, ExposurePair, LinearImage, Parity, SensorConfig,
};
use crate::Result;

/// Ordered clean frames, already linearized.
#[derive(Debug, Clone)]
pub struct FrameStack {
    frames: Vec<LinearImage>,
    nominal_rate: f32,
}

impl FrameStack {
    pub fn new(frames: Vec<LinearImage>, nominal_rate: f32) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::TooFewReadings { got: 0, need: 1 });
        }
        let dims = frames[0].dims();
        for f in &frames[1..] {
            if f.dims() != dims {
                return Err(Error::SizeMismatch {
                    expected: dims,
                    actual: f.dims(),
                });
            }
        }
        Ok(FrameStack {
            frames,
            nominal_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[LinearImage] {
        &self.frames
    }

    pub fn nominal_rate(&self) -> f32 {
        self.nominal_rate
    }

    fn check_window(&self, t: usize, n: usize) -> Result<()> {
        if n == 0 || t.checked_add(n).is_none_or(|end| end > self.frames.len()) {
            return Err(Error::IndexOutOfBounds {
                index: t + n.saturating_sub(1),
                len: self.frames.len(),
            });
        }
        Ok(())
    }
}

/// Index of the sharp low frame inside the window starting at `t`.
#[inline]
pub fn low_frame_index(t: usize, config: &SensorConfig) -> usize {
    match config.alignment {
        Alignment::End => t + config.burst_length - 1,
        Alignment::Start => t,
    }
}

/// The sharp low-exposure frame for the window starting at `t`.
pub fn simulate_low_frame<'a>(
    stack: &'a FrameStack,
    t: usize,
    config: &SensorConfig,
) -> Result<&'a LinearImage> {
    stack.check_window(t, config.burst_length)?;
    Ok(&stack.frames[low_frame_index(t, config)])
}

/// The blurred high-exposure frame: per pixel
/// `min(1, r * mean(frames[t..t+n]))`.
///
/// The temporal sum is accumulated in f64 so the result is independent of
/// how callers parallelize over pixels.
pub fn simulate_high_frame(
    stack: &FrameStack,
    t: usize,
    config: &SensorConfig,
) -> Result<LinearImage> {
    let n = config.burst_length;
    stack.check_window(t, n)?;
    let first = &stack.frames[t];
    let len = first.data().len();
    let mut acc = vec![0.0f64; len];
    for frame in &stack.frames[t..t + n] {
        for (a, &v) in acc.iter_mut().zip(frame.data()) {
            *a += v as f64;
        }
    }
    let ratio = config.exposure_ratio as f64;
    let inv_n = 1.0 / n as f64;
    let data: Vec<f32> = acc
        .iter()
        .map(|&s| (ratio * (s * inv_n)).min(1.0) as f32)
        .collect();
    Ok(LinearImage::new_unchecked(
        first.width(),
        first.height(),
        first.channels(),
        data,
    ))
}

/// Keep only the scanlines of the given parity along the layout axis.
fn keep_parity_lines(image: &LinearImage, axis: Axis, parity: Parity) -> Result<LinearImage> {
    let (w, h, ch) = image.dims();
    match axis {
        Axis::Columns => {
            if w % 2 != 0 {
                return Err(Error::OddWidth { width: w });
            }
            let offset = match parity {
                Parity::Even => 0usize,
                Parity::Odd => 1,
            };
            let hw = w / 2;
            let mut data = vec![0.0f32; hw * h * ch];
            for y in 0..h {
                for j in 0..hw {
                    for c in 0..ch {
                        data[(y * hw + j) * ch + c] = image.sample(2 * j + offset, y, c);
                    }
                }
            }
            Ok(LinearImage::new_unchecked(hw, h, ch, data))
        }
        Axis::Rows => {
            if h % 2 != 0 {
                return Err(Error::OddHeight { height: h });
            }
            let offset = match parity {
                Parity::Even => 0usize,
                Parity::Odd => 1,
            };
            let hh = h / 2;
            let row = w * ch;
            let mut data = vec![0.0f32; w * hh * ch];
            for j in 0..hh {
                let src = (2 * j + offset) * row;
                data[j * row..(j + 1) * row].copy_from_slice(&image.data()[src..src + row]);
            }
            Ok(LinearImage::new_unchecked(w, hh, ch, data))
        }
    }
}

/// Simulate the distorted dual-exposure mosaic for the window at `t`.
///
/// Each exposure keeps only the source scanlines its class occupies
/// (nearest-line assignment, no prefiltering), so the mosaic has the same
/// size as one input frame.
pub fn synthesize_mosaic(stack: &FrameStack, t: usize, config: &SensorConfig) -> Result<LinearImage> {
    let low = simulate_low_frame(stack, t, config)?.clone();
    let high = simulate_high_frame(stack, t, config)?;
    mosaic_from_exposures(&low, &high, config)
}

/// Interleave full-resolution low/high exposures into a mosaic by keeping
/// each class's own scanlines.
pub fn mosaic_from_exposures(
    low: &LinearImage,
    high: &LinearImage,
    config: &SensorConfig,
) -> Result<LinearImage> {
    if !low.same_dims(high) {
        return Err(Error::SizeMismatch {
            expected: low.dims(),
            actual: high.dims(),
        });
    }
    let layout = config.layout;
    let high_parity = match layout.low_parity {
        Parity::Even => Parity::Odd,
        Parity::Odd => Parity::Even,
    };
    let pair = ExposurePair {
        low: keep_parity_lines(low, layout.axis, layout.low_parity)?,
        high: keep_parity_lines(high, layout.axis, high_parity)?,
    };
    interleave_columns(&pair, layout)
}

/// Blur-free mosaic of a single frame against its own exposure-scaled self.
/// Used as the clean counterpart of a synthesized distorted mosaic.
pub fn clean_mosaic(reference: &LinearImage, config: &SensorConfig) -> Result<LinearImage> {
    let ratio = config.exposure_ratio as f64;
    let scaled: Vec<f32> = reference
        .data()
        .iter()
        .map(|&v| (ratio * v as f64).min(1.0) as f32)
        .collect();
    let high = LinearImage::new_unchecked(
        reference.width(),
        reference.height(),
        reference.channels(),
        scaled,
    );
    mosaic_from_exposures(reference, &high, config)
}
