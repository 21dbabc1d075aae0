//! Parametric sensor simulator with a known noise law.
//!
//! Exists so estimators can be tested against ground truth: the conditional
//! variance of its readings is `gain * signal + read_noise` (quantized
//! units), plus an optional per-row offset with standard deviation
//! `row_sigma`. Everything is counter-based, so a seed pins the output.

use crate::error::Error;
use crate::image::{
    max_value, ExposureClass, ExposureLayout, LinearImage, QuantizedReading,
};
use crate::rng::normal_f64;
use crate::Result;

const STREAM_SENSOR_PIXEL: u64 = 0x5650;
const STREAM_SENSOR_ROW: u64 = 0x5652;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualSensorParams {
    /// Signal-proportional variance coefficient, quantized units.
    pub gain: f64,
    /// Signal-independent variance floor, quantized units squared.
    pub read_noise: f64,
    /// Standard deviation of the per-row offset, quantized units.
    pub row_sigma: f64,
    pub exposure_ratio: f32,
    pub bit_depth: u8,
}

impl Default for VirtualSensorParams {
    fn default() -> Self {
        VirtualSensorParams {
            gain: 0.5,
            read_noise: 10.0,
            row_sigma: 2.0,
            exposure_ratio: 4.0,
            bit_depth: 12,
        }
    }
}

/// How the simulated capture exposes the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptureExposure {
    /// Dual-exposure mosaic: each pixel's class comes from the layout.
    Mosaic(ExposureLayout),
    /// Whole-frame capture at one exposure.
    Uniform(ExposureClass),
}

impl CaptureExposure {
    fn layout(self) -> ExposureLayout {
        match self {
            CaptureExposure::Mosaic(layout) => layout,
            CaptureExposure::Uniform(_) => ExposureLayout::default(),
        }
    }

    #[inline]
    fn class_of(self, x: usize, y: usize) -> ExposureClass {
        match self {
            CaptureExposure::Mosaic(layout) => layout.class_of(x, y),
            CaptureExposure::Uniform(class) => class,
        }
    }
}

/// Simulate one capture of a clean radiance image in `[0, 1]`.
///
/// Per pixel: the exposure class scales the radiance (high integrates
/// `exposure_ratio` times more light and clamps), heteroscedastic Gaussian
/// noise with variance `gain * signal + read_noise` is added along with the
/// pixel's row offset, and the result is rounded and clamped to range.
pub fn virtual_sensor(
    clean: &LinearImage,
    params: &VirtualSensorParams,
    exposure: CaptureExposure,
    seed: u64,
) -> Result<QuantizedReading> {
    if !(8..=16).contains(&params.bit_depth) {
        return Err(Error::InvalidConfig {
            message: format!("bit depth {} outside 8..=16", params.bit_depth),
        });
    }
    if params.gain < 0.0 || params.read_noise < 0.0 || params.row_sigma < 0.0 {
        return Err(Error::InvalidConfig {
            message: "noise parameters must be non-negative".into(),
        });
    }
    let (w, h, ch) = clean.dims();
    let max = max_value(params.bit_depth) as f64;
    let ratio = params.exposure_ratio as f64;
    let mut data = Vec::with_capacity(w * h * ch);
    for y in 0..h {
        // One offset per (row, channel), shared by every pixel in the row.
        let row_offsets: Vec<f64> = (0..ch)
            .map(|c| {
                if params.row_sigma == 0.0 {
                    0.0
                } else {
                    params.row_sigma
                        * normal_f64(seed, [y as u64, c as u64, STREAM_SENSOR_ROW, 0])
                }
            })
            .collect();
        for x in 0..w {
            let class = exposure.class_of(x, y);
            let pixel = (y * w + x) as u64;
            for (c, &row_offset) in row_offsets.iter().enumerate() {
                let v = clean.sample(x, y, c) as f64;
                debug_assert!((0.0..=1.0).contains(&v));
                let scaled = match class {
                    ExposureClass::Low => v,
                    ExposureClass::High => (ratio * v).min(1.0),
                };
                let signal = scaled * max;
                let sigma = (params.gain * signal + params.read_noise).sqrt();
                let noise = if sigma == 0.0 {
                    0.0
                } else {
                    sigma * normal_f64(seed, [pixel, c as u64, STREAM_SENSOR_PIXEL, 0])
                };
                let reading = (signal + noise + row_offset).round().clamp(0.0, max);
                data.push(reading as u16);
            }
        }
    }
    QuantizedReading::from_vec(w, h, ch, params.bit_depth, exposure.layout(), data)
}

/// The noiseless counterpart of [`virtual_sensor`]: exposure scaling and
/// quantization only. Pairs produced with the same exposure argument are
/// aligned clean references for estimator tests.
pub fn virtual_clean_reading(
    clean: &LinearImage,
    params: &VirtualSensorParams,
    exposure: CaptureExposure,
) -> Result<QuantizedReading> {
    let quiet = VirtualSensorParams {
        gain: 0.0,
        read_noise: 0.0,
        row_sigma: 0.0,
        ..*params
    };
    virtual_sensor(clean, &quiet, exposure, 0)
}
