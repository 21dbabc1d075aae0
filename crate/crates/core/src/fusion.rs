//! Non-learned direct fusion of a dual-exposure mosaic into a linear HDR
//! image: deinterlace, bicubically upsample each exposure to full width,
//! radiometrically align the high exposure, and blend with hat weights so
//! clamped or noise-floor samples contribute nothing.

use crate::error::Error;
use crate::image::{
    dequantize, deinterleave_columns, Axis, ExposureLayout, LinearImage, Parity, QuantizedReading,
};
use crate::Result;

/// Hat-function blending parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    /// Raw values at or below this are treated as noise floor.
    pub low_floor: f32,
    /// Raw values at or above this are treated as clamped.
    pub high_ceiling: f32,
    pub exposure_ratio: f32,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            low_floor: 0.02,
            high_ceiling: 0.98,
            exposure_ratio: 4.0,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.low_floor && self.low_floor < self.high_ceiling && self.high_ceiling <= 1.0)
        {
            return Err(Error::InvalidConfig {
                message: format!(
                    "fusion cutoffs must satisfy 0 <= {} < {} <= 1",
                    self.low_floor, self.high_ceiling
                ),
            });
        }
        if self.exposure_ratio.is_nan() || self.exposure_ratio < 1.0 {
            return Err(Error::InvalidConfig {
                message: format!("exposure ratio {} must be >= 1", self.exposure_ratio),
            });
        }
        Ok(())
    }

    /// Triangle weight on raw (pre-alignment) values, zero outside the
    /// floor/ceiling cutoffs.
    #[inline]
    pub fn hat(&self, raw: f32) -> f32 {
        if raw < self.low_floor || raw > self.high_ceiling {
            0.0
        } else {
            (raw - self.low_floor).min(self.high_ceiling - raw)
        }
    }
}

/// Catmull-Rom half-phase weights for a sample midway between knots.
const CR_HALF: [f64; 4] = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];

/// Double the width of a half-resolution image.
///
/// `phase` names the output column parity that holds known samples; those
/// are copied through exactly. The missing columns are Catmull-Rom
/// (a = -0.5) interpolations of the four nearest knots with indices clamped
/// at the edges. Interpolated values are clamped at zero so the radiance
/// invariant survives the kernel's negative lobes.
pub fn bicubic_upsample_width2x(half: &LinearImage, phase: Parity) -> LinearImage {
    let (hw, h, ch) = half.dims();
    let width = hw * 2;
    let offset = match phase {
        Parity::Even => 0usize,
        Parity::Odd => 1,
    };
    let mut data = vec![0.0f32; width * h * ch];
    let clamp_idx = |j: isize| -> usize { j.clamp(0, hw as isize - 1) as usize };
    for y in 0..h {
        for x in 0..width {
            if x % 2 == offset {
                let j = (x - offset) / 2;
                for c in 0..ch {
                    data[(y * width + x) * ch + c] = half.sample(j, y, c);
                }
            } else {
                // x sits midway between half-grid knots j0 and j0+1.
                let j0 = (x as isize - offset as isize - 1).div_euclid(2);
                for c in 0..ch {
                    let mut acc = 0.0f64;
                    for (k, w) in CR_HALF.iter().enumerate() {
                        let j = clamp_idx(j0 - 1 + k as isize);
                        acc += w * half.sample(j, y, c) as f64;
                    }
                    data[(y * width + x) * ch + c] = acc.max(0.0) as f32;
                }
            }
        }
    }
    LinearImage::new_unchecked(width, h, ch, data)
}

/// Fuse a dual-exposure mosaic into linear HDR, in low-exposure units.
///
/// Weights are evaluated on the raw upsampled values before the high frame
/// is divided by the exposure ratio, so clamped high pixels get weight ~0.
/// Where both weights vanish the low value is used as-is.
pub fn direct_fuse(
    mosaic: &LinearImage,
    layout: ExposureLayout,
    weights: &FusionWeights,
) -> Result<LinearImage> {
    weights.validate()?;
    if layout.axis == Axis::Rows {
        let fused = direct_fuse(&mosaic.transposed(), layout.transposed(), weights)?;
        return Ok(fused.transposed());
    }
    let pair = deinterleave_columns(mosaic, layout)?;
    let high_parity = match layout.low_parity {
        Parity::Even => Parity::Odd,
        Parity::Odd => Parity::Even,
    };
    let low = bicubic_upsample_width2x(&pair.low, layout.low_parity);
    let high = bicubic_upsample_width2x(&pair.high, high_parity);

    let ratio = weights.exposure_ratio as f64;
    let data: Vec<f32> = low
        .data()
        .iter()
        .zip(high.data())
        .map(|(&l, &h)| {
            let wl = weights.hat(l) as f64;
            let wh = weights.hat(h) as f64;
            if wl + wh == 0.0 {
                l
            } else {
                let aligned = h as f64 / ratio;
                ((wl * l as f64 + wh * aligned) / (wl + wh)) as f32
            }
        })
        .collect();
    Ok(LinearImage::new_unchecked(
        mosaic.width(),
        mosaic.height(),
        mosaic.channels(),
        data,
    ))
}

/// Build a clean reference from repeated low-exposure captures of a static
/// scene, optionally overridden by a long exposure where it is unclipped.
///
/// The reference is the mean of the dequantized low captures; where the
/// long capture reads below `ceiling` its value divided by `ratio_long`
/// replaces the average (lower noise at the same radiance).
pub fn ground_truth_average(
    low_captures: &[QuantizedReading],
    long_capture: Option<&QuantizedReading>,
    ratio_long: f32,
    ceiling: f32,
) -> Result<LinearImage> {
    if low_captures.len() < 2 {
        return Err(Error::TooFewReadings {
            got: low_captures.len(),
            need: 2,
        });
    }
    let first = &low_captures[0];
    for r in &low_captures[1..] {
        if r.dims() != first.dims() {
            return Err(Error::SizeMismatch {
                expected: first.dims(),
                actual: r.dims(),
            });
        }
    }
    if let Some(long) = long_capture {
        if long.dims() != first.dims() {
            return Err(Error::SizeMismatch {
                expected: first.dims(),
                actual: long.dims(),
            });
        }
    }

    let len = first.data().len();
    let mut acc = vec![0.0f64; len];
    for capture in low_captures {
        let max = capture.max_value() as f64;
        for (a, &q) in acc.iter_mut().zip(capture.data()) {
            *a += q as f64 / max;
        }
    }
    let inv = 1.0 / low_captures.len() as f64;
    let mut data: Vec<f32> = acc.iter().map(|&s| (s * inv) as f32).collect();

    if let Some(long) = long_capture {
        let long_norm = dequantize(long);
        for (v, &l) in data.iter_mut().zip(long_norm.data()) {
            if l < ceiling {
                *v = l / ratio_long;
            }
        }
    }
    Ok(LinearImage::new_unchecked(
        first.width(),
        first.height(),
        first.channels(),
        data,
    ))
}
