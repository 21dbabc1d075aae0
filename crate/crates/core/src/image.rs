//! Image containers, radiometric conversions, quantization and exposure
//! interleaving.
//!
//! [`LinearImage`] is the universal working representation: row-major,
//! channel-interleaved, finite, non-negative `f32` radiance. Sensor readings
//! are [`QuantizedReading`]s: integer samples at a configured bit depth with
//! an exposure class assigned to every scanline parity.

use crate::error::Error;
use crate::Result;

/// Exposure class of a pixel site on a dual-exposure sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExposureClass {
    Low,
    High,
}

impl ExposureClass {
    pub const ALL: [ExposureClass; 2] = [ExposureClass::Low, ExposureClass::High];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            ExposureClass::Low => 0,
            ExposureClass::High => 1,
        }
    }

    pub fn from_index(i: usize) -> ExposureClass {
        if i == 0 {
            ExposureClass::Low
        } else {
            ExposureClass::High
        }
    }
}

impl std::fmt::Display for ExposureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExposureClass::Low => write!(f, "low"),
            ExposureClass::High => write!(f, "high"),
        }
    }
}

/// Image axis along which scanlines run or exposures alternate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Columns,
    Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    fn matches(self, index: usize) -> bool {
        match self {
            Parity::Even => index.is_multiple_of(2),
            Parity::Odd => index % 2 == 1,
        }
    }
}

/// Assignment of exposure classes to scanline parities.
///
/// The default is column-interleaved with the low exposure on even columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExposureLayout {
    pub axis: Axis,
    pub low_parity: Parity,
}

impl Default for ExposureLayout {
    fn default() -> Self {
        ExposureLayout {
            axis: Axis::Columns,
            low_parity: Parity::Even,
        }
    }
}

impl ExposureLayout {
    /// Exposure class of the pixel at `(x, y)`.
    #[inline]
    pub fn class_of(&self, x: usize, y: usize) -> ExposureClass {
        let idx = match self.axis {
            Axis::Columns => x,
            Axis::Rows => y,
        };
        if self.low_parity.matches(idx) {
            ExposureClass::Low
        } else {
            ExposureClass::High
        }
    }

    /// Class of a whole line with the given index along the interleave axis.
    #[inline]
    pub fn class_of_line(&self, line: usize) -> ExposureClass {
        if self.low_parity.matches(line) {
            ExposureClass::Low
        } else {
            ExposureClass::High
        }
    }

    pub fn transposed(self) -> ExposureLayout {
        ExposureLayout {
            axis: match self.axis {
                Axis::Columns => Axis::Rows,
                Axis::Rows => Axis::Columns,
            },
            low_parity: self.low_parity,
        }
    }
}

impl std::fmt::Display for ExposureLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let axis = match self.axis {
            Axis::Columns => "col",
            Axis::Rows => "row",
        };
        let parity = match self.low_parity {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        write!(f, "{axis}-{parity}")
    }
}

impl std::str::FromStr for ExposureLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (axis, parity) = s.split_once('-').ok_or_else(|| Error::InvalidConfig {
            message: format!("layout '{s}' is not of the form col-even/col-odd/row-even/row-odd"),
        })?;
        let axis = match axis {
            "col" | "column" | "columns" => Axis::Columns,
            "row" | "rows" => Axis::Rows,
            other => {
                return Err(Error::InvalidConfig {
                    message: format!("unknown layout axis '{other}'"),
                })
            }
        };
        let low_parity = match parity {
            "even" => Parity::Even,
            "odd" => Parity::Odd,
            other => {
                return Err(Error::InvalidConfig {
                    message: format!("unknown layout parity '{other}'"),
                })
            }
        };
        Ok(ExposureLayout { axis, low_parity })
    }
}

/// Where the short exposure sits inside the burst window.
///
/// `End` matches sensors whose low and high exposures finish together; the
/// low frame is then the last frame of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    #[default]
    End,
    Start,
}

/// Capture parameters shared across the synthesis and fusion pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub bit_depth: u8,
    pub exposure_ratio: f32,
    pub burst_length: usize,
    pub gamma: f32,
    pub layout: ExposureLayout,
    pub alignment: Alignment,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            bit_depth: 12,
            exposure_ratio: 4.0,
            burst_length: 4,
            gamma: 2.2,
            layout: ExposureLayout::default(),
            alignment: Alignment::End,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(8..=16).contains(&self.bit_depth) {
            return Err(Error::InvalidConfig {
                message: format!("bit depth {} outside 8..=16", self.bit_depth),
            });
        }
        if self.exposure_ratio.is_nan() || self.exposure_ratio < 1.0 {
            return Err(Error::InvalidConfig {
                message: format!("exposure ratio {} must be >= 1", self.exposure_ratio),
            });
        }
        if self.burst_length < 1 {
            return Err(Error::InvalidConfig {
                message: "burst length must be >= 1".into(),
            });
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(Error::InvalidConfig {
                message: format!("gamma {} must be > 0", self.gamma),
            });
        }
        Ok(())
    }
}

/// Maximum sample value at a bit depth, `2^B - 1`.
#[inline]
pub fn max_value(bit_depth: u8) -> u16 {
    debug_assert!((8..=16).contains(&bit_depth));
    (((1u32 << bit_depth) - 1) & 0xFFFF) as u16
}

/// Quantize one normalized value with round-half-away-from-zero.
#[inline]
pub fn quantize_value(v: f32, bit_depth: u8) -> u16 {
    let max = max_value(bit_depth) as f64;
    (v as f64 * max).round() as u16
}

/// Full-resolution floating-point radiance image. Row-major,
/// channel-interleaved, all values finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl LinearImage {
    /// Build an image from raw samples, validating the invariants.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidConfig {
                message: format!("channel count {channels} not supported (1 or 3)"),
            });
        }
        if data.len() != width * height * channels {
            return Err(Error::SizeMismatch {
                expected: (width, height, channels),
                actual: (data.len(), 1, 1),
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteInput { index, value });
            }
            if value < 0.0 {
                return Err(Error::OutOfRange {
                    index,
                    value,
                    lo: 0.0,
                    hi: f32::INFINITY,
                });
            }
        }
        Ok(LinearImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Constructor for values the caller guarantees are finite and >= 0.
    pub(crate) fn new_unchecked(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        debug_assert!(data.iter().all(|v| v.is_finite() && *v >= 0.0));
        LinearImage {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!(value.is_finite() && value >= 0.0);
        LinearImage {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, ch: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + ch]
    }

    pub fn same_dims(&self, other: &LinearImage) -> bool {
        self.dims() == other.dims()
    }

    /// Swap the two spatial axes.
    pub fn transposed(&self) -> LinearImage {
        let mut data = vec![0.0f32; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                for ch in 0..self.channels {
                    data[(x * self.height + y) * self.channels + ch] = self.sample(x, y, ch);
                }
            }
        }
        LinearImage::new_unchecked(self.height, self.width, self.channels, data)
    }
}

/// Integer sensor reading at a fixed bit depth with an exposure layout.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedReading {
    width: usize,
    height: usize,
    channels: usize,
    bit_depth: u8,
    layout: ExposureLayout,
    data: Vec<u16>,
}

impl QuantizedReading {
    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        bit_depth: u8,
        layout: ExposureLayout,
        data: Vec<u16>,
    ) -> Result<Self> {
        if !(8..=16).contains(&bit_depth) {
            return Err(Error::InvalidConfig {
                message: format!("bit depth {bit_depth} outside 8..=16"),
            });
        }
        if data.len() != width * height * channels {
            return Err(Error::SizeMismatch {
                expected: (width, height, channels),
                actual: (data.len(), 1, 1),
            });
        }
        let max = max_value(bit_depth);
        for (index, &value) in data.iter().enumerate() {
            if value > max {
                return Err(Error::OutOfRange {
                    index,
                    value: value as f32,
                    lo: 0.0,
                    hi: max as f32,
                });
            }
        }
        Ok(QuantizedReading {
            width,
            height,
            channels,
            bit_depth,
            layout,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    #[inline]
    pub fn layout(&self) -> ExposureLayout {
        self.layout
    }

    #[inline]
    pub fn data(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, ch: usize) -> u16 {
        self.data[(y * self.width + x) * self.channels + ch]
    }

    pub fn same_dims(&self, other: &QuantizedReading) -> bool {
        self.dims() == other.dims()
    }

    #[inline]
    pub fn max_value(&self) -> u16 {
        max_value(self.bit_depth)
    }
}

/// The two half-resolution subimages of a dual-exposure mosaic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposurePair {
    pub low: LinearImage,
    pub high: LinearImage,
}

/// Apply an inverse display gamma, mapping `[0,1]` display values to linear
/// radiance via `v^gamma`.
pub fn linearize(image: &LinearImage, gamma: f32) -> Result<LinearImage> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidConfig {
            message: format!("gamma {gamma} must be > 0"),
        });
    }
    for (index, &value) in image.data().iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteInput { index, value });
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange {
                index,
                value,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    let data = image.data().iter().map(|&v| v.powf(gamma)).collect();
    Ok(LinearImage::new_unchecked(
        image.width(),
        image.height(),
        image.channels(),
        data,
    ))
}

/// Quantize normalized radiance in `[0,1]` to integer samples.
pub fn quantize(image: &LinearImage, bit_depth: u8, layout: ExposureLayout) -> Result<QuantizedReading> {
    if !(8..=16).contains(&bit_depth) {
        return Err(Error::InvalidConfig {
            message: format!("bit depth {bit_depth} outside 8..=16"),
        });
    }
    for (index, &value) in image.data().iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange {
                index,
                value,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    let data: Vec<u16> = image
        .data()
        .iter()
        .map(|&v| quantize_value(v, bit_depth))
        .collect();
    QuantizedReading::from_vec(
        image.width(),
        image.height(),
        image.channels(),
        bit_depth,
        layout,
        data,
    )
}

/// Map integer samples back to normalized radiance `v = q / (2^B - 1)`.
///
/// `quantize(dequantize(q))` recovers `q` exactly for every sample.
pub fn dequantize(reading: &QuantizedReading) -> LinearImage {
    let max = reading.max_value() as f64;
    let data = reading
        .data()
        .iter()
        .map(|&q| (q as f64 / max) as f32)
        .collect();
    LinearImage::new_unchecked(reading.width(), reading.height(), reading.channels(), data)
}

/// Interleave two half-size subimages into a full-resolution mosaic.
pub fn interleave_columns(pair: &ExposurePair, layout: ExposureLayout) -> Result<LinearImage> {
    if !pair.low.same_dims(&pair.high) {
        return Err(Error::SizeMismatch {
            expected: pair.low.dims(),
            actual: pair.high.dims(),
        });
    }
    let (hw, hh, ch) = pair.low.dims();
    match layout.axis {
        Axis::Columns => {
            let width = hw * 2;
            let mut data = vec![0.0f32; width * hh * ch];
            let (low_off, high_off) = match layout.low_parity {
                Parity::Even => (0usize, 1usize),
                Parity::Odd => (1, 0),
            };
            for y in 0..hh {
                for j in 0..hw {
                    for c in 0..ch {
                        data[(y * width + 2 * j + low_off) * ch + c] = pair.low.sample(j, y, c);
                        data[(y * width + 2 * j + high_off) * ch + c] = pair.high.sample(j, y, c);
                    }
                }
            }
            Ok(LinearImage::new_unchecked(width, hh, ch, data))
        }
        Axis::Rows => {
            let height = hh * 2;
            let row = hw * ch;
            let mut data = vec![0.0f32; hw * height * ch];
            let (low_off, high_off) = match layout.low_parity {
                Parity::Even => (0usize, 1usize),
                Parity::Odd => (1, 0),
            };
            for j in 0..hh {
                let lo = &pair.low.data()[j * row..(j + 1) * row];
                let hi = &pair.high.data()[j * row..(j + 1) * row];
                data[(2 * j + low_off) * row..(2 * j + low_off + 1) * row].copy_from_slice(lo);
                data[(2 * j + high_off) * row..(2 * j + high_off + 1) * row].copy_from_slice(hi);
            }
            Ok(LinearImage::new_unchecked(hw, height, ch, data))
        }
    }
}

/// Exact inverse of [`interleave_columns`].
pub fn deinterleave_columns(mosaic: &LinearImage, layout: ExposureLayout) -> Result<ExposurePair> {
    let (w, h, ch) = mosaic.dims();
    match layout.axis {
        Axis::Columns => {
            if w % 2 != 0 {
                return Err(Error::OddWidth { width: w });
            }
            let hw = w / 2;
            let mut low = vec![0.0f32; hw * h * ch];
            let mut high = vec![0.0f32; hw * h * ch];
            let (low_off, high_off) = match layout.low_parity {
                Parity::Even => (0usize, 1usize),
                Parity::Odd => (1, 0),
            };
            for y in 0..h {
                for j in 0..hw {
                    for c in 0..ch {
                        low[(y * hw + j) * ch + c] = mosaic.sample(2 * j + low_off, y, c);
                        high[(y * hw + j) * ch + c] = mosaic.sample(2 * j + high_off, y, c);
                    }
                }
            }
            Ok(ExposurePair {
                low: LinearImage::new_unchecked(hw, h, ch, low),
                high: LinearImage::new_unchecked(hw, h, ch, high),
            })
        }
        Axis::Rows => {
            if h % 2 != 0 {
                return Err(Error::OddHeight { height: h });
            }
            let hh = h / 2;
            let row = w * ch;
            let mut low = vec![0.0f32; w * hh * ch];
            let mut high = vec![0.0f32; w * hh * ch];
            let (low_off, high_off) = match layout.low_parity {
                Parity::Even => (0usize, 1usize),
                Parity::Odd => (1, 0),
            };
            for j in 0..hh {
                let src_lo = (2 * j + low_off) * row;
                let src_hi = (2 * j + high_off) * row;
                low[j * row..(j + 1) * row].copy_from_slice(&mosaic.data()[src_lo..src_lo + row]);
                high[j * row..(j + 1) * row].copy_from_slice(&mosaic.data()[src_hi..src_hi + row]);
            }
            Ok(ExposurePair {
                low: LinearImage::new_unchecked(w, hh, ch, low),
                high: LinearImage::new_unchecked(w, hh, ch, high),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn img(w: usize, h: usize, data: Vec<f32>) -> LinearImage {
        LinearImage::from_vec(w, h, 1, data).unwrap()
    }

    #[test]
    fn linearize_fixed_points_and_midpoint() {
        let image = img(3, 1, vec![0.0, 1.0, 0.5]);
        let out = linearize(&image, 2.2).unwrap();
        assert_eq!(out.data()[0], 0.0);
        assert_eq!(out.data()[1], 1.0);
        // Independent evaluation of the power expression.
        let expected = (2.2f64 * 0.5f64.ln()).exp();
        assert_relative_eq!(out.data()[2] as f64, expected, epsilon = 1e-6);
        assert_relative_eq!(out.data()[2], 0.21764, epsilon = 1e-5);
    }

    #[test]
    fn linearize_rejects_bad_samples() {
        let image = img(1, 1, vec![0.5]);
        assert!(matches!(
            linearize(&image, 0.0),
            Err(Error::InvalidConfig { .. })
        ));
        let over = img(1, 1, vec![1.5]);
        assert!(matches!(
            linearize(&over, 2.2),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn linearize_is_monotone() {
        let vals: Vec<f32> = (0..=100).map(|i| i as f32 / 100.0).collect();
        let image = img(vals.len(), 1, vals);
        for gamma in [0.5f32, 1.0, 2.2, 4.0] {
            let out = linearize(&image, gamma).unwrap();
            for pair in out.data().windows(2) {
                assert!(pair[1] >= pair[0]);
            }
        }
    }

    #[test]
    fn quantize_endpoints_and_half() {
        let image = img(3, 1, vec![0.0, 1.0, 0.5]);
        let q = quantize(&image, 12, ExposureLayout::default()).unwrap();
        assert_eq!(q.data(), &[0, 4095, 2048]);
    }

    #[test]
    fn quantize_rejects_out_of_range() {
        let image = img(1, 1, vec![1.001]);
        assert!(matches!(
            quantize(&image, 12, ExposureLayout::default()),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn dequantize_values() {
        let q = QuantizedReading::from_vec(
            3,
            1,
            1,
            12,
            ExposureLayout::default(),
            vec![0, 4095, 2048],
        )
        .unwrap();
        let out = dequantize(&q);
        assert_eq!(out.data()[0], 0.0);
        assert_eq!(out.data()[1], 1.0);
        assert_relative_eq!(out.data()[2] as f64, 2048.0 / 4095.0, epsilon = 1e-7);
    }

    #[test]
    fn quantize_dequantize_is_identity_on_integers() {
        for bit_depth in [8u8, 12, 16] {
            let max = max_value(bit_depth) as usize;
            let samples: Vec<u16> = (0..=max).map(|q| q as u16).collect();
            let reading = QuantizedReading::from_vec(
                samples.len(),
                1,
                1,
                bit_depth,
                ExposureLayout::default(),
                samples.clone(),
            )
            .unwrap();
            let round = quantize(&dequantize(&reading), bit_depth, reading.layout()).unwrap();
            assert_eq!(round.data(), reading.data());
        }
    }

    #[test]
    fn dequantize_quantize_error_bound() {
        let n = 10_001;
        let vals: Vec<f32> = (0..n).map(|i| i as f32 / (n - 1) as f32).collect();
        let image = img(n, 1, vals);
        let q = quantize(&image, 12, ExposureLayout::default()).unwrap();
        let back = dequantize(&q);
        let bound = 0.5 / 4095.0 + 1e-7;
        for (a, b) in image.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= bound, "{a} vs {b}");
        }
    }

    #[test]
    fn interleave_unrolled_example() {
        let low = img(2, 1, vec![1.0, 2.0]);
        let high = img(2, 1, vec![9.0, 8.0]);
        let mosaic = interleave_columns(
            &ExposurePair { low, high },
            ExposureLayout::default(),
        )
        .unwrap();
        assert_eq!(mosaic.data(), &[1.0, 9.0, 2.0, 8.0]);
    }

    #[test]
    fn interleave_constant_symmetry() {
        let low = LinearImage::filled(4, 3, 3, 0.7);
        let high = LinearImage::filled(4, 3, 3, 0.7);
        let mosaic = interleave_columns(
            &ExposurePair { low, high },
            ExposureLayout::default(),
        )
        .unwrap();
        assert!(mosaic.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn interleave_size_mismatch() {
        let low = LinearImage::filled(4, 3, 1, 0.5);
        let high = LinearImage::filled(4, 2, 1, 0.5);
        assert!(matches!(
            interleave_columns(&ExposurePair { low, high }, ExposureLayout::default()),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn deinterleave_rejects_odd_width() {
        let mosaic = LinearImage::filled(5, 2, 1, 0.1);
        assert!(matches!(
            deinterleave_columns(&mosaic, ExposureLayout::default()),
            Err(Error::OddWidth { width: 5 })
        ));
    }

    #[test]
    fn row_layout_round_trip() {
        let layout = ExposureLayout {
            axis: Axis::Rows,
            low_parity: Parity::Odd,
        };
        let low = img(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let high = img(3, 2, vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4]);
        let mosaic = interleave_columns(
            &ExposurePair {
                low: low.clone(),
                high: high.clone(),
            },
            layout,
        )
        .unwrap();
        assert_eq!(mosaic.dims(), (3, 4, 1));
        // Odd rows carry the low exposure.
        assert_eq!(mosaic.sample(0, 1, 0), 0.1);
        assert_eq!(mosaic.sample(0, 0, 0), 0.9);
        let pair = deinterleave_columns(&mosaic, layout).unwrap();
        assert_eq!(pair.low, low);
        assert_eq!(pair.high, high);
    }

    #[test]
    fn layout_parsing_round_trips() {
        for s in ["col-even", "col-odd", "row-even", "row-odd"] {
            let layout: ExposureLayout = s.parse().unwrap();
            assert_eq!(layout.to_string(), s);
        }
        assert!("diag-even".parse::<ExposureLayout>().is_err());
    }

    #[test]
    fn transpose_involution() {
        let image = img(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = image.transposed();
        assert_eq!(t.dims(), (2, 3, 1));
        assert_eq!(t.sample(1, 2, 0), image.sample(2, 1, 0));
        assert_eq!(t.transposed(), image);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SensorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.exposure_ratio = 0.5;
        assert!(cfg.validate().is_err());
        cfg.exposure_ratio = 4.0;
        cfg.bit_depth = 7;
        assert!(cfg.validate().is_err());
    }
}
