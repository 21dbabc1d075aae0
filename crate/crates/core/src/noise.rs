//! Non-parametric conditional pixel-noise model.
//!
//! Estimation counts, for every channel and exposure class, how often the
//! sensor reads `x` when the clean value is `y`. The counts are turned into
//! per-`y` inverse cumulative tables so synthesis can draw a reading for any
//! clean value with a single uniform variate.
//!
//! Fixed-pattern offsets are calibrated and removed before estimation so the
//! histograms capture only the stochastic part of the noise.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Error;
use crate::image::{
    max_value, quantize_value, ExposureClass, ExposureLayout, LinearImage, QuantizedReading,
};
use crate::rng::unit_f64;
use crate::Result;

const STREAM_PIXEL_NOISE: u64 = 0x504E;

/// Per-pixel additive offsets in quantized units, residual about the global
/// mean of each exposure class and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPatternMap {
    width: usize,
    height: usize,
    channels: usize,
    offsets: Vec<f32>,
}

impl FixedPatternMap {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn offsets(&self) -> &[f32] {
        &self.offsets
    }

    pub fn zero(width: usize, height: usize, channels: usize) -> Self {
        FixedPatternMap {
            width,
            height,
            channels,
            offsets: vec![0.0; width * height * channels],
        }
    }
}

/// Estimate the fixed pattern from captures of a static uniform scene.
///
/// Each reading contributes `sample - mean(class, channel)`, so the scene
/// brightness of the calibration target cancels.
pub fn estimate_fixed_pattern(readings: &[QuantizedReading]) -> Result<FixedPatternMap> {
    if readings.len() < 2 {
        return Err(Error::TooFewReadings {
            got: readings.len(),
            need: 2,
        });
    }
    let first = &readings[0];
    let (w, h, ch) = first.dims();
    let layout = first.layout();
    for r in &readings[1..] {
        if r.dims() != first.dims() {
            return Err(Error::SizeMismatch {
                expected: first.dims(),
                actual: r.dims(),
            });
        }
        if r.layout() != layout {
            return Err(Error::LayoutMismatch);
        }
    }

    let mut acc = vec![0.0f64; w * h * ch];
    for reading in readings {
        // Global mean per (channel, exposure class) of this reading.
        let mut sums = vec![0.0f64; ch * 2];
        let mut counts = vec![0u64; ch * 2];
        for y in 0..h {
            for x in 0..w {
                let e = layout.class_of(x, y).index();
                for c in 0..ch {
                    sums[c * 2 + e] += reading.sample(x, y, c) as f64;
                    counts[c * 2 + e] += 1;
                }
            }
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        for y in 0..h {
            for x in 0..w {
                let e = layout.class_of(x, y).index();
                for c in 0..ch {
                    acc[(y * w + x) * ch + c] +=
                        reading.sample(x, y, c) as f64 - means[c * 2 + e];
                }
            }
        }
    }
    let inv = 1.0 / readings.len() as f64;
    let offsets = acc.iter().map(|&a| (a * inv) as f32).collect();
    Ok(FixedPatternMap {
        width: w,
        height: h,
        channels: ch,
        offsets,
    })
}

/// Subtract the fixed-pattern offsets, rounding and clamping to range.
pub fn remove_fixed_pattern(
    reading: &QuantizedReading,
    map: &FixedPatternMap,
) -> Result<QuantizedReading> {
    if reading.dims() != map.dims() {
        return Err(Error::SizeMismatch {
            expected: map.dims(),
            actual: reading.dims(),
        });
    }
    let max = reading.max_value() as f64;
    let data: Vec<u16> = reading
        .data()
        .iter()
        .zip(map.offsets())
        .map(|(&q, &off)| (q as f64 - off as f64).round().clamp(0.0, max) as u16)
        .collect();
    QuantizedReading::from_vec(
        reading.width(),
        reading.height(),
        reading.channels(),
        reading.bit_depth(),
        reading.layout(),
        data,
    )
}

/// Counts of sensor readings `x` conditioned on clean values `y` for one
/// channel and exposure class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalHistogram {
    pub channel: usize,
    pub exposure: ExposureClass,
    bit_depth: u8,
    rows: Vec<BTreeMap<u16, u64>>,
    total: u64,
}

impl ConditionalHistogram {
    fn new(channel: usize, exposure: ExposureClass, bit_depth: u8) -> Self {
        let bins = max_value(bit_depth) as usize + 1;
        ConditionalHistogram {
            channel,
            exposure,
            bit_depth,
            rows: (0..bins).map(|_| BTreeMap::new()).collect(),
            total: 0,
        }
    }

    #[inline]
    pub fn record(&mut self, y: u16, x: u16) {
        *self.rows[y as usize].entry(x).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn row(&self, y: u16) -> &BTreeMap<u16, u64> {
        &self.rows[y as usize]
    }

    pub fn populated(&self) -> impl Iterator<Item = u16> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(y, _)| y as u16)
    }

    fn merge_from(&mut self, other: &ConditionalHistogram) {
        for (row, src) in self.rows.iter_mut().zip(&other.rows) {
            for (&x, &n) in src {
                *row.entry(x).or_insert(0) += n;
            }
        }
        self.total += other.total;
    }
}

/// Histograms for every (channel, exposure) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseHistograms {
    bit_depth: u8,
    channels: usize,
    hists: Vec<ConditionalHistogram>,
    pub pair_count: u32,
}

impl NoiseHistograms {
    pub fn new(channels: usize, bit_depth: u8) -> Self {
        let hists = (0..channels * 2)
            .map(|i| {
                ConditionalHistogram::new(i / 2, ExposureClass::from_index(i % 2), bit_depth)
            })
            .collect();
        NoiseHistograms {
            bit_depth,
            channels,
            hists,
            pair_count: 0,
        }
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn hist(&self, channel: usize, exposure: ExposureClass) -> &ConditionalHistogram {
        &self.hists[channel * 2 + exposure.index()]
    }

    fn hist_mut(&mut self, channel: usize, exposure: ExposureClass) -> &mut ConditionalHistogram {
        &mut self.hists[channel * 2 + exposure.index()]
    }

    /// Merge two partial accumulations. Integer addition, so the result is
    /// the same for any grouping or ordering of partials.
    pub fn merge(mut self, other: &NoiseHistograms) -> Result<NoiseHistograms> {
        if self.bit_depth != other.bit_depth {
            return Err(Error::BitDepthMismatch {
                left: self.bit_depth,
                right: other.bit_depth,
            });
        }
        if self.channels != other.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                actual: other.channels,
            });
        }
        for (dst, src) in self.hists.iter_mut().zip(&other.hists) {
            dst.merge_from(src);
        }
        self.pair_count += other.pair_count;
        Ok(self)
    }
}

fn check_pair(clean: &QuantizedReading, distorted: &QuantizedReading) -> Result<()> {
    if clean.dims() != distorted.dims() {
        return Err(Error::SizeMismatch {
            expected: clean.dims(),
            actual: distorted.dims(),
        });
    }
    if clean.layout() != distorted.layout() {
        return Err(Error::LayoutMismatch);
    }
    if clean.bit_depth() != distorted.bit_depth() {
        return Err(Error::BitDepthMismatch {
            left: clean.bit_depth(),
            right: distorted.bit_depth(),
        });
    }
    Ok(())
}

/// Tally one aligned (clean, distorted) pair.
pub fn accumulate_pair(
    clean: &QuantizedReading,
    distorted: &QuantizedReading,
) -> Result<NoiseHistograms> {
    check_pair(clean, distorted)?;
    let (w, h, ch) = clean.dims();
    let layout = clean.layout();
    let mut hists = NoiseHistograms::new(ch, clean.bit_depth());
    for y in 0..h {
        for x in 0..w {
            let e = layout.class_of(x, y);
            for c in 0..ch {
                hists
                    .hist_mut(c, e)
                    .record(clean.sample(x, y, c), distorted.sample(x, y, c));
            }
        }
    }
    hists.pair_count = 1;
    Ok(hists)
}

/// Tally every pair. Pairs are processed in parallel and the partial
/// histograms merged by addition, so the result is order-independent.
pub fn accumulate_histograms(
    pairs: &[(QuantizedReading, QuantizedReading)],
) -> Result<NoiseHistograms> {
    if pairs.is_empty() {
        return Err(Error::TooFewReadings { got: 0, need: 1 });
    }
    pairs
        .par_iter()
        .map(|(clean, distorted)| accumulate_pair(clean, distorted))
        .try_reduce_with(|a, b| a.merge(&b))
        .expect("non-empty pairs")
}

/// Inverse cumulative table for one populated clean value.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeRow {
    pub x_min: u16,
    /// Nondecreasing, first entry > 0, last entry exactly 1.0. Dense over
    /// the support `[x_min, x_min + len - 1]`; zero-count interior bins get
    /// a repeated value and are never sampled.
    pub cdf: Vec<f32>,
}

impl CumulativeRow {
    pub(crate) fn from_counts(counts: &BTreeMap<u16, u64>) -> Self {
        let (&first, _) = counts.iter().next().expect("non-empty row");
        let (&last, _) = counts.iter().next_back().expect("non-empty row");
        let total: u64 = counts.values().sum();
        let span = (last - first) as usize + 1;
        let mut cdf = Vec::with_capacity(span);
        let mut cum = 0u64;
        for x in first..=last {
            cum += counts.get(&x).copied().unwrap_or(0);
            cdf.push((cum as f64 / total as f64) as f32);
        }
        *cdf.last_mut().expect("non-empty cdf") = 1.0;
        CumulativeRow { x_min: first, cdf }
    }

    /// Smallest `x` in the support with `cdf(x) > xi`.
    #[inline]
    pub fn sample(&self, xi: f64) -> u16 {
        let idx = self.cdf.partition_point(|&p| (p as f64) <= xi);
        let idx = idx.min(self.cdf.len() - 1);
        self.x_min + idx as u16
    }
}

/// Inverse cumulative tables per clean value for one (channel, exposure).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTable {
    rows: Vec<Option<CumulativeRow>>,
    populated: Vec<u16>,
}

impl NoiseTable {
    pub fn from_rows(rows: Vec<Option<CumulativeRow>>) -> Self {
        let populated = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some())
            .map(|(y, _)| y as u16)
            .collect();
        NoiseTable { rows, populated }
    }

    pub fn rows(&self) -> &[Option<CumulativeRow>] {
        &self.rows
    }

    pub fn populated(&self) -> &[u16] {
        &self.populated
    }

    /// Nearest populated y bin, ties toward the lower one.
    fn nearest_populated(&self, y: u16) -> u16 {
        debug_assert!(!self.populated.is_empty());
        match self.populated.binary_search(&y) {
            Ok(i) => self.populated[i],
            Err(i) => {
                if i == 0 {
                    self.populated[0]
                } else if i == self.populated.len() {
                    self.populated[i - 1]
                } else {
                    let lo = self.populated[i - 1];
                    let hi = self.populated[i];
                    if (y - lo) <= (hi - y) {
                        lo
                    } else {
                        hi
                    }
                }
            }
        }
    }

    /// Draw a reading for clean value `y`. Unpopulated bins fall back to the
    /// nearest populated bin, shifting the result by the bin distance.
    pub fn sample(&self, y: u16, xi: f64, max: u16) -> u16 {
        let y = y.min(max);
        if let Some(row) = &self.rows[y as usize] {
            return row.sample(xi).min(max);
        }
        let near = self.nearest_populated(y);
        let row = self.rows[near as usize].as_ref().expect("populated row");
        let x = row.sample(xi) as i32 + (y as i32 - near as i32);
        x.clamp(0, max as i32) as u16
    }
}

/// Sampling-ready pixel-noise model: one table per (channel, exposure).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelNoiseModel {
    bit_depth: u8,
    channels: usize,
    tables: Vec<NoiseTable>,
    /// Number of capture pairs the model was estimated from. Not persisted.
    pub pair_count: u32,
}

impl PixelNoiseModel {
    pub fn from_tables(
        channels: usize,
        bit_depth: u8,
        tables: Vec<NoiseTable>,
        pair_count: u32,
    ) -> Result<Self> {
        if tables.len() != channels * 2 {
            return Err(Error::ChannelMismatch {
                expected: channels * 2,
                actual: tables.len(),
            });
        }
        for (i, t) in tables.iter().enumerate() {
            if t.populated.is_empty() {
                return Err(Error::EmptyModel {
                    channel: i / 2,
                    exposure: ExposureClass::from_index(i % 2),
                });
            }
        }
        Ok(PixelNoiseModel {
            bit_depth,
            channels,
            tables,
            pair_count,
        })
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn table(&self, channel: usize, exposure: ExposureClass) -> &NoiseTable {
        &self.tables[channel * 2 + exposure.index()]
    }

    pub fn tables(&self) -> &[NoiseTable] {
        &self.tables
    }
}

/// Convert accumulated histograms into inverse cumulative tables.
pub fn build_inverse_cumulative(histograms: &NoiseHistograms) -> Result<PixelNoiseModel> {
    let mut tables = Vec::with_capacity(histograms.channels() * 2);
    for c in 0..histograms.channels() {
        for e in ExposureClass::ALL {
            let hist = histograms.hist(c, e);
            if hist.total() == 0 {
                return Err(Error::EmptyModel {
                    channel: c,
                    exposure: e,
                });
            }
            let rows = hist
                .rows
                .iter()
                .map(|counts| {
                    if counts.is_empty() {
                        None
                    } else {
                        Some(CumulativeRow::from_counts(counts))
                    }
                })
                .collect();
            tables.push(NoiseTable::from_rows(rows));
        }
    }
    PixelNoiseModel::from_tables(
        histograms.channels(),
        histograms.bit_depth(),
        tables,
        histograms.pair_count,
    )
}

/// Draw a simulated reading for clean value `y` with variate `xi` in `[0,1)`.
pub fn sample_pixel(
    model: &PixelNoiseModel,
    y: u16,
    channel: usize,
    exposure: ExposureClass,
    xi: f64,
) -> u16 {
    model
        .table(channel, exposure)
        .sample(y, xi, max_value(model.bit_depth()))
}

/// Replace every sample of a clean mosaic by a draw from the noise model.
///
/// The variate for a site depends only on `(seed, pixel index, channel)`,
/// so any parallel traversal produces identical output.
pub fn apply_pixel_noise(
    mosaic: &LinearImage,
    layout: ExposureLayout,
    model: &PixelNoiseModel,
    seed: u64,
) -> Result<LinearImage> {
    if mosaic.channels() != model.channels() {
        return Err(Error::ChannelMismatch {
            expected: model.channels(),
            actual: mosaic.channels(),
        });
    }
    let (w, h, ch) = mosaic.dims();
    let bit_depth = model.bit_depth();
    let max = max_value(bit_depth) as f64;
    let mut data = vec![0.0f32; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            let e = layout.class_of(x, y);
            let pixel = (y * w + x) as u64;
            for c in 0..ch {
                let v = mosaic.sample(x, y, c);
                debug_assert!((0.0..=1.0).contains(&v));
                let clean = quantize_value(v, bit_depth);
                let xi = unit_f64(seed, [pixel, c as u64, STREAM_PIXEL_NOISE, 0]);
                let reading = sample_pixel(model, clean, c, e, xi);
                data[(y * w + x) * ch + c] = (reading as f64 / max) as f32;
            }
        }
    }
    Ok(LinearImage::new_unchecked(w, h, ch, data))
}

/// Model whose every row maps y to exactly y. Useful for tests and as a
/// neutral element in pipelines.
pub fn identity_model(channels: usize, bit_depth: u8) -> PixelNoiseModel {
    let bins = max_value(bit_depth) as usize + 1;
    let tables = (0..channels * 2)
        .map(|_| {
            let rows = (0..bins)
                .map(|y| {
                    Some(CumulativeRow {
                        x_min: y as u16,
                        cdf: vec![1.0],
                    })
                })
                .collect();
            NoiseTable::from_rows(rows)
        })
        .collect();
    PixelNoiseModel::from_tables(channels, bit_depth, tables, 0).expect("identity model")
}
