//! Correlated row/column noise: entire readout lines brighten or darken
//! coherently, separately per channel and exposure class.
//!
//! Estimation histograms the per-line means of sensor readings conditioned
//! on the per-line means of the clean image, both quantized to the `2^B`
//! mean grid. Synthesis draws a target mean for each line and adds the
//! difference to every pixel of that line's class, so the line mean matches
//! the target while within-line structure is preserved.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Error;
use crate::image::{
    max_value, Axis, ExposureClass, ExposureLayout, LinearImage, QuantizedReading,
};
use crate::noise::{CumulativeRow, NoiseTable};
use crate::rng::unit_f64;
use crate::Result;

const STREAM_ROWCOL_NOISE: u64 = 0x5243;

/// The uniform per-line shift is snapped to this dyadic lattice. The snap
/// error (at most 2^-21 of full scale, about 0.002 of one 12-bit step) is
/// far below the mean-matching tolerance, and it makes the shift exactly
/// representable: inputs aligned to the same lattice are shifted without any
/// rounding, which keeps pairwise pixel differences on a line bit-identical.
pub const SHIFT_LATTICE: f32 = 1.0 / (1 << 20) as f32;

/// Inverse cumulative tables over line means, per (channel, exposure).
#[derive(Debug, Clone, PartialEq)]
pub struct RowColNoiseModel {
    pub axis: Axis,
    bit_depth: u8,
    channels: usize,
    tables: Vec<NoiseTable>,
}

impl RowColNoiseModel {
    pub fn from_tables(
        axis: Axis,
        channels: usize,
        bit_depth: u8,
        tables: Vec<NoiseTable>,
    ) -> Result<Self> {
        if tables.len() != channels * 2 {
            return Err(Error::ChannelMismatch {
                expected: channels * 2,
                actual: tables.len(),
            });
        }
        for (i, t) in tables.iter().enumerate() {
            if t.populated().is_empty() {
                return Err(Error::EmptyModel {
                    channel: i / 2,
                    exposure: ExposureClass::from_index(i % 2),
                });
            }
        }
        Ok(RowColNoiseModel {
            axis,
            bit_depth,
            channels,
            tables,
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

/// Model whose every mean maps to itself.
pub fn identity_rowcol_model(channels: usize, bit_depth: u8, axis: Axis) -> RowColNoiseModel {
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
    RowColNoiseModel::from_tables(axis, channels, bit_depth, tables).expect("identity model")
}

/// Per-line mean of the samples of one class and channel, in quantized
/// units. Returns `None` when the line has no pixels of that class.
fn line_mean_quantized(
    reading: &QuantizedReading,
    axis: Axis,
    line: usize,
    channel: usize,
    class: ExposureClass,
) -> Option<f64> {
    let (w, h, _) = reading.dims();
    let layout = reading.layout();
    let (mut sum, mut count) = (0.0f64, 0u64);
    let n = match axis {
        Axis::Columns => h,
        Axis::Rows => w,
    };
    for i in 0..n {
        let (x, y) = match axis {
            Axis::Columns => (line, i),
            Axis::Rows => (i, line),
        };
        if layout.class_of(x, y) == class {
            sum += reading.sample(x, y, channel) as f64;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

fn mean_grid_index(mean: f64, max: u16) -> u16 {
    mean.round().clamp(0.0, max as f64) as u16
}

type MeanCounts = Vec<BTreeMap<u16, BTreeMap<u16, u64>>>;

fn accumulate_rowcol_pair(
    clean: &QuantizedReading,
    sensor: &QuantizedReading,
    axis: Axis,
) -> Result<MeanCounts> {
    if clean.dims() != sensor.dims() {
        return Err(Error::SizeMismatch {
            expected: clean.dims(),
            actual: sensor.dims(),
        });
    }
    if clean.layout() != sensor.layout() {
        return Err(Error::LayoutMismatch);
    }
    let (w, h, ch) = clean.dims();
    let max = clean.max_value();
    let lines = match axis {
        Axis::Columns => w,
        Axis::Rows => h,
    };
    let mut counts: MeanCounts = vec![BTreeMap::new(); ch * 2];
    for line in 0..lines {
        for c in 0..ch {
            for e in ExposureClass::ALL {
                let Some(clean_mean) = line_mean_quantized(clean, axis, line, c, e) else {
                    continue;
                };
                let sensor_mean = line_mean_quantized(sensor, axis, line, c, e)
                    .expect("same layout implies same class coverage");
                let gy = mean_grid_index(clean_mean, max);
                let gx = mean_grid_index(sensor_mean, max);
                *counts[c * 2 + e.index()]
                    .entry(gy)
                    .or_default()
                    .entry(gx)
                    .or_insert(0) += 1;
            }
        }
    }
    Ok(counts)
}

fn merge_mean_counts(mut a: MeanCounts, b: MeanCounts) -> MeanCounts {
    for (dst, src) in a.iter_mut().zip(b) {
        for (gy, row) in src {
            let dst_row = dst.entry(gy).or_default();
            for (gx, n) in row {
                *dst_row.entry(gx).or_insert(0) += n;
            }
        }
    }
    a
}

/// Estimate the conditional distribution of line means from aligned pairs.
pub fn estimate_rowcol_model(
    pairs: &[(QuantizedReading, QuantizedReading)],
    axis: Axis,
) -> Result<RowColNoiseModel> {
    let Some((first_clean, _)) = pairs.first() else {
        return Err(Error::EmptyModel {
            channel: 0,
            exposure: ExposureClass::Low,
        });
    };
    let channels = first_clean.channels();
    let bit_depth = first_clean.bit_depth();
    let counts = pairs
        .par_iter()
        .map(|(clean, sensor)| accumulate_rowcol_pair(clean, sensor, axis))
        .try_reduce_with(|a, b| Ok(merge_mean_counts(a, b)))
        .expect("non-empty pairs")?;

    let bins = max_value(bit_depth) as usize + 1;
    let mut tables = Vec::with_capacity(channels * 2);
    for (i, per_ce) in counts.iter().enumerate() {
        if per_ce.is_empty() {
            return Err(Error::EmptyModel {
                channel: i / 2,
                exposure: ExposureClass::from_index(i % 2),
            });
        }
        let mut rows: Vec<Option<CumulativeRow>> = vec![None; bins];
        for (&gy, row_counts) in per_ce {
            rows[gy as usize] = Some(CumulativeRow::from_counts(row_counts));
        }
        tables.push(NoiseTable::from_rows(rows));
    }
    RowColNoiseModel::from_tables(axis, channels, bit_depth, tables)
}

/// Add correlated line noise by mean-matching.
///
/// For every line, channel and exposure class present on the line, the
/// current mean selects a conditional distribution, a target mean is drawn
/// from it, and the difference is added uniformly to that class's pixels
/// (clamped to `[0, 1]`). Draws are keyed on `(seed, line, channel, class)`.
pub fn apply_rowcol_noise(
    image: &LinearImage,
    layout: ExposureLayout,
    model: &RowColNoiseModel,
    seed: u64,
) -> Result<LinearImage> {
    if image.channels() != model.channels() {
        return Err(Error::ChannelMismatch {
            expected: model.channels(),
            actual: image.channels(),
        });
    }
    let (w, h, ch) = image.dims();
    let axis = model.axis;
    let max = max_value(model.bit_depth());
    let max_f = max as f64;
    let lines = match axis {
        Axis::Columns => w,
        Axis::Rows => h,
    };
    let line_len = match axis {
        Axis::Columns => h,
        Axis::Rows => w,
    };

    let mut out = image.clone();
    for line in 0..lines {
        for c in 0..ch {
            for e in ExposureClass::ALL {
                // Current mean of this class's pixels on the line.
                let (mut sum, mut count) = (0.0f64, 0u64);
                for i in 0..line_len {
                    let (x, y) = match axis {
                        Axis::Columns => (line, i),
                        Axis::Rows => (i, line),
                    };
                    if layout.class_of(x, y) == e {
                        sum += image.sample(x, y, c) as f64;
                        count += 1;
                    }
                }
                if count == 0 {
                    continue;
                }
                let mean = sum / count as f64;
                let grid_mean = mean_grid_index(mean * max_f, max);
                let xi = unit_f64(
                    seed,
                    [line as u64, c as u64, e.index() as u64, STREAM_ROWCOL_NOISE],
                );
                let target = model.table(c, e).sample(grid_mean, xi, max);
                let delta = target as f64 / max_f - mean;
                // Snap to the dyadic lattice; see SHIFT_LATTICE.
                let delta = ((delta / SHIFT_LATTICE as f64).round() * SHIFT_LATTICE as f64) as f32;
                if delta == 0.0 {
                    continue;
                }
                let data = out.data_mut();
                for i in 0..line_len {
                    let (x, y) = match axis {
                        Axis::Columns => (line, i),
                        Axis::Rows => (i, line),
                    };
                    if layout.class_of(x, y) == e {
                        let idx = (y * w + x) * ch + c;
                        data[idx] = (data[idx] + delta).clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ExposureLayout, Parity, QuantizedReading};

    fn reading(w: usize, h: usize, data: Vec<u16>) -> QuantizedReading {
        QuantizedReading::from_vec(w, h, 1, 12, ExposureLayout::default(), data).unwrap()
    }

    #[test]
    fn diagonal_model_from_identical_pairs() {
        let data: Vec<u16> = (0..64).map(|i| (i * 60) as u16).collect();
        let r = reading(8, 8, data);
        let model = estimate_rowcol_model(&[(r.clone(), r)], Axis::Columns).unwrap();
        for e in ExposureClass::ALL {
            let table = model.table(0, e);
            for &gy in table.populated() {
                for xi in [0.0, 0.5, 0.99] {
                    assert_eq!(table.sample(gy, xi, 4095), gy);
                }
            }
        }
    }

    #[test]
    fn single_line_hand_tally() {
        // One column of each class; the low column (x=0) has clean mean 98
        // and sensor mean 100.
        let clean = reading(2, 4, vec![98, 7, 98, 7, 98, 7, 98, 7]);
        let sensor = reading(2, 4, vec![100, 7, 100, 7, 100, 7, 100, 7]);
        let model = estimate_rowcol_model(&[(clean, sensor)], Axis::Columns).unwrap();
        let table = model.table(0, ExposureClass::Low);
        assert_eq!(table.populated(), &[98]);
        assert_eq!(table.sample(98, 0.5, 4095), 100);
    }

    #[test]
    fn zero_pairs_is_empty_model() {
        assert!(matches!(
            estimate_rowcol_model(&[], Axis::Columns),
            Err(Error::EmptyModel { .. })
        ));
    }

    #[test]
    fn mean_matching_is_exact_up_to_lattice() {
        // Column of constant 0.50 with a model that always returns the grid
        // bin nearest 0.52.
        let target_grid = (0.52f64 * 4095.0).round() as u16;
        let rows: Vec<Option<CumulativeRow>> = (0..4096)
            .map(|_| {
                Some(CumulativeRow {
                    x_min: target_grid,
                    cdf: vec![1.0],
                })
            })
            .collect();
        let tables = vec![NoiseTable::from_rows(rows.clone()), NoiseTable::from_rows(rows)];
        let model = RowColNoiseModel::from_tables(Axis::Columns, 1, 12, tables).unwrap();

        let image = LinearImage::filled(2, 64, 1, 0.5);
        let out = apply_rowcol_noise(&image, ExposureLayout::default(), &model, 5).unwrap();
        let target = target_grid as f64 / 4095.0;
        for x in 0..2 {
            let mean: f64 = (0..64).map(|y| out.sample(x, y, 0) as f64).sum::<f64>() / 64.0;
            let tol = 2.0 * f32::EPSILON as f64 * 64.0 + SHIFT_LATTICE as f64 / 2.0;
            assert!((mean - target).abs() <= tol, "mean {mean} target {target}");
        }
    }

    #[test]
    fn lattice_aligned_lines_shift_without_rounding() {
        // Values on the 2^-20 lattice; the shifted values stay on it, so the
        // pairwise differences are reproduced bit for bit.
        let vals: Vec<f32> = (0..32)
            .map(|i| ((100_000 + i * 3_000) as f32) * SHIFT_LATTICE)
            .collect();
        let image = LinearImage::from_vec(1, 32, 1, vals.clone()).unwrap();
        let rows: Vec<Option<CumulativeRow>> = (0..4096)
            .map(|_| {
                Some(CumulativeRow {
                    x_min: 900,
                    cdf: vec![1.0],
                })
            })
            .collect();
        let tables = vec![NoiseTable::from_rows(rows.clone()), NoiseTable::from_rows(rows)];
        let model = RowColNoiseModel::from_tables(Axis::Columns, 1, 12, tables).unwrap();
        let out = apply_rowcol_noise(&image, ExposureLayout::default(), &model, 8).unwrap();
        for i in 1..32 {
            let before = vals[i] - vals[i - 1];
            let after = out.sample(0, i, 0) - out.sample(0, i - 1, 0);
            assert_eq!(before.to_bits(), after.to_bits());
        }
    }

    #[test]
    fn diagonal_model_changes_at_most_one_grid_step() {
        let model = identity_rowcol_model(1, 12, Axis::Columns);
        let vals: Vec<f32> = (0..64).map(|i| 0.3 + 0.001 * i as f32).collect();
        let image = LinearImage::from_vec(2, 32, 1, vals).unwrap();
        let out = apply_rowcol_noise(&image, ExposureLayout::default(), &model, 3).unwrap();
        for (a, b) in image.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= 0.5 / 4095.0 + SHIFT_LATTICE, "{a} vs {b}");
        }
    }

    #[test]
    fn fixed_seed_reproducible() {
        let data: Vec<u16> = (0..64).map(|i| 500 + (i * 13) as u16 % 50).collect();
        let clean = reading(8, 8, vec![520; 64]);
        let sensor = reading(8, 8, data);
        let model = estimate_rowcol_model(&[(clean, sensor)], Axis::Columns).unwrap();
        let image = LinearImage::filled(8, 8, 1, 520.0 / 4095.0);
        let a = apply_rowcol_noise(&image, ExposureLayout::default(), &model, 77).unwrap();
        let b = apply_rowcol_noise(&image, ExposureLayout::default(), &model, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn row_axis_mixes_classes_per_line() {
        // Under a column layout, a row crosses both classes; offsets apply
        // per class within the row.
        let clean_data = vec![1000u16; 32];
        let mut sensor_data = vec![1000u16; 32];
        for (i, v) in sensor_data.iter_mut().enumerate() {
            if i % 2 == 0 {
                *v = 1010; // low columns read high
            }
        }
        let clean = reading(8, 4, clean_data);
        let sensor = reading(8, 4, sensor_data);
        let model = estimate_rowcol_model(&[(clean, sensor)], Axis::Rows).unwrap();
        let low = model.table(0, ExposureClass::Low);
        let high = model.table(0, ExposureClass::High);
        assert_eq!(low.sample(1000, 0.5, 4095), 1010);
        assert_eq!(high.sample(1000, 0.5, 4095), 1000);
    }

    #[test]
    fn estimation_is_permutation_invariant() {
        let mk = |base: u16| {
            (
                reading(4, 4, vec![base; 16]),
                reading(4, 4, (0..16).map(|i| base + i as u16 % 5).collect()),
            )
        };
        let a = mk(100);
        let b = mk(900);
        let ab = estimate_rowcol_model(&[a.clone(), b.clone()], Axis::Columns).unwrap();
        let ba = estimate_rowcol_model(&[b, a], Axis::Columns).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn odd_parity_layout_respected() {
        let layout = ExposureLayout {
            axis: Axis::Columns,
            low_parity: Parity::Odd,
        };
        let clean =
            QuantizedReading::from_vec(2, 2, 1, 12, layout, vec![50, 500, 50, 500]).unwrap();
        let sensor =
            QuantizedReading::from_vec(2, 2, 1, 12, layout, vec![60, 505, 60, 505]).unwrap();
        let model = estimate_rowcol_model(&[(clean, sensor)], Axis::Columns).unwrap();
        // Column 1 is low under odd parity.
        assert_eq!(model.table(0, ExposureClass::Low).sample(500, 0.5, 4095), 505);
        assert_eq!(model.table(0, ExposureClass::High).sample(50, 0.5, 4095), 60);
    }
}
