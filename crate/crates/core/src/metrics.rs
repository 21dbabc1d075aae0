//! Image quality metric (DSSIM) and the sensor variance-characterization
//! experiment, plus the heteroscedastic-Gaussian comparison fit.

use crate::error::Error;
use crate::image::{
    dequantize, max_value, ExposureClass, LinearImage, QuantizedReading,
};
use crate::noise::NoiseHistograms;
use crate::rng::{normal_f64, sample_distinct};
use crate::Result;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

const STREAM_BURST: u64 = 0x4246;
const STREAM_HETGAUSS: u64 = 0x4847;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0f64; SSIM_WINDOW];
    let center = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - center;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Separable windowed sum over valid positions (no padding).
fn blur_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horizontal = vec![0.0f64; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * plane[y * w + x + k];
            }
            horizontal[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0f64; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * horizontal[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Structural dissimilarity `(1 - SSIM) / 2`, averaged over channels and
/// valid 11x11 window positions. Inputs are expected in `[0, 1]`.
pub fn dssim(a: &LinearImage, b: &LinearImage) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::SizeMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    let (w, h, ch) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::SizeMismatch {
            expected: (SSIM_WINDOW, SSIM_WINDOW, ch),
            actual: (w, h, ch),
        });
    }
    let kernel = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    let mut total = 0.0f64;
    let mut windows = 0usize;
    for c in 0..ch {
        let mut pa = vec![0.0f64; w * h];
        let mut pb = vec![0.0f64; w * h];
        let mut paa = vec![0.0f64; w * h];
        let mut pbb = vec![0.0f64; w * h];
        let mut pab = vec![0.0f64; w * h];
        for i in 0..w * h {
            let va = a.data()[i * ch + c] as f64;
            let vb = b.data()[i * ch + c] as f64;
            pa[i] = va;
            pb[i] = vb;
            paa[i] = va * va;
            pbb[i] = vb * vb;
            pab[i] = va * vb;
        }
        let mu_a = blur_valid(&pa, w, h, &kernel);
        let mu_b = blur_valid(&pb, w, h, &kernel);
        let e_aa = blur_valid(&paa, w, h, &kernel);
        let e_bb = blur_valid(&pbb, w, h, &kernel);
        let e_ab = blur_valid(&pab, w, h, &kernel);
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
        }
        windows += mu_a.len();
    }
    let ssim = total / windows as f64;
    Ok((1.0 - ssim) / 2.0)
}

/// Variance of readings at each quantized reference level, per exposure
/// mode, on the pilot's common scale.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePoint {
    pub variance: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCurve {
    pub mode: ExposureClass,
    pub bit_depth: u8,
    /// Indexed by reference level; `None` where the level is absent from
    /// the reference or has fewer than two observations.
    pub points: Vec<Option<VariancePoint>>,
}

impl VarianceCurve {
    /// Plain-text rows `level variance count`, one per defined level.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (level, point) in self.points.iter().enumerate() {
            if let Some(p) = point {
                out.push_str(&format!("{} {:.6} {}\n", level, p.variance, p.count));
            }
        }
        out
    }
}

/// Scale factor applied to a reading of the given mode to place it on the
/// pilot's common range: low readings multiply by the exposure ratio, high
/// readings divide by it.
fn mode_scale(mode: ExposureClass, exposure_ratio: f64) -> f64 {
    match mode {
        ExposureClass::Low => exposure_ratio,
        ExposureClass::High => 1.0 / exposure_ratio,
    }
}

/// Convert whole readings to floating point on the pilot's common range.
pub fn normalize_exposures(
    readings: &[QuantizedReading],
    mode: ExposureClass,
    exposure_ratio: f32,
) -> Vec<LinearImage> {
    let scale = mode_scale(mode, exposure_ratio as f64);
    readings
        .iter()
        .map(|r| {
            let img = dequantize(r);
            let data = img.data().iter().map(|&v| (v as f64 * scale) as f32).collect();
            LinearImage::new_unchecked(r.width(), r.height(), r.channels(), data)
        })
        .collect()
}

/// Reconstruct the variance-versus-radiance curve of the pilot experiment.
///
/// For every quantized level present in the reference, the first pixel (in
/// row-major, channel-major order) holding that level is selected, and the
/// mean squared deviation of that pixel's readings from the level's ideal
/// reading is computed in mode-scaled quantized units. For unclipped pixels
/// the reference equals the readings' expectation, so this is the population
/// variance; where the mode clips, the deviation grows instead of collapsing,
/// which is exactly the effect the pilot is after.
pub fn variance_by_radiance(
    readings: &[QuantizedReading],
    reference: &QuantizedReading,
    mode: ExposureClass,
    exposure_ratio: f32,
) -> Result<VarianceCurve> {
    if readings.len() < 2 {
        return Err(Error::TooFewReadings {
            got: readings.len(),
            need: 2,
        });
    }
    for r in readings {
        if r.dims() != reference.dims() {
            return Err(Error::SizeMismatch {
                expected: reference.dims(),
                actual: r.dims(),
            });
        }
    }
    let bit_depth = reference.bit_depth();
    let levels = max_value(bit_depth) as usize + 1;
    let (w, h, ch) = reference.dims();
    let scale = mode_scale(mode, exposure_ratio as f64);

    // First pixel per level, scanning rows, then columns, then channels.
    let mut pick: Vec<Option<(usize, usize, usize)>> = vec![None; levels];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let level = reference.sample(x, y, c) as usize;
                if pick[level].is_none() {
                    pick[level] = Some((x, y, c));
                }
            }
        }
    }

    let mut points: Vec<Option<VariancePoint>> = vec![None; levels];
    for (level, site) in pick.iter().enumerate() {
        let Some((x, y, c)) = *site else { continue };
        // Ideal unclipped reading for this radiance level, on the mode's
        // scale: a low pixel would read the level itself, a high pixel r
        // times it. Keeping the clamp out of the anchor is what makes the
        // curve diverge where the mode saturates.
        let ideal = match mode {
            ExposureClass::Low => level as f64,
            ExposureClass::High => exposure_ratio as f64 * level as f64,
        };
        let anchor = ideal * scale;
        let mut acc = 0.0f64;
        for r in readings {
            let value = r.sample(x, y, c) as f64 * scale;
            let d = value - anchor;
            acc += d * d;
        }
        points[level] = Some(VariancePoint {
            variance: acc / readings.len() as f64,
            count: readings.len() as u32,
        });
    }
    Ok(VarianceCurve {
        mode,
        bit_depth,
        points,
    })
}

/// Simulate ideal burst fusion by averaging seeded random four-tuples of
/// readings, sampled without replacement within each tuple.
pub fn simulate_burst_fusion(
    readings: &[QuantizedReading],
    tuples: usize,
    seed: u64,
) -> Result<Vec<LinearImage>> {
    const TUPLE: usize = 4;
    if readings.len() < TUPLE {
        return Err(Error::TooFewReadings {
            got: readings.len(),
            need: TUPLE,
        });
    }
    let first = &readings[0];
    for r in &readings[1..] {
        if r.dims() != first.dims() {
            return Err(Error::SizeMismatch {
                expected: first.dims(),
                actual: r.dims(),
            });
        }
    }
    let len = first.data().len();
    let mut fused = Vec::with_capacity(tuples);
    for k in 0..tuples {
        let picks = sample_distinct(seed, [k as u64, STREAM_BURST], readings.len(), TUPLE);
        let mut acc = vec![0.0f64; len];
        for &idx in &picks {
            let max = readings[idx].max_value() as f64;
            for (a, &q) in acc.iter_mut().zip(readings[idx].data()) {
                *a += q as f64 / max;
            }
        }
        let data = acc.iter().map(|&s| (s / TUPLE as f64) as f32).collect();
        fused.push(LinearImage::new_unchecked(
            first.width(),
            first.height(),
            first.channels(),
            data,
        ));
    }
    Ok(fused)
}

/// Linear fit of the conditional variance, `sigma^2(y) = a*y + b`, per
/// channel and exposure, in quantized units.
#[derive(Debug, Clone, PartialEq)]
pub struct HetGaussFit {
    pub bit_depth: u8,
    pub channels: usize,
    /// `(slope, intercept)` indexed by `channel * 2 + exposure`.
    pub params: Vec<(f64, f64)>,
}

impl HetGaussFit {
    pub fn slope(&self, channel: usize, exposure: ExposureClass) -> f64 {
        self.params[channel * 2 + exposure.index()].0
    }

    pub fn intercept(&self, channel: usize, exposure: ExposureClass) -> f64 {
        self.params[channel * 2 + exposure.index()].1
    }

    pub fn sigma(&self, channel: usize, exposure: ExposureClass, y: f64) -> f64 {
        let (a, b) = self.params[channel * 2 + exposure.index()];
        (a * y + b).max(0.0).sqrt()
    }

    /// Plain-text rows `channel exposure slope intercept`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in 0..self.channels {
            for e in ExposureClass::ALL {
                out.push_str(&format!(
                    "{c} {e} {:.6} {:.6}\n",
                    self.slope(c, e),
                    self.intercept(c, e)
                ));
            }
        }
        out
    }
}

/// Fit the heteroscedastic-Gaussian comparison model to estimated
/// histograms: weighted least squares of per-bin variance against the clean
/// value. Each bin is weighted by the precision of its variance estimate,
/// `n / var^2` (the sampling variance of a sample variance grows with
/// `var^2 / n`), floored at the quantization variance so empty-noise bins
/// stay finite.
pub fn fit_hetgauss(histograms: &NoiseHistograms) -> Result<HetGaussFit> {
    let mut params = Vec::with_capacity(histograms.channels() * 2);
    for c in 0..histograms.channels() {
        for e in ExposureClass::ALL {
            let hist = histograms.hist(c, e);
            // (y, variance, weight) per populated bin with >= 2 observations.
            let mut obs: Vec<(f64, f64, f64)> = Vec::new();
            for y in hist.populated() {
                let row = hist.row(y);
                let n: u64 = row.values().sum();
                if n < 2 {
                    continue;
                }
                let mean: f64 =
                    row.iter().map(|(&x, &k)| x as f64 * k as f64).sum::<f64>() / n as f64;
                let var: f64 = row
                    .iter()
                    .map(|(&x, &k)| k as f64 * (x as f64 - mean).powi(2))
                    .sum::<f64>()
                    / n as f64;
                let weight = n as f64 / var.max(1.0 / 12.0).powi(2);
                obs.push((y as f64, var, weight));
            }
            if obs.len() < 2 {
                return Err(Error::InsufficientBins {
                    got: obs.len(),
                    need: 2,
                });
            }
            let wsum: f64 = obs.iter().map(|o| o.2).sum();
            let my: f64 = obs.iter().map(|o| o.0 * o.2).sum::<f64>() / wsum;
            let mv: f64 = obs.iter().map(|o| o.1 * o.2).sum::<f64>() / wsum;
            let sxx: f64 = obs.iter().map(|o| o.2 * (o.0 - my).powi(2)).sum();
            let sxy: f64 = obs.iter().map(|o| o.2 * (o.0 - my) * (o.1 - mv)).sum();
            if sxx == 0.0 {
                return Err(Error::InsufficientBins { got: 1, need: 2 });
            }
            let a = sxy / sxx;
            let b = mv - a * my;
            params.push((a, b));
        }
    }
    Ok(HetGaussFit {
        bit_depth: histograms.bit_depth(),
        channels: histograms.channels(),
        params,
    })
}

/// Synthesize noise from the fitted model: each sample becomes a rounded,
/// clamped draw from `Normal(y, sigma(y))`. Counter-based, like
/// [`crate::noise::apply_pixel_noise`].
pub fn apply_hetgauss_noise(
    mosaic: &LinearImage,
    layout: crate::image::ExposureLayout,
    fit: &HetGaussFit,
    seed: u64,
) -> Result<LinearImage> {
    if mosaic.channels() != fit.channels {
        return Err(Error::ChannelMismatch {
            expected: fit.channels,
            actual: mosaic.channels(),
        });
    }
    let (w, h, ch) = mosaic.dims();
    let max = max_value(fit.bit_depth) as f64;
    let mut data = vec![0.0f32; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            let e = layout.class_of(x, y);
            let pixel = (y * w + x) as u64;
            for c in 0..ch {
                let v = mosaic.sample(x, y, c) as f64;
                let clean = (v * max).round();
                let sigma = fit.sigma(c, e, clean);
                let z = normal_f64(seed, [pixel, c as u64, STREAM_HETGAUSS, 0]);
                let reading = (clean + sigma * z).round().clamp(0.0, max);
                data[(y * w + x) * ch + c] = (reading / max) as f32;
            }
        }
    }
    Ok(LinearImage::new_unchecked(w, h, ch, data))
}
