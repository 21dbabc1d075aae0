//! Composed pipeline tests: calibration feeding estimation, and the full
//! distort-then-restore loop through the public API.

use dxhdr_core::blur::FrameStack;
use dxhdr_core::dataset::{item_seeds, synthesize_item};
use dxhdr_core::fusion::{direct_fuse, FusionWeights};
use dxhdr_core::image::{ExposureLayout, LinearImage, QuantizedReading, SensorConfig};
use dxhdr_core::metrics::dssim;
use dxhdr_core::noise::{
    accumulate_histograms, build_inverse_cumulative, estimate_fixed_pattern,
    remove_fixed_pattern,
};
use dxhdr_core::rng::{normal_f64, site_hash};
use dxhdr_core::rowcol::estimate_rowcol_model;
use dxhdr_core::virtual_sensor::{
    virtual_clean_reading, virtual_sensor, CaptureExposure, VirtualSensorParams,
};

/// Zero-mean pseudo-random per-pixel offsets, the structure a fixed-pattern
/// calibration should recover.
fn synthetic_pattern(w: usize, h: usize, layout: ExposureLayout) -> Vec<f64> {
    let mut offsets: Vec<f64> = (0..w * h)
        .map(|i| (normal_f64(0x0FF5E7, [i as u64, 0, 0, 0]) * 4.0).clamp(-8.0, 8.0))
        .collect();
    // Center per exposure class so the injected pattern is pure structure.
    for class_index in 0..2 {
        let members: Vec<usize> = (0..w * h)
            .filter(|&i| layout.class_of(i % w, i / w).index() == class_index)
            .collect();
        let mean: f64 = members.iter().map(|&i| offsets[i]).sum::<f64>() / members.len() as f64;
        for &i in &members {
            offsets[i] -= mean;
        }
    }
    offsets
}

/// Add the pattern on top of a capture, clamped to range.
fn inject_pattern(reading: &QuantizedReading, offsets: &[f64]) -> QuantizedReading {
    let (w, h, ch) = reading.dims();
    let max = reading.max_value() as f64;
    let data: Vec<u16> = reading
        .data()
        .iter()
        .zip(offsets.iter())
        .map(|(&q, &off)| (q as f64 + off).round().clamp(0.0, max) as u16)
        .collect();
    QuantizedReading::from_vec(w, h, ch, reading.bit_depth(), reading.layout(), data).unwrap()
}

#[test]
fn fixed_pattern_calibration_recovers_injected_structure() {
    let layout = ExposureLayout::default();
    let (w, h) = (32usize, 32usize);
    let params = VirtualSensorParams {
        gain: 0.05,
        read_noise: 2.0,
        row_sigma: 0.0,
        exposure_ratio: 4.0,
        bit_depth: 12,
    };
    let pattern = synthetic_pattern(w, h, layout);
    let flat = LinearImage::filled(w, h, 1, 0.12);

    let captures: Vec<QuantizedReading> = (0..64u64)
        .map(|s| {
            let clean = virtual_sensor(&flat, &params, CaptureExposure::Mosaic(layout), s).unwrap();
            inject_pattern(&clean, &pattern)
        })
        .collect();
    let map = estimate_fixed_pattern(&captures).unwrap();

    // Per-pixel recovery within the averaging noise. High columns read the
    // scene at 4x exposure, so their capture noise (sigma ~ 10 DN) divided
    // by sqrt(64) bounds the estimate at ~1.25 DN; allow a max-statistics
    // margin over the 1024 pixels.
    let mut worst = 0.0f64;
    for (est, truth) in map.offsets().iter().zip(&pattern) {
        worst = worst.max((*est as f64 - truth).abs());
    }
    assert!(worst < 5.5, "worst offset error {worst}");

    // Removing the estimated pattern from a fresh injected capture lands
    // close to the pattern-free capture.
    let fresh =
        virtual_sensor(&flat, &params, CaptureExposure::Mosaic(layout), 999).unwrap();
    let corrected = remove_fixed_pattern(&inject_pattern(&fresh, &pattern), &map).unwrap();
    for (a, b) in corrected.data().iter().zip(fresh.data()) {
        assert!((*a as i32 - *b as i32).abs() <= 6, "{a} vs {b}");
    }
}

#[test]
fn distort_then_fuse_restores_the_reference() {
    let layout = ExposureLayout::default();
    let cfg = SensorConfig::default();
    let params = VirtualSensorParams {
        gain: 0.2,
        read_noise: 4.0,
        row_sigma: 1.0,
        exposure_ratio: 4.0,
        bit_depth: 12,
    };

    // Noise models estimated from virtual capture pairs.
    let pairs: Vec<(QuantizedReading, QuantizedReading)> = (0..12u64)
        .map(|img| {
            let data: Vec<f32> = (0..64 * 64)
                .map(|i| {
                    let q = 100 + site_hash(7, [img, i as u64, 0, 0]) % 800;
                    (q as f64 / 4095.0) as f32
                })
                .collect();
            let clean = LinearImage::from_vec(64, 64, 1, data).unwrap();
            let clean_reading =
                virtual_clean_reading(&clean, &params, CaptureExposure::Mosaic(layout)).unwrap();
            let distorted =
                virtual_sensor(&clean, &params, CaptureExposure::Mosaic(layout), 300 + img)
                    .unwrap();
            (clean_reading, distorted)
        })
        .collect();
    let pixel = build_inverse_cumulative(&accumulate_histograms(&pairs).unwrap()).unwrap();
    let rowcol = estimate_rowcol_model(&pairs, dxhdr_core::image::Axis::Columns).unwrap();

    // A gently moving gradient scene: four frames, wrapping column shift.
    let (w, h) = (64usize, 48usize);
    let frames: Vec<LinearImage> = (0..4usize)
        .map(|k| {
            let data: Vec<f32> = (0..w * h)
                .map(|i| {
                    let x = (i % w + k) % w;
                    let q = (120.0 + 680.0 * x as f64 / (w - 1) as f64).round();
                    (q / 4095.0) as f32
                })
                .collect();
            LinearImage::from_vec(w, h, 1, data).unwrap()
        })
        .collect();
    let stack = FrameStack::new(frames, 240.0).unwrap();

    let (clean, distorted) = synthesize_item(
        &stack,
        0,
        &cfg,
        &pixel,
        Some(&rowcol),
        item_seeds(5, 0, 0),
    )
    .unwrap();

    // The distorted mosaic is visibly off the clean one, and direct fusion
    // pulls it back toward the reference frame.
    let damage = dssim(&distorted, &clean).unwrap();
    assert!(damage > 1e-4, "distortions too weak to matter: {damage}");

    let weights = FusionWeights::default();
    let fused = direct_fuse(&distorted, cfg.layout, &weights).unwrap();
    let reference = &stack.frames()[dxhdr_core::blur::low_frame_index(0, &cfg)];
    let clamped: Vec<f32> = fused.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let fused = LinearImage::from_vec(w, h, 1, clamped).unwrap();
    let restored = dssim(&fused, reference).unwrap();
    // The residual bundles interpolation error and the blur leaking from
    // the high columns; for this scene it sits well under 1e-2.
    assert!(restored < 0.02, "direct fusion residual {restored}");
}
