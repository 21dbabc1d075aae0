//! Batch workflows for the dual-exposure toolkit.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 model or data
//! insufficiency, 4 I/O failure. Every subcommand is deterministic given
//! its flags; randomness comes only from explicit seeds.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use dxhdr_core::blur::FrameStack;
use dxhdr_core::dataset::{extract_patches, synthesize_dataset};
use dxhdr_core::fusion::{direct_fuse, FusionWeights};
use dxhdr_core::image::{
    linearize, quantize, Axis, ExposureClass, ExposureLayout, LinearImage, QuantizedReading,
    SensorConfig,
};
use dxhdr_core::io::{read_pfm, read_pgm16, write_pfm};
use dxhdr_core::manifest::{load_manifest, DatasetManifest};
use dxhdr_core::metrics::{dssim, simulate_burst_fusion, variance_by_radiance};
use dxhdr_core::model_io::{read_model, write_model};
use dxhdr_core::noise::{
    accumulate_histograms, build_inverse_cumulative, estimate_fixed_pattern,
    remove_fixed_pattern,
};
use dxhdr_core::rowcol::estimate_rowcol_model;
use dxhdr_core::Error as CoreError;

/// Seed used when none is given; fixed so runs stay reproducible.
const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "dxhdr", version, about = "Dual-exposure sensor modeling toolkit")]
struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Row,
    Column,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Low,
    High,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate pixel and row/column noise models from capture pairs.
    Estimate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Axis of the correlated-line model.
        #[arg(long, value_enum, default_value = "column")]
        axis: AxisArg,
    },
    /// Synthesize distorted/clean patch pairs from manifest clips.
    Synthesize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the manifest seed when given.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fuse a dual-exposure mosaic into a linear HDR image.
    Fuse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        ratio: f32,
        #[arg(long, default_value_t = 0.02)]
        low_floor: f32,
        #[arg(long, default_value_t = 0.98)]
        high_ceiling: f32,
        #[arg(long, default_value = "col-even")]
        layout: String,
    },
    /// DSSIM between a prediction and a reference (files or directories).
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Display gamma applied before the metric (1 = compare as stored).
        #[arg(long, default_value_t = 1.0)]
        gamma: f32,
    },
    /// Variance-versus-radiance curve from repeated captures.
    Characterize {
        #[arg(long)]
        readings: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        ratio: f32,
        /// Reference reading; defaults to the quantized mean of the inputs.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Replace the readings by this many simulated burst fusions.
        #[arg(long)]
        burst: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .expect("rayon pool is built once");
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<CoreError>() {
        return match core {
            CoreError::EmptyModel { .. }
            | CoreError::TooFewReadings { .. }
            | CoreError::InsufficientBins { .. } => 3,
            CoreError::Io(_) => 4,
            _ => 2,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 4;
    }
    2
}

fn require_input(path: &Path, what: &str) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        bail!(CoreError::MissingPath {
            path: path.to_path_buf(),
            entry: what.to_string(),
        });
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Estimate { manifest, out, axis } => cmd_estimate(&manifest, &out, axis),
        Command::Synthesize {
            manifest,
            model,
            out,
            seed,
        } => cmd_synthesize(&manifest, &model, &out, seed),
        Command::Fuse {
            input,
            out,
            ratio,
            low_floor,
            high_ceiling,
            layout,
        } => cmd_fuse(&input, &out, ratio, low_floor, high_ceiling, &layout),
        Command::Evaluate {
            pred,
            reference,
            gamma,
        } => cmd_evaluate(&pred, &reference, gamma),
        Command::Characterize {
            readings,
            mode,
            out,
            ratio,
            reference,
            burst,
            seed,
        } => cmd_characterize(&readings, mode, &out, ratio, reference.as_deref(), burst, seed),
    }
}

/// Load a sensor reading: `.pgm` files natively, `.pfm` via quantization at
/// the manifest's bit depth and layout.
fn load_reading(path: &Path, config: &SensorConfig) -> anyhow::Result<QuantizedReading> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let reading = match ext {
        "pgm" => read_pgm16(path)?,
        "pfm" => {
            let image = read_pfm(path)?;
            quantize(&image, config.bit_depth, config.layout)?
        }
        other => bail!("unsupported reading extension '{other}' for {}", path.display()),
    };
    Ok(reading)
}

fn cmd_estimate(manifest_path: &Path, out: &Path, axis: AxisArg) -> anyhow::Result<()> {
    require_input(manifest_path, "manifest")?;
    let manifest = load_manifest(manifest_path)?;
    if manifest.pairs.is_empty() {
        bail!(CoreError::InvalidConfig {
            message: "manifest lists no capture pairs".into(),
        });
    }

    let fixed_pattern = if manifest.calibration.is_empty() {
        None
    } else {
        let captures: Vec<QuantizedReading> = manifest
            .calibration
            .iter()
            .map(|p| load_reading(p, &manifest.config))
            .collect::<anyhow::Result<_>>()?;
        Some(estimate_fixed_pattern(&captures)?)
    };

    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for (clean_path, distorted_path) in &manifest.pairs {
        let clean = load_reading(clean_path, &manifest.config)
            .with_context(|| format!("clean capture {}", clean_path.display()))?;
        let mut distorted = load_reading(distorted_path, &manifest.config)
            .with_context(|| format!("distorted capture {}", distorted_path.display()))?;
        if let Some(map) = &fixed_pattern {
            distorted = remove_fixed_pattern(&distorted, map)?;
        }
        pairs.push((clean, distorted));
    }

    let histograms = accumulate_histograms(&pairs)?;
    for c in 0..histograms.channels() {
        for e in ExposureClass::ALL {
            println!("channel {c} {e}: {} observations", histograms.hist(c, e).total());
        }
    }
    let pixel = build_inverse_cumulative(&histograms)?;
    let axis = match axis {
        AxisArg::Row => Axis::Rows,
        AxisArg::Column => Axis::Columns,
    };
    let rowcol = estimate_rowcol_model(&pairs, axis)?;
    write_model(out, &pixel, Some(&rowcol))?;
    println!("model written to {}", out.display());
    Ok(())
}

/// Minimal glob: `*` matches any run of characters.
fn pattern_matches(name: &str, pattern: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return name == pattern;
    }
    let mut rest = name;
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            continue;
        }
        if i == 0 {
            match rest.strip_prefix(part) {
                Some(r) => rest = r,
                None => return false,
            }
        } else if i == parts.len() - 1 {
            return rest.ends_with(part);
        } else {
            match rest.find(part) {
                Some(pos) => rest = &rest[pos + part.len()..],
                None => return false,
            }
        }
    }
    // Reached only when the pattern ends in '*'.
    true
}

fn list_matching(dir: &Path, pattern: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| pattern_matches(n, pattern))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn load_clip(dir: &Path, pattern: &str, fps: f32, config: &SensorConfig) -> anyhow::Result<FrameStack> {
    let files = list_matching(dir, pattern)?;
    if files.is_empty() {
        bail!(CoreError::MissingPath {
            path: dir.join(pattern),
            entry: "clip frames".to_string(),
        });
    }
    let frames: Vec<LinearImage> = files
        .iter()
        .map(|p| -> anyhow::Result<LinearImage> {
            let raw = read_pfm(p).with_context(|| format!("frame {}", p.display()))?;
            // Frames are display-referred; clamp float dust and linearize.
            let clamped: Vec<f32> = raw.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let display = LinearImage::from_vec(raw.width(), raw.height(), raw.channels(), clamped)?;
            Ok(linearize(&display, config.gamma)?)
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(FrameStack::new(frames, fps)?)
}

fn cmd_synthesize(
    manifest_path: &Path,
    model_path: &Path,
    out: &Path,
    seed_flag: Option<u64>,
) -> anyhow::Result<()> {
    require_input(manifest_path, "manifest")?;
    require_input(model_path, "model")?;
    let manifest: DatasetManifest = load_manifest(manifest_path)?;
    if manifest.clips.is_empty() {
        bail!(CoreError::InvalidConfig {
            message: "manifest lists no clips".into(),
        });
    }
    let (pixel, rowcol) = read_model(model_path)?;
    let seed = seed_flag.or(manifest.seed).unwrap_or(DEFAULT_SEED);
    std::fs::create_dir_all(out)?;

    let mut clips = Vec::with_capacity(manifest.clips.len());
    for spec in &manifest.clips {
        let name = spec
            .dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("clip")
            .to_string();
        clips.push((name, load_clip(&spec.dir, &spec.pattern, spec.fps, &manifest.config)?));
    }

    let index = std::sync::Mutex::new(Vec::new());
    let config = manifest.config;
    let patch_geometry = manifest.patch;
    let summary = synthesize_dataset(
        &clips,
        &config,
        manifest.effective_window_stride(),
        &pixel,
        rowcol.as_ref(),
        seed,
        |item| {
            let patches = extract_patches(&item.clean, &item.distorted, patch_geometry, &config)?;
            let mut lines = Vec::with_capacity(patches.len());
            for patch in &patches {
                let stem = format!(
                    "{:02}_{}_t{:04}_x{:04}_y{:04}",
                    item.clip_index, item.clip, item.t, patch.x, patch.y
                );
                let d_name = format!("{stem}_d.pfm");
                let c_name = format!("{stem}_c.pfm");
                write_pfm(out.join(&d_name), &patch.distorted)?;
                write_pfm(out.join(&c_name), &patch.clean)?;
                lines.push((
                    item.clip_index,
                    item.t,
                    patch.x,
                    patch.y,
                    format!(
                        "{d_name} {c_name} {} {} {} {}",
                        patch.x, patch.y, item.clip, item.t
                    ),
                ));
            }
            index.lock().expect("index lock").extend(lines);
            Ok(())
        },
    );

    for (key, err) in &summary.failures {
        eprintln!("item {key} failed: {err}");
    }
    let mut entries = index.into_inner().expect("index lock");
    entries.sort();
    let body: String = entries
        .iter()
        .map(|(_, _, _, _, line)| format!("{line}\n"))
        .collect();
    std::fs::write(out.join("index.txt"), body)?;
    println!(
        "clips {} windows {} patches {} failures {}",
        clips.len(),
        summary.items,
        entries.len(),
        summary.failures.len()
    );
    Ok(())
}

fn cmd_fuse(
    input: &Path,
    out: &Path,
    ratio: f32,
    low_floor: f32,
    high_ceiling: f32,
    layout: &str,
) -> anyhow::Result<()> {
    require_input(input, "mosaic")?;
    let layout: ExposureLayout = layout.parse()?;
    let mosaic = read_pfm(input)?;
    let weights = FusionWeights {
        low_floor,
        high_ceiling,
        exposure_ratio: ratio,
    };
    let fused = direct_fuse(&mosaic, layout, &weights)?;
    write_pfm(out, &fused)?;
    println!("fused {} -> {}", input.display(), out.display());
    Ok(())
}

fn eval_transform(image: &LinearImage, gamma: f32) -> anyhow::Result<LinearImage> {
    if gamma == 1.0 {
        let clamped: Vec<f32> = image.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
        return Ok(LinearImage::from_vec(
            image.width(),
            image.height(),
            image.channels(),
            clamped,
        )?);
    }
    let inv = 1.0 / gamma;
    let data: Vec<f32> = image
        .data()
        .iter()
        .map(|v| v.clamp(0.0, 1.0).powf(inv))
        .collect();
    Ok(LinearImage::from_vec(
        image.width(),
        image.height(),
        image.channels(),
        data,
    )?)
}

fn cmd_evaluate(pred: &Path, reference: &Path, gamma: f32) -> anyhow::Result<()> {
    require_input(pred, "prediction")?;
    require_input(reference, "reference")?;
    if pred.is_dir() != reference.is_dir() {
        bail!("--pred and --ref must both be files or both be directories");
    }
    if !pred.is_dir() {
        let a = eval_transform(&read_pfm(pred)?, gamma)?;
        let b = eval_transform(&read_pfm(reference)?, gamma)?;
        println!("{:.4}", dssim(&a, &b)?);
        return Ok(());
    }
    let files = list_matching(pred, "*.pfm")?;
    if files.is_empty() {
        bail!("no .pfm files under {}", pred.display());
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for pred_file in &files {
        let name = pred_file
            .file_name()
            .and_then(|n| n.to_str())
            .expect("listing produced utf8 names");
        let ref_file = reference.join(name);
        require_input(&ref_file, "reference image")?;
        let a = eval_transform(&read_pfm(pred_file)?, gamma)?;
        let b = eval_transform(&read_pfm(&ref_file)?, gamma)?;
        let value = dssim(&a, &b)?;
        println!("{name} {value:.4}");
        sum += value;
        count += 1;
    }
    println!("mean {:.4}", sum / count as f64);
    Ok(())
}

fn cmd_characterize(
    readings_dir: &Path,
    mode: ModeArg,
    out: &Path,
    ratio: f32,
    reference: Option<&Path>,
    burst: Option<usize>,
    seed: u64,
) -> anyhow::Result<()> {
    require_input(readings_dir, "readings directory")?;
    let config = SensorConfig::default();
    let mut files = list_matching(readings_dir, "*.pgm")?;
    files.extend(list_matching(readings_dir, "*.pfm")?);
    files.sort();
    if files.is_empty() {
        bail!("no readings under {}", readings_dir.display());
    }
    let mut readings: Vec<QuantizedReading> = files
        .iter()
        .map(|p| load_reading(p, &config))
        .collect::<anyhow::Result<_>>()?;
    let bit_depth = readings[0].bit_depth();
    let layout = readings[0].layout();

    let reference = match reference {
        Some(path) => {
            require_input(path, "reference")?;
            load_reading(path, &config)?
        }
        None => {
            // Quantized mean of the readings.
            let len = readings[0].data().len();
            let mut acc = vec![0.0f64; len];
            for r in &readings {
                anyhow::ensure!(r.dims() == readings[0].dims(), "reading sizes differ");
                for (a, &q) in acc.iter_mut().zip(r.data()) {
                    *a += q as f64;
                }
            }
            let inv = 1.0 / readings.len() as f64;
            let data: Vec<u16> = acc.iter().map(|&s| (s * inv).round() as u16).collect();
            QuantizedReading::from_vec(
                readings[0].width(),
                readings[0].height(),
                readings[0].channels(),
                bit_depth,
                layout,
                data,
            )?
        }
    };

    if let Some(tuples) = burst {
        let fused = simulate_burst_fusion(&readings, tuples, seed)?;
        readings = fused
            .iter()
            .map(|img| Ok(quantize(img, bit_depth, layout)?))
            .collect::<anyhow::Result<_>>()?;
    }

    let mode = match mode {
        ModeArg::Low => ExposureClass::Low,
        ModeArg::High => ExposureClass::High,
    };
    let curve = variance_by_radiance(&readings, &reference, mode, ratio)?;
    std::fs::write(out, curve.to_text())?;
    println!("curve written to {}", out.display());
    Ok(())
}
