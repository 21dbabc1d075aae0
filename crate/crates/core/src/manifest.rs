//! Line-oriented dataset manifest.
//!
//! The format is plain text so manifests diff cleanly:
//!
//! ```text
//! # comment
//! clip <dir> <pattern> <fps>
//! pair <clean> <distorted>
//! calib <path>
//! split <name> <path>
//! seed <u64>
//! config <key> <value>
//! ```
//!
//! Recognized config keys: `bit_depth`, `exposure_ratio`, `burst_length`,
//! `gamma`, `layout`, `alignment`, `patch_width`, `patch_height`,
//! `patch_stride`, `window_stride`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::image::{Alignment, SensorConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ClipSpec {
    pub dir: PathBuf,
    pub pattern: String,
    pub fps: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
}

impl Default for PatchGeometry {
    fn default() -> Self {
        PatchGeometry {
            width: 128,
            height: 128,
            stride: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct DatasetManifest {
    pub clips: Vec<ClipSpec>,
    pub pairs: Vec<(PathBuf, PathBuf)>,
    pub calibration: Vec<PathBuf>,
    pub splits: BTreeMap<String, Vec<PathBuf>>,
    pub seed: Option<u64>,
    pub config: SensorConfig,
    pub patch: PatchGeometry,
    /// Distance between burst window starts when enumerating clip frames.
    pub window_stride: usize,
}


impl DatasetManifest {
    /// Window stride to use (defaults to the burst length when unset).
    pub fn effective_window_stride(&self) -> usize {
        if self.window_stride == 0 {
            self.config.burst_length
        } else {
            self.window_stride
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::ParseError {
        line,
        message: message.into(),
    }
}

fn require_exists(path: &Path, entry: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPath {
            path: path.to_path_buf(),
            entry: entry.to_string(),
        })
    }
}

/// Parse and validate a manifest. Relative paths resolve against the
/// manifest's own directory; every referenced path must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let resolve = |raw: &str| -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let mut manifest = DatasetManifest::default();
    let mut split_of: BTreeMap<PathBuf, String> = BTreeMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().expect("non-empty line");
        let rest: Vec<&str> = tokens.collect();
        match keyword {
            "clip" => {
                let [dir, pattern, fps] = rest.as_slice() else {
                    return Err(parse_err(line_no, "clip takes <dir> <pattern> <fps>"));
                };
                let fps: f32 = fps
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad fps '{fps}'")))?;
                let dir = resolve(dir);
                require_exists(&dir, "clip directory")?;
                manifest.clips.push(ClipSpec {
                    dir,
                    pattern: pattern.to_string(),
                    fps,
                });
            }
            "pair" => {
                let [clean, distorted] = rest.as_slice() else {
                    return Err(parse_err(line_no, "pair takes <clean> <distorted>"));
                };
                let clean = resolve(clean);
                let distorted = resolve(distorted);
                require_exists(&clean, "pair clean")?;
                require_exists(&distorted, "pair distorted")?;
                manifest.pairs.push((clean, distorted));
            }
            "calib" => {
                let [capture] = rest.as_slice() else {
                    return Err(parse_err(line_no, "calib takes <path>"));
                };
                let capture = resolve(capture);
                require_exists(&capture, "calibration capture")?;
                manifest.calibration.push(capture);
            }
            "split" => {
                let [name, entry] = rest.as_slice() else {
                    return Err(parse_err(line_no, "split takes <name> <path>"));
                };
                let entry = resolve(entry);
                require_exists(&entry, "split member")?;
                if let Some(first) = split_of.get(&entry) {
                    if first != name {
                        return Err(Error::DuplicateSplit {
                            path: entry,
                            first: first.clone(),
                            second: name.to_string(),
                        });
                    }
                } else {
                    split_of.insert(entry.clone(), name.to_string());
                }
                manifest
                    .splits
                    .entry(name.to_string())
                    .or_default()
                    .push(entry);
            }
            "seed" => {
                let [value] = rest.as_slice() else {
                    return Err(parse_err(line_no, "seed takes <u64>"));
                };
                let value: u64 = value
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad seed '{value}'")))?;
                manifest.seed = Some(value);
            }
            "config" => {
                let [key, value] = rest.as_slice() else {
                    return Err(parse_err(line_no, "config takes <key> <value>"));
                };
                apply_config(&mut manifest, key, value)
                    .map_err(|message| parse_err(line_no, message))?;
            }
            other => {
                return Err(parse_err(line_no, format!("unknown keyword '{other}'")));
            }
        }
    }

    manifest
        .config
        .validate()
        .map_err(|e| Error::InvalidConfig {
            message: format!("manifest sensor config: {e}"),
        })?;
    if manifest.patch.width % 2 != 0 || manifest.patch.width == 0 {
        return Err(Error::InvalidConfig {
            message: format!("patch width {} must be even and non-zero", manifest.patch.width),
        });
    }
    if manifest.patch.height == 0 || manifest.patch.stride == 0 {
        return Err(Error::InvalidConfig {
            message: "patch height and stride must be non-zero".into(),
        });
    }
    Ok(manifest)
}

fn apply_config(
    manifest: &mut DatasetManifest,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    let bad = |what: &str| format!("bad {what} '{value}'");
    match key {
        "bit_depth" => manifest.config.bit_depth = value.parse().map_err(|_| bad("bit_depth"))?,
        "exposure_ratio" => {
            manifest.config.exposure_ratio = value.parse().map_err(|_| bad("exposure_ratio"))?
        }
        "burst_length" => {
            manifest.config.burst_length = value.parse().map_err(|_| bad("burst_length"))?
        }
        "gamma" => manifest.config.gamma = value.parse().map_err(|_| bad("gamma"))?,
        "layout" => {
            manifest.config.layout = value.parse().map_err(|_| bad("layout"))?;
        }
        "alignment" => {
            manifest.config.alignment = match value {
                "end" => Alignment::End,
                "start" => Alignment::Start,
                _ => return Err(bad("alignment (end|start)")),
            }
        }
        "patch_width" => manifest.patch.width = value.parse().map_err(|_| bad("patch_width"))?,
        "patch_height" => manifest.patch.height = value.parse().map_err(|_| bad("patch_height"))?,
        "patch_stride" => manifest.patch.stride = value.parse().map_err(|_| bad("patch_stride"))?,
        "window_stride" => {
            manifest.window_stride = value.parse().map_err(|_| bad("window_stride"))?
        }
        other => return Err(format!("unknown config key '{other}'")),
    }
    Ok(())
}
