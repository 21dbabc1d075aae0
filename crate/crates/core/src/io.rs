//! Lossless image file I/O.
//!
//! Two formats are supported:
//!
//! * PFM (`Pf` grayscale, `PF` color): 32-bit float samples with the usual
//!   scale header; a negative scale marks little-endian payloads. Scanlines
//!   are stored bottom-to-top per the format convention. Writing always uses
//!   scale `-1.0`.
//! * 16-bit binary PGM (`P5`): big-endian samples with maxval `2^B - 1` and a
//!   `# bitdepth B` comment. Multi-channel readings add a `# channels C`
//!   comment (samples interleaved) and the exposure layout is recorded as
//!   `# layout col-even` etc. Single-channel files are plain PGM.
//!
//! Both formats round-trip bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::image::{max_value, ExposureLayout, LinearImage, QuantizedReading};
use crate::Result;

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        reason: reason.into(),
    }
}

/// Read one header line terminated by `\n` (PFM headers are line-oriented).
fn read_header_line(reader: &mut impl Read) -> Result<String> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read(&mut byte)? {
            0 => {
                if line.is_empty() {
                    return Err(malformed("unexpected end of header"));
                }
                break;
            }
            _ => {
                if byte[0] == b'\n' {
                    break;
                }
                line.push(byte[0]);
                if line.len() > 256 {
                    return Err(malformed("header line too long"));
                }
            }
        }
    }
    String::from_utf8(line).map_err(|_| malformed("header is not valid UTF-8"))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<LinearImage> {
    let file = File::open(path.as_ref())?;
    let mut reader = BufReader::new(file);

    let magic = read_header_line(&mut reader)?;
    let channels = match magic.trim() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(malformed(format!("bad PFM magic '{other}'"))),
    };

    let dims = read_header_line(&mut reader)?;
    let mut parts = dims.split_whitespace();
    let width: usize = parts
        .next()
        .ok_or_else(|| malformed("missing width"))?
        .parse()
        .map_err(|_| malformed("width is not an integer"))?;
    let height: usize = parts
        .next()
        .ok_or_else(|| malformed("missing height"))?
        .parse()
        .map_err(|_| malformed("height is not an integer"))?;
    if parts.next().is_some() {
        return Err(malformed("trailing tokens on dimension line"));
    }
    if width == 0 || height == 0 {
        return Err(malformed("zero-sized image"));
    }

    let scale_line = read_header_line(&mut reader)?;
    let scale: f32 = scale_line
        .trim()
        .parse()
        .map_err(|_| malformed("scale is not a number"))?;
    if scale == 0.0 {
        return Err(malformed("scale must be non-zero"));
    }
    let little_endian = scale < 0.0;

    let count = width * height * channels;
    let mut payload = vec![0u8; count * 4];
    let mut got = 0usize;
    while got < payload.len() {
        let n = reader.read(&mut payload[got..])?;
        if n == 0 {
            return Err(Error::TruncatedPayload {
                expected: payload.len(),
                got,
            });
        }
        got += n;
    }

    // Scanlines are bottom-to-top on disk.
    let row = width * channels;
    let mut data = vec![0.0f32; count];
    for y in 0..height {
        let src_row = height - 1 - y;
        for i in 0..row {
            let off = (src_row * row + i) * 4;
            let bytes = [
                payload[off],
                payload[off + 1],
                payload[off + 2],
                payload[off + 3],
            ];
            data[y * row + i] = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
        }
    }
    LinearImage::from_vec(width, height, channels, data)
}

pub fn write_pfm(path: impl AsRef<Path>, image: &LinearImage) -> Result<()> {
    let magic = match image.channels() {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::InvalidConfig {
                message: format!("PFM supports 1 or 3 channels, got {c}"),
            })
        }
    };
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    write!(writer, "{magic}\n{} {}\n-1.0\n", image.width(), image.height())?;
    let row = image.width() * image.channels();
    for y in (0..image.height()).rev() {
        for &v in &image.data()[y * row..(y + 1) * row] {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Pull the next whitespace-delimited token, collecting `#` comment lines.
fn next_token(bytes: &[u8], pos: &mut usize, comments: &mut Vec<String>) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos >= bytes.len() {
            return Err(malformed("unexpected end of header"));
        }
        if bytes[*pos] == b'#' {
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            comments.push(String::from_utf8_lossy(&bytes[start..*pos]).into_owned());
            continue;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        return Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned());
    }
}

fn comment_value<'a>(comments: &'a [String], key: &str) -> Option<&'a str> {
    comments.iter().find_map(|c| {
        let body = c.trim_start_matches('#').trim();
        body.strip_prefix(key).map(str::trim)
    })
}

/// Infer the bit depth B from a maxval of the form `2^B - 1`.
fn bit_depth_from_maxval(maxval: u32) -> Option<u8> {
    (8u8..=16).find(|&b| ((1u32 << b) - 1) == maxval)
}

pub fn read_pgm16(path: impl AsRef<Path>) -> Result<QuantizedReading> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    if bytes.is_empty() {
        return Err(malformed("empty file"));
    }

    let mut pos = 0usize;
    let mut comments = Vec::new();
    let magic = next_token(&bytes, &mut pos, &mut comments)?;
    if magic != "P5" {
        return Err(malformed(format!("bad PGM magic '{magic}'")));
    }
    let width: usize = next_token(&bytes, &mut pos, &mut comments)?
        .parse()
        .map_err(|_| malformed("width is not an integer"))?;
    let height: usize = next_token(&bytes, &mut pos, &mut comments)?
        .parse()
        .map_err(|_| malformed("height is not an integer"))?;
    let maxval: u32 = next_token(&bytes, &mut pos, &mut comments)?
        .parse()
        .map_err(|_| malformed("maxval is not an integer"))?;
    if width == 0 || height == 0 {
        return Err(malformed("zero-sized image"));
    }

    let bit_depth = match comment_value(&comments, "bitdepth") {
        Some(text) => {
            let b: u8 = text
                .parse()
                .map_err(|_| malformed("bitdepth comment is not an integer"))?;
            if !(8..=16).contains(&b) || maxval != max_value(b) as u32 {
                return Err(Error::UnsupportedMaxVal { maxval });
            }
            b
        }
        None => bit_depth_from_maxval(maxval).ok_or(Error::UnsupportedMaxVal { maxval })?,
    };

    let channels: usize = match comment_value(&comments, "channels") {
        Some(text) => text
            .parse()
            .map_err(|_| malformed("channels comment is not an integer"))?,
        None => 1,
    };
    let layout: ExposureLayout = match comment_value(&comments, "layout") {
        Some(text) => text.parse()?,
        None => ExposureLayout::default(),
    };

    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let count = width * height * channels;
    let expected = count * 2;
    let available = bytes.len().saturating_sub(pos);
    if available < expected {
        return Err(Error::TruncatedPayload {
            expected,
            got: available,
        });
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let off = pos + i * 2;
        data.push(u16::from_be_bytes([bytes[off], bytes[off + 1]]));
    }
    QuantizedReading::from_vec(width, height, channels, bit_depth, layout, data)
}

pub fn write_pgm16(path: impl AsRef<Path>, reading: &QuantizedReading) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    write!(
        writer,
        "P5\n# bitdepth {}\n# channels {}\n# layout {}\n{} {}\n{}\n",
        reading.bit_depth(),
        reading.channels(),
        reading.layout(),
        reading.width(),
        reading.height(),
        reading.max_value()
    )?;
    for &q in reading.data() {
        writer.write_all(&q.to_be_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{Axis, Parity};
    use crate::rng::unit_f64;

    fn random_image(w: usize, h: usize, ch: usize, seed: u64) -> LinearImage {
        let data: Vec<f32> = (0..w * h * ch)
            .map(|i| unit_f64(seed, [i as u64, 0, 0, 0]) as f32)
            .collect();
        LinearImage::from_vec(w, h, ch, data).unwrap()
    }

    #[test]
    fn pfm_round_trip_gray_and_color() {
        let dir = tempfile::tempdir().unwrap();
        for (ch, name) in [(1usize, "gray.pfm"), (3, "color.pfm")] {
            let image = random_image(7, 5, ch, ch as u64);
            let path = dir.path().join(name);
            write_pfm(&path, &image).unwrap();
            let back = read_pfm(&path).unwrap();
            assert_eq!(back, image);
        }
    }

    #[test]
    fn pfm_rejects_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.pfm");
        File::create(&path).unwrap();
        assert!(matches!(read_pfm(&path), Err(Error::MalformedHeader { .. })));
    }

    #[test]
    fn pfm_detects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.pfm");
        let mut f = File::create(&path).unwrap();
        // Header promises 4x4 grayscale but only one float follows.
        write!(f, "Pf\n4 4\n-1.0\n").unwrap();
        f.write_all(&1.0f32.to_le_bytes()).unwrap();
        drop(f);
        assert!(matches!(
            read_pfm(&path),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn pfm_big_endian_payloads_are_readable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut f = File::create(&path).unwrap();
        write!(f, "Pf\n2 1\n1.0\n").unwrap();
        for v in [0.25f32, 0.75] {
            f.write_all(&v.to_be_bytes()).unwrap();
        }
        drop(f);
        let image = read_pfm(&path).unwrap();
        assert_eq!(image.data(), &[0.25, 0.75]);
    }

    #[test]
    fn pgm16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let layout = ExposureLayout {
            axis: Axis::Columns,
            low_parity: Parity::Odd,
        };
        for (ch, bit_depth) in [(1usize, 12u8), (3, 10)] {
            let max = max_value(bit_depth) as u64;
            let data: Vec<u16> = (0..6 * 4 * ch)
                .map(|i| (unit_f64(5, [i as u64, 0, 0, 0]) * (max + 1) as f64) as u16)
                .collect();
            let reading = QuantizedReading::from_vec(6, 4, ch, bit_depth, layout, data).unwrap();
            let path = dir.path().join(format!("r{ch}.pgm"));
            write_pgm16(&path, &reading).unwrap();
            let back = read_pgm16(&path).unwrap();
            assert_eq!(back, reading);
        }
    }

    #[test]
    fn pgm16_byte_identical_rewrite() {
        let dir = tempfile::tempdir().unwrap();
        let reading = QuantizedReading::from_vec(
            3,
            2,
            1,
            12,
            ExposureLayout::default(),
            vec![0, 1, 2, 4093, 4094, 4095],
        )
        .unwrap();
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        write_pgm16(&a, &reading).unwrap();
        write_pgm16(&b, &read_pgm16(&a).unwrap()).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn pgm16_rejects_bad_maxval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        let mut f = File::create(&path).unwrap();
        write!(f, "P5\n2 2\n60000\n").unwrap();
        f.write_all(&[0u8; 8]).unwrap();
        drop(f);
        assert!(matches!(
            read_pgm16(&path),
            Err(Error::UnsupportedMaxVal { maxval: 60000 })
        ));
    }

    #[test]
    fn pgm16_detects_truncation_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.pgm");
        let mut f = File::create(&path).unwrap();
        write!(f, "P5\n# bitdepth 12\n4 4\n4095\n").unwrap();
        f.write_all(&[0u8; 6]).unwrap();
        drop(f);
        assert!(matches!(
            read_pgm16(&path),
            Err(Error::TruncatedPayload { .. })
        ));

        let empty = dir.path().join("empty.pgm");
        File::create(&empty).unwrap();
        assert!(matches!(
            read_pgm16(&empty),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn plain_pgm_without_comments_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plain.pgm");
        let mut f = File::create(&path).unwrap();
        write!(f, "P5\n2 1\n4095\n").unwrap();
        for q in [7u16, 4095] {
            f.write_all(&q.to_be_bytes()).unwrap();
        }
        drop(f);
        let reading = read_pgm16(&path).unwrap();
        assert_eq!(reading.bit_depth(), 12);
        assert_eq!(reading.channels(), 1);
        assert_eq!(reading.data(), &[7, 4095]);
    }
}
