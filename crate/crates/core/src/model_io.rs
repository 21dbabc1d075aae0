//! `DXNM` model container.
//!
//! Layout (all multi-byte integers little-endian):
//!
//! ```text
//! magic  b"DXNM"
//! u16    version (1)
//! u16    bit depth
//! u8     channels
//! u8     exposures (2)
//! per (channel, exposure), channel-major, low before high:
//!   u32  populated-bin count
//!   per populated bin, ascending y:
//!     u16  y
//!     u16  x_min
//!     u16  support length
//!     f32  cumulative probabilities, one per support entry
//! ```
//!
//! An optional row/column section follows: tag `RCNM`, one axis byte
//! (0 = rows, 1 = columns), then per-(channel, exposure) tables in the same
//! layout. Writing is deterministic, so re-estimating from the same inputs
//! reproduces the file byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::image::{max_value, Axis};
use crate::noise::{CumulativeRow, NoiseTable, PixelNoiseModel};
use crate::rowcol::RowColNoiseModel;
use crate::Result;

const MAGIC: &[u8; 4] = b"DXNM";
const ROWCOL_TAG: &[u8; 4] = b"RCNM";
const VERSION: u16 = 1;

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        reason: reason.into(),
    }
}

fn write_table(writer: &mut impl Write, table: &NoiseTable) -> Result<()> {
    writer.write_all(&(table.populated().len() as u32).to_le_bytes())?;
    for &y in table.populated() {
        let row = table.rows()[y as usize].as_ref().expect("populated row");
        writer.write_all(&y.to_le_bytes())?;
        writer.write_all(&row.x_min.to_le_bytes())?;
        writer.write_all(&(row.cdf.len() as u16).to_le_bytes())?;
        for &p in &row.cdf {
            writer.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<R: Read> {
    reader: R,
}

impl<R: Read> Cursor<R> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.reader.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::TruncatedPayload {
                    expected: buf.len(),
                    got: 0,
                }
            } else {
                Error::Io(e)
            }
        })
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        Ok(b[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.exact(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f32(&mut self) -> Result<f32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }
}

fn read_table(cursor: &mut Cursor<impl Read>, bit_depth: u8) -> Result<NoiseTable> {
    let bins = max_value(bit_depth) as usize + 1;
    let populated = cursor.u32()? as usize;
    if populated > bins {
        return Err(malformed(format!("{populated} populated bins at {bit_depth} bits")));
    }
    let mut rows: Vec<Option<CumulativeRow>> = vec![None; bins];
    let mut last_y: Option<u16> = None;
    for _ in 0..populated {
        let y = cursor.u16()?;
        if y as usize >= bins {
            return Err(malformed(format!("bin {y} outside {bit_depth}-bit range")));
        }
        if let Some(prev) = last_y {
            if y <= prev {
                return Err(malformed("populated bins out of order"));
            }
        }
        last_y = Some(y);
        let x_min = cursor.u16()?;
        let len = cursor.u16()? as usize;
        if len == 0 || x_min as usize + len > bins {
            return Err(malformed("support outside sample range"));
        }
        let mut cdf = Vec::with_capacity(len);
        for _ in 0..len {
            cdf.push(cursor.f32()?);
        }
        rows[y as usize] = Some(CumulativeRow { x_min, cdf });
    }
    Ok(NoiseTable::from_rows(rows))
}

/// Write the pixel model and, when given, the row/column model.
pub fn write_model(
    path: impl AsRef<Path>,
    pixel: &PixelNoiseModel,
    rowcol: Option<&RowColNoiseModel>,
) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(pixel.bit_depth() as u16).to_le_bytes())?;
    writer.write_all(&[pixel.channels() as u8, 2u8])?;
    for table in pixel.tables() {
        write_table(&mut writer, table)?;
    }
    if let Some(model) = rowcol {
        if model.bit_depth() != pixel.bit_depth() {
            return Err(Error::BitDepthMismatch {
                left: pixel.bit_depth(),
                right: model.bit_depth(),
            });
        }
        writer.write_all(ROWCOL_TAG)?;
        let axis = match model.axis {
            Axis::Rows => 0u8,
            Axis::Columns => 1u8,
        };
        writer.write_all(&[axis])?;
        for table in model.tables() {
            write_table(&mut writer, table)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Read a model container back.
pub fn read_model(
    path: impl AsRef<Path>,
) -> Result<(PixelNoiseModel, Option<RowColNoiseModel>)> {
    let file = File::open(path.as_ref())?;
    let mut cursor = Cursor {
        reader: BufReader::new(file),
    };
    let mut magic = [0u8; 4];
    cursor.exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(malformed("bad magic"));
    }
    let version = cursor.u16()?;
    if version != VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let bit_depth = cursor.u16()?;
    if !(8..=16).contains(&bit_depth) {
        return Err(malformed(format!("bad bit depth {bit_depth}")));
    }
    let bit_depth = bit_depth as u8;
    let channels = cursor.u8()? as usize;
    let exposures = cursor.u8()? as usize;
    if channels == 0 || exposures != 2 {
        return Err(malformed(format!("{channels} channels, {exposures} exposures")));
    }

    let mut tables = Vec::with_capacity(channels * 2);
    for _ in 0..channels * 2 {
        tables.push(read_table(&mut cursor, bit_depth)?);
    }
    let pixel = PixelNoiseModel::from_tables(channels, bit_depth, tables, 0)?;

    // Optional row/column section. A short read at a buffer boundary is
    // not EOF, so collect the tag bytes in a loop.
    let mut tag = [0u8; 4];
    let mut got = 0usize;
    while got < 4 {
        let n = cursor.reader.read(&mut tag[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    match got {
        0 => Ok((pixel, None)),
        4 if &tag == ROWCOL_TAG => {
            let axis = match cursor.u8()? {
                0 => Axis::Rows,
                1 => Axis::Columns,
                other => return Err(malformed(format!("bad axis byte {other}"))),
            };
            let mut tables = Vec::with_capacity(channels * 2);
            for _ in 0..channels * 2 {
                tables.push(read_table(&mut cursor, bit_depth)?);
            }
            let rowcol = RowColNoiseModel::from_tables(axis, channels, bit_depth, tables)?;
            Ok((pixel, Some(rowcol)))
        }
        _ => Err(malformed("unknown trailing section")),
    }
}
