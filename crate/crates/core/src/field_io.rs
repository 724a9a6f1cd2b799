//! Raw field dumps (DHF1) and 16-bit PGM previews.
//!
//! DHF1 layout: a 32-byte ASCII header `DHF1 nx ny lx ly`, space padded and
//! terminated by `\n` in the last byte, followed by `nx * ny` little-endian
//! `f64` values in row-major order (x fastest).

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};
use std::io::{Read, Write};

pub const DHF1_HEADER_LEN: usize = 32;

pub fn write_dhf1<W: Write>(w: &mut W, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let text = format!("DHF1 {} {} {} {}", g.nx(), g.ny(), g.lx(), g.ly());
    if text.len() > DHF1_HEADER_LEN - 1 {
        return Err(Error::Format(format!(
            "header `{text}` does not fit in {DHF1_HEADER_LEN} bytes"
        )));
    }
    let mut header = [b' '; DHF1_HEADER_LEN];
    header[..text.len()].copy_from_slice(text.as_bytes());
    header[DHF1_HEADER_LEN - 1] = b'\n';
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one DHF1 frame. Returns `Ok(None)` at a clean end of stream.
pub fn read_dhf1<R: Read>(r: &mut R) -> Result<Option<ScalarField>> {
    let mut header = [0u8; DHF1_HEADER_LEN];
    let mut filled = 0;
    while filled < DHF1_HEADER_LEN {
        let n = r.read(&mut header[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(Error::Format("truncated DHF1 header".into()));
        }
        filled += n;
    }
    let text = std::str::from_utf8(&header)
        .map_err(|_| Error::Format("DHF1 header is not ASCII".into()))?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some("DHF1") {
        return Err(Error::Format("missing DHF1 magic".into()));
    }
    let mut next = |name: &str| {
        parts
            .next()
            .ok_or_else(|| Error::Format(format!("DHF1 header missing {name}")))
            .map(str::to_owned)
    };
    let parse_err = |what: &str| Error::Format(format!("bad {what} in DHF1 header"));
    let nx: usize = next("nx")?.parse().map_err(|_| parse_err("nx"))?;
    let ny: usize = next("ny")?.parse().map_err(|_| parse_err("ny"))?;
    let lx: f64 = next("lx")?.parse().map_err(|_| parse_err("lx"))?;
    let ly: f64 = next("ly")?.parse().map_err(|_| parse_err("ly"))?;
    let grid = TorusGrid::new(nx, ny, lx, ly)?;
    let mut raw = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ScalarField::new(grid, values).map(Some)
}

/// Writes a binary 16-bit PGM with min-max scaling. The comment line records
/// the scaling so the preview can be mapped back to field values.
pub fn write_pgm16<W: Write>(w: &mut W, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    write!(
        w,
        "P5\n# min={lo:e} max={hi:e}\n{} {}\n65535\n",
        g.nx(),
        g.ny()
    )?;
    let mut buf = Vec::with_capacity(2 * g.len());
    for v in field.values() {
        let level = if span > 0.0 {
            ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        buf.extend_from_slice(&level.to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}
