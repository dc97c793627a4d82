//! Portable Float Map.
//!
//! Header `PF\n<width> <height>\n<scale>\n` (or `Pf` for one channel), then
//! `f32` samples with rows stored bottom to top. A negative scale marks
//! little-endian data. This writer always emits little-endian with scale `-1.0`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Row-major, top row first.
    pub data: Vec<f32>,
}

pub fn encode(img: &PfmImage, out: &mut impl Write) -> Result<()> {
    let magic = match img.channels {
        3 => "PF",
        1 => "Pf",
        c => return Err(Error::param(format!("PFM supports 1 or 3 channels, not {c}"))),
    };
    if img.data.len() != img.width * img.height * img.channels {
        return Err(Error::DimensionMismatch("PFM sample count".into()));
    }
    let mut buf = Vec::with_capacity(32 + img.data.len() * 4);
    write!(buf, "{magic}\n{} {}\n-1.0\n", img.width, img.height)?;
    let row = img.width * img.channels;
    for y in (0..img.height).rev() {
        for v in &img.data[y * row..(y + 1) * row] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn decode(mut input: impl Read) -> Result<PfmImage> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_bytes(&bytes)
}

pub fn decode_bytes(bytes: &[u8]) -> Result<PfmImage> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::decode("PFM", "truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        m => return Err(Error::decode("PFM", format!("bad magic '{m}'"))),
    };
    let width: usize = token()?
        .parse()
        .map_err(|_| Error::decode("PFM", "bad width"))?;
    let height: usize = token()?
        .parse()
        .map_err(|_| Error::decode("PFM", "bad height"))?;
    let scale: f64 = token()?
        .parse()
        .map_err(|_| Error::decode("PFM", "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::decode("PFM", "scale must be non-zero"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let little = scale < 0.0;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::decode("PFM", "dimensions overflow"))?;
    let raster = bytes
        .get(pos..)
        .filter(|r| r.len() >= count * 4)
        .ok_or_else(|| Error::decode("PFM", format!("expected {} raster bytes", count * 4)))?;
    let row = width * channels;
    let mut data = vec![0.0f32; count];
    for (file_row, chunk) in raster[..count * 4].chunks_exact(row * 4).enumerate() {
        let y = height - 1 - file_row;
        for (k, b) in chunk.chunks_exact(4).enumerate() {
            let b = [b[0], b[1], b[2], b[3]];
            data[y * row + k] = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}
