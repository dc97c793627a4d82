//! Radiance RGBE (`.hdr`) reading and writing.
//!
//! Supports flat, old-style run-length and adaptive (new-style) RLE
//! scanlines. Decoding uses `m · 2^(e-136)` per channel, so a zero mantissa
//! decodes to exactly zero.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RgbeImage {
    pub width: usize,
    pub height: usize,
    /// RGB triples, top row first.
    pub data: Vec<[f32; 3]>,
}

#[inline]
pub fn rgbe_to_float(px: [u8; 4]) -> [f32; 3] {
    if px[3] == 0 {
        return [0.0; 3];
    }
    let f = 2f64.powi(px[3] as i32 - 136);
    [(px[0] as f64 * f) as f32, (px[1] as f64 * f) as f32, (px[2] as f64 * f) as f32]
}

#[inline]
pub fn float_to_rgbe(rgb: [f32; 3]) -> [u8; 4] {
    let v = rgb[0].max(rgb[1]).max(rgb[2]) as f64;
    if !(v >= 1e-32) {
        return [0; 4];
    }
    let (mant, exp) = frexp(v);
    let scale = mant * 256.0 / v;
    let q = |c: f32| ((c.max(0.0) as f64) * scale).floor().min(255.0) as u8;
    [q(rgb[0]), q(rgb[1]), q(rgb[2]), (exp + 128).clamp(0, 255) as u8]
}

/// `v = m · 2^e` with `m ∈ [0.5, 1)`.
fn frexp(v: f64) -> (f64, i32) {
    let mut e = v.log2().floor() as i32 + 1;
    let mut m = v / 2f64.powi(e);
    if m >= 1.0 {
        m /= 2.0;
        e += 1;
    } else if m < 0.5 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

pub fn decode(bytes: &[u8]) -> Result<RgbeImage> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Result<String> {
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos] != b'\n' {
            *pos += 1;
        }
        if *pos >= bytes.len() {
            return Err(Error::decode("RGBE", "truncated header"));
        }
        let line = String::from_utf8_lossy(&bytes[start..*pos]).trim_end_matches('\r').to_string();
        *pos += 1;
        Ok(line)
    };

    let magic = next_line(&mut pos)?;
    if !magic.starts_with("#?") {
        return Err(Error::decode("RGBE", "missing #? signature"));
    }
    loop {
        let line = next_line(&mut pos)?;
        if line.is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(Error::decode("RGBE", format!("unsupported pixel format {fmt}")));
            }
        }
    }
    let res = next_line(&mut pos)?;
    let tok: Vec<&str> = res.split_whitespace().collect();
    let (height, width, bottom_up) = match tok.as_slice() {
        ["-Y", h, "+X", w] => (parse_dim(h)?, parse_dim(w)?, false),
        ["+Y", h, "+X", w] => (parse_dim(h)?, parse_dim(w)?, true),
        _ => return Err(Error::decode("RGBE", format!("unsupported orientation '{res}'"))),
    };

    let mut data = vec![[0.0f32; 3]; width * height];
    let mut scan = vec![[0u8; 4]; width];
    for row in 0..height {
        read_scanline(bytes, &mut pos, &mut scan)?;
        let y = if bottom_up { height - 1 - row } else { row };
        for (x, px) in scan.iter().enumerate() {
            data[y * width + x] = rgbe_to_float(*px);
        }
    }
    Ok(RgbeImage { width, height, data })
}

fn parse_dim(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::decode("RGBE", format!("bad dimension '{s}'")))
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let out = bytes
        .get(*pos..*pos + n)
        .ok_or_else(|| Error::decode("RGBE", "truncated scanline"))?;
    *pos += n;
    Ok(out)
}

fn read_scanline(bytes: &[u8], pos: &mut usize, scan: &mut [[u8; 4]]) -> Result<()> {
    let width = scan.len();
    if width == 0 {
        return Ok(());
    }
    let head = take(bytes, pos, 4)?;
    let adaptive = (8..0x8000).contains(&width) && head[0] == 2 && head[1] == 2 && head[2] & 0x80 == 0;
    if !adaptive {
        *pos -= 4;
        return read_flat(bytes, pos, scan);
    }
    if ((head[2] as usize) << 8 | head[3] as usize) != width {
        return Err(Error::decode("RGBE", "scanline width mismatch"));
    }
    for c in 0..4 {
        let mut x = 0;
        while x < width {
            let count = take(bytes, pos, 1)?[0] as usize;
            if count > 128 {
                let run = count - 128;
                let v = take(bytes, pos, 1)?[0];
                if x + run > width {
                    return Err(Error::decode("RGBE", "run overflows scanline"));
                }
                for px in &mut scan[x..x + run] {
                    px[c] = v;
                }
                x += run;
            } else {
                if count == 0 || x + count > width {
                    return Err(Error::decode("RGBE", "bad literal run"));
                }
                let lit = take(bytes, pos, count)?;
                for (px, v) in scan[x..x + count].iter_mut().zip(lit) {
                    px[c] = *v;
                }
                x += count;
            }
        }
    }
    Ok(())
}

/// Flat pixels with optional old-style `(1, 1, 1, n)` repeat markers.
fn read_flat(bytes: &[u8], pos: &mut usize, scan: &mut [[u8; 4]]) -> Result<()> {
    let mut x = 0;
    let mut shift = 0;
    while x < scan.len() {
        let p = take(bytes, pos, 4)?;
        let px = [p[0], p[1], p[2], p[3]];
        if px[0] == 1 && px[1] == 1 && px[2] == 1 {
            if x == 0 {
                return Err(Error::decode("RGBE", "repeat marker at scanline start"));
            }
            let run = (px[3] as usize) << shift;
            if x + run > scan.len() {
                return Err(Error::decode("RGBE", "repeat overflows scanline"));
            }
            let prev = scan[x - 1];
            for s in &mut scan[x..x + run] {
                *s = prev;
            }
            x += run;
            shift += 8;
        } else {
            scan[x] = px;
            x += 1;
            shift = 0;
        }
    }
    Ok(())
}

pub fn encode(img: &RgbeImage, out: &mut impl Write) -> Result<()> {
    if img.data.len() != img.width * img.height {
        return Err(Error::DimensionMismatch("RGBE pixel count".into()));
    }
    let mut buf = Vec::new();
    write!(
        buf,
        "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {} +X {}\n",
        img.height, img.width
    )?;
    let w = img.width;
    for row in img.data.chunks(w.max(1)) {
        let px: Vec<[u8; 4]> = row.iter().map(|p| float_to_rgbe(*p)).collect();
        if !(8..0x8000).contains(&w) {
            for p in &px {
                buf.extend_from_slice(p);
            }
            continue;
        }
        buf.extend_from_slice(&[2, 2, (w >> 8) as u8, (w & 0xff) as u8]);
        for c in 0..4 {
            let chan: Vec<u8> = px.iter().map(|p| p[c]).collect();
            rle_channel(&chan, &mut buf);
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

const MIN_RUN: usize = 4;

fn rle_channel(data: &[u8], out: &mut Vec<u8>) {
    let mut cur = 0;
    while cur < data.len() {
        // find the next run of at least MIN_RUN equal bytes
        let mut beg = cur;
        let mut run = 0;
        while beg < data.len() {
            run = 1;
            while run < 127 && beg + run < data.len() && data[beg + run] == data[beg] {
                run += 1;
            }
            if run >= MIN_RUN {
                break;
            }
            beg += run;
        }
        if run < MIN_RUN {
            beg = data.len();
        }
        while cur < beg {
            let n = (beg - cur).min(128);
            out.push(n as u8);
            out.extend_from_slice(&data[cur..cur + n]);
            cur += n;
        }
        if run >= MIN_RUN && beg < data.len() {
            out.push(128 + run as u8);
            out.push(data[beg]);
            cur = beg + run;
        }
    }
}
