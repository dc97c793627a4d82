//! Binary (`P4`) and ASCII (`P1`) portable bitmaps for masks. `1` is set.

use std::io::Write;

use crate::error::{Error, Result};
use crate::image::Mask;

pub fn encode(mask: &Mask, out: &mut impl Write) -> Result<()> {
    let mut buf = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let stride = mask.width.div_ceil(8);
    for y in 0..mask.height {
        let mut row = vec![0u8; stride];
        for x in 0..mask.width {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        buf.extend_from_slice(&row);
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn decode(bytes: &[u8]) -> Result<Mask> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::decode("PBM", "truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let width: usize = token()?.parse().map_err(|_| Error::decode("PBM", "bad width"))?;
    let height: usize = token()?.parse().map_err(|_| Error::decode("PBM", "bad height"))?;
    match magic.as_str() {
        "P4" => {
            let start = pos + 1;
            let stride = width.div_ceil(8);
            let raster = bytes
                .get(start..start + stride * height)
                .ok_or_else(|| Error::decode("PBM", "truncated raster"))?;
            Ok(Mask::from_fn(width, height, |x, y| {
                raster[y * stride + x / 8] & (0x80 >> (x % 8)) != 0
            }))
        }
        "P1" => {
            let bits: Vec<bool> = bytes[pos..]
                .iter()
                .filter(|b| matches!(b, b'0' | b'1'))
                .map(|b| *b == b'1')
                .take(width * height)
                .collect();
            Mask::new(width, height, bits).map_err(|_| Error::decode("PBM", "truncated raster"))
        }
        m => Err(Error::decode("PBM", format!("bad magic '{m}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p4_round_trip() {
        let mask = Mask::from_fn(11, 3, |x, y| (x + y) % 3 == 0);
        let mut bytes = Vec::new();
        encode(&mask, &mut bytes).unwrap();
        assert!(bytes.starts_with(b"P4\n11 3\n"));
        assert_eq!(decode(&bytes).unwrap(), mask);
    }

    #[test]
    fn p1_with_comment() {
        let mask = decode(b"P1\n# c\n3 2\n1 0 1\n0 1 0\n").unwrap();
        assert_eq!(mask.bits, vec![true, false, true, false, true, false]);
        assert!(decode(b"P1\n3 2\n1 0").is_err());
    }
}
