//! Luminance, exposure range and integrated illumination.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::SolidAngleMap;
use crate::image::{EnvMap, GrayImage, Mask, Rgb};

/// BT.709 luma coefficients applied to linear RGB.
pub const BT709: [f64; 3] = [0.2126, 0.7152, 0.0722];

#[inline]
pub fn luminance_of(p: Rgb) -> f64 {
    BT709[0] * p[0] as f64 + BT709[1] * p[1] as f64 + BT709[2] * p[2] as f64
}

pub fn luminance(img: &EnvMap) -> GrayImage {
    GrayImage {
        width: img.width(),
        height: img.height(),
        data: img.pixels().par_iter().map(|p| luminance_of(*p)).collect(),
    }
}

/// Minimum and maximum luminance over valid pixels.
pub fn luminance_range(img: &EnvMap) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, p) in img.pixels().iter().enumerate() {
        if img.is_valid(i) {
            let y = luminance_of(*p);
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    if lo.is_finite() {
        Ok((lo, hi))
    } else {
        Err(Error::EmptyRegion)
    }
}

/// Exposure range in f-stops: `log2(Ymax - Ymin + 1)` over valid pixels.
pub fn exposure_value(img: &EnvMap) -> Result<f64> {
    let (lo, hi) = luminance_range(img)?;
    Ok(ev_from_range(lo, hi))
}

#[inline]
pub fn ev_from_range(lo: f64, hi: f64) -> f64 {
    (hi - lo + 1.0).log2()
}

/// Solid-angle weighted luminance sum over valid (and optionally masked)
/// pixels, accumulated in row-major order.
pub fn integrated_illumination(img: &EnvMap, omega: &SolidAngleMap, mask: Option<&Mask>) -> Result<f64> {
    if omega.width != img.width() || omega.height != img.height() || omega.format != img.format() {
        return Err(Error::DimensionMismatch(format!(
            "solid angles {}x{} {} vs image {}x{} {}",
            omega.width,
            omega.height,
            omega.format,
            img.width(),
            img.height(),
            img.format()
        )));
    }
    if let Some(m) = mask {
        if m.width != img.width() || m.height != img.height() {
            return Err(Error::DimensionMismatch("illumination mask".into()));
        }
    }
    let mut sum = 0.0f64;
    for (i, p) in img.pixels().iter().enumerate() {
        if !img.is_valid(i) || mask.is_some_and(|m| !m.bits[i]) {
            continue;
        }
        sum += omega.omega[i] * luminance_of(*p);
    }
    Ok(sum)
}

/// Zeroes every pixel outside the sky region and pins the validity mask.
pub fn zero_border(img: &EnvMap) -> EnvMap {
    let valid = img.valid_mask();
    let pixels = img
        .pixels()
        .iter()
        .zip(&valid.bits)
        .map(|(p, v)| if *v { *p } else { [0.0; 3] })
        .collect();
    EnvMap::from_parts(img.grid(), pixels, Some(valid.bits), img.encoding())
}
