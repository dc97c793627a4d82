//! Resizing and format conversion.
//!
//! Every filter here is a convex combination of valid source pixels (border
//! pixels carry zero weight and the remaining weights are renormalized), so
//! resampling can never widen an image's luminance range. The validity mask
//! of a resized image is the nearest-neighbour resize of the source mask.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{EnvFormat, Grid, Spherical};
use crate::image::{EnvMap, Rgb};
use crate::radiometry::luminance_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InterpMethod {
    Nearest,
    /// Two-tap linear interpolation at the mapped sample position, without
    /// prefiltering (drops detail when downsampling).
    Bilinear,
    /// Triangle (first-order B-spline) filter whose support widens with the
    /// downsampling factor. Equal to `Bilinear` when upsampling.
    #[default]
    LinearSpline,
    /// Box average over power-of-two blocks.
    Area,
    /// Keeps the brightest pixel (by luminance) of each power-of-two block.
    MaxPool,
}

impl InterpMethod {
    pub const ALL: [InterpMethod; 5] = [
        InterpMethod::Nearest,
        InterpMethod::Bilinear,
        InterpMethod::LinearSpline,
        InterpMethod::Area,
        InterpMethod::MaxPool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterpMethod::Nearest => "nearest",
            InterpMethod::Bilinear => "bilinear",
            InterpMethod::LinearSpline => "linear-spline",
            InterpMethod::Area => "area",
            InterpMethod::MaxPool => "max-pool",
        }
    }

    fn requires_pow2(self) -> bool {
        matches!(self, InterpMethod::Area | InterpMethod::MaxPool)
    }
}

impl fmt::Display for InterpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "nearest" => Ok(InterpMethod::Nearest),
            "bilinear" | "linear" => Ok(InterpMethod::Bilinear),
            "linear-spline" | "spline" | "triangle" => Ok(InterpMethod::LinearSpline),
            "area" => Ok(InterpMethod::Area),
            "max-pool" | "maxpool" | "max" => Ok(InterpMethod::MaxPool),
            other => Err(Error::param(format!("unknown interpolation '{other}'"))),
        }
    }
}

type Taps = Vec<Vec<(usize, f64)>>;

#[inline]
fn fold_index(j: i64, n: usize, wrap: bool) -> usize {
    if wrap {
        j.rem_euclid(n as i64) as usize
    } else {
        j.clamp(0, n as i64 - 1) as usize
    }
}

/// Source index closest to the center of destination pixel `i`.
#[inline]
fn nearest_index(i: usize, scale: f64, n: usize) -> usize {
    (((i as f64 + 0.5) * scale) as usize).min(n - 1)
}

fn build_taps(method: InterpMethod, src: usize, dst: usize, wrap: bool) -> Taps {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale - 0.5;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            let mut push = |j: i64, w: f64| {
                if w > 0.0 {
                    let k = fold_index(j, src, wrap);
                    match taps.iter_mut().find(|(t, _)| *t == k) {
                        Some(t) => t.1 += w,
                        None => taps.push((k, w)),
                    }
                }
            };
            match method {
                InterpMethod::Bilinear => {
                    let x0 = center.floor();
                    let f = center - x0;
                    push(x0 as i64, 1.0 - f);
                    push(x0 as i64 + 1, f);
                }
                InterpMethod::LinearSpline => {
                    let support = scale.max(1.0);
                    let lo = (center - support).ceil() as i64;
                    let hi = (center + support).floor() as i64;
                    for j in lo..=hi {
                        push(j, 1.0 - (j as f64 - center).abs() / support);
                    }
                }
                InterpMethod::Area => {
                    let f = src / dst;
                    for j in i * f..(i + 1) * f {
                        push(j as i64, 1.0);
                    }
                }
                InterpMethod::Nearest | InterpMethod::MaxPool => {
                    push(nearest_index(i, scale, src) as i64, 1.0);
                }
            }
            taps
        })
        .collect()
}

fn pow2_factor(method: InterpMethod, from: usize, to: usize) -> Result<usize> {
    let err = || Error::NonPowerOfTwo {
        method: method.name(),
        from,
        to,
    };
    if to == 0 || to > from || !from.is_multiple_of(to) {
        return Err(err());
    }
    let f = from / to;
    if f.is_power_of_two() {
        Ok(f)
    } else {
        Err(err())
    }
}

fn resize_mask(src: &EnvMap, tw: usize, th: usize) -> Vec<bool> {
    let sx = src.width() as f64 / tw as f64;
    let sy = src.height() as f64 / th as f64;
    let mut out = Vec::with_capacity(tw * th);
    for y in 0..th {
        let yy = nearest_index(y, sy, src.height());
        for x in 0..tw {
            let xx = nearest_index(x, sx, src.width());
            out.push(src.is_valid(yy * src.width() + xx));
        }
    }
    out
}

/// Resizes within the same format. Area and max-pool accept only exact
/// power-of-two downsampling factors (identical on both axes).
pub fn resize(img: &EnvMap, target_w: usize, target_h: usize, method: InterpMethod) -> Result<EnvMap> {
    let grid = Grid::new(img.format(), target_w, target_h)?;
    if method.requires_pow2() {
        let fx = pow2_factor(method, img.width(), target_w)?;
        let fy = pow2_factor(method, img.height(), target_h)?;
        if fx != fy {
            return Err(Error::NonPowerOfTwo {
                method: method.name(),
                from: img.height(),
                to: target_h,
            });
        }
    }
    let valid = resize_mask(img, target_w, target_h);
    let pixels = match method {
        InterpMethod::MaxPool => max_pool(img, target_w, target_h, &valid),
        _ => {
            let wrap = img.grid().wraps_horizontally();
            let tx = build_taps(method, img.width(), target_w, wrap);
            let ty = build_taps(method, img.height(), target_h, false);
            separable(img, &tx, &ty, &valid)
        }
    };
    Ok(EnvMap::from_parts(grid, pixels, Some(valid), img.encoding()))
}

/// Normalized separable filtering: numerator and weight sums are filtered
/// with the same taps, border pixels contribute zero weight.
fn separable(img: &EnvMap, tx: &Taps, ty: &Taps, valid: &[bool]) -> Vec<Rgb> {
    let (sw, sh) = (img.width(), img.height());
    let tw = tx.len();
    // horizontal pass: sh rows of tw accumulators [r, g, b, weight]
    let horiz: Vec<[f64; 4]> = (0..sh)
        .into_par_iter()
        .flat_map_iter(|y| {
            tx.iter().map(move |taps| {
                let mut acc = [0.0f64; 4];
                for &(x, w) in taps {
                    let i = y * sw + x;
                    if img.is_valid(i) {
                        let p = img.pixels()[i];
                        acc[0] += w * p[0] as f64;
                        acc[1] += w * p[1] as f64;
                        acc[2] += w * p[2] as f64;
                        acc[3] += w;
                    }
                }
                acc
            })
        })
        .collect();
    (0..ty.len())
        .into_par_iter()
        .flat_map_iter(|y| {
            let horiz = &horiz;
            (0..tw).map(move |x| {
                if !valid[y * tw + x] {
                    return [0.0; 3];
                }
                let mut acc = [0.0f64; 4];
                for &(yy, w) in &ty[y] {
                    let h = horiz[yy * tw + x];
                    for k in 0..4 {
                        acc[k] += w * h[k];
                    }
                }
                if acc[3] > 0.0 {
                    [
                        (acc[0] / acc[3]) as f32,
                        (acc[1] / acc[3]) as f32,
                        (acc[2] / acc[3]) as f32,
                    ]
                } else {
                    [0.0; 3]
                }
            })
        })
        .collect()
}

fn max_pool(img: &EnvMap, tw: usize, th: usize, valid: &[bool]) -> Vec<Rgb> {
    let f = img.width() / tw;
    (0..tw * th)
        .into_par_iter()
        .map(|o| {
            if !valid[o] {
                return [0.0; 3];
            }
            let (x, y) = (o % tw, o / tw);
            let mut best: Option<(f64, Rgb)> = None;
            for yy in y * f..(y + 1) * f {
                for xx in x * f..(x + 1) * f {
                    let i = yy * img.width() + xx;
                    if img.is_valid(i) {
                        let p = img.pixels()[i];
                        let l = luminance_of(p);
                        if best.is_none_or(|(b, _)| l > b) {
                            best = Some((l, p));
                        }
                    }
                }
            }
            best.map(|(_, p)| p).unwrap_or([0.0; 3])
        })
        .collect()
}

/// Samples `img` at continuous pixel coordinates (pixel centers at integers).
/// Returns `None` when no valid pixel supports the position.
pub fn sample(img: &EnvMap, fx: f64, fy: f64, method: InterpMethod) -> Option<Rgb> {
    let (w, h) = (img.width(), img.height());
    let wrap = img.grid().wraps_horizontally();
    match method {
        InterpMethod::Nearest => {
            let x = fold_index(fx.round() as i64, w, wrap);
            let y = fold_index(fy.round() as i64, h, false);
            let i = y * w + x;
            img.is_valid(i).then(|| img.pixels()[i])
        }
        _ => {
            let x0 = fx.floor();
            let y0 = fy.floor();
            let (ax, ay) = (fx - x0, fy - y0);
            let mut acc = [0.0f64; 4];
            for (dy, wy) in [(0i64, 1.0 - ay), (1, ay)] {
                for (dx, wx) in [(0i64, 1.0 - ax), (1, ax)] {
                    let w8 = wx * wy;
                    if w8 <= 0.0 {
                        continue;
                    }
                    let x = fold_index(x0 as i64 + dx, w, wrap);
                    let y = fold_index(y0 as i64 + dy, h, false);
                    let i = y * w + x;
                    if img.is_valid(i) {
                        let p = img.pixels()[i];
                        acc[0] += w8 * p[0] as f64;
                        acc[1] += w8 * p[1] as f64;
                        acc[2] += w8 * p[2] as f64;
                        acc[3] += w8;
                    }
                }
            }
            (acc[3] > 0.0).then(|| {
                [
                    (acc[0] / acc[3]) as f32,
                    (acc[1] / acc[3]) as f32,
                    (acc[2] / acc[3]) as f32,
                ]
            })
        }
    }
}

/// Size of the converted image that keeps the source's angular pixel density.
pub fn default_conversion_width(src: EnvFormat, width: usize, height: usize, target: EnvFormat) -> usize {
    // pixels per radian of polar angle
    let rows_per_halfpi = match src {
        EnvFormat::LatLong => height / 2,
        EnvFormat::SkyLatLong => height,
        EnvFormat::SkyAngular => width / 2,
    };
    match target {
        EnvFormat::LatLong => 4 * rows_per_halfpi,
        EnvFormat::SkyLatLong => 4 * rows_per_halfpi,
        EnvFormat::SkyAngular => 2 * rows_per_halfpi,
    }
    .max(1)
}

/// Inverse-maps every target pixel to a source direction and samples it.
///
/// This is the raw kernel behind [`convert_format`]; it performs no
/// radiometric checks and keeps the source encoding, so it will happily
/// interpolate tonemapped values.
pub fn remap_unchecked(
    img: &EnvMap,
    target: Grid,
    method: InterpMethod,
    rotate_phi: f64,
) -> Result<EnvMap> {
    if method.requires_pow2() {
        return Err(Error::param(format!("{method} is not a point-sampling method")));
    }
    let src = img.grid();
    let results: Vec<Option<Rgb>> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let s = target.pixel_spherical(i % target.width, i / target.width)?;
            let s = Spherical {
                theta: s.theta,
                phi: s.phi - rotate_phi,
            };
            let (fx, fy) = src.locate(s)?;
            sample(img, fx, fy, method)
        })
        .collect();
    let valid: Vec<bool> = results.iter().map(Option::is_some).collect();
    let pixels = results.into_iter().map(|r| r.unwrap_or([0.0; 3])).collect();
    Ok(EnvMap::from_parts(target, pixels, Some(valid), img.encoding()))
}

/// Converts a linear environment map to another format. Conversions on
/// tonemapped images are refused.
pub fn convert_format(
    img: &EnvMap,
    target: EnvFormat,
    target_width: Option<usize>,
    method: InterpMethod,
) -> Result<EnvMap> {
    img.require_linear()?;
    let width = target_width
        .unwrap_or_else(|| default_conversion_width(img.format(), img.width(), img.height(), target));
    let grid = Grid::new(target, width, target.height_for_width(width))?;
    remap_unchecked(img, grid, method, 0.0)
}
