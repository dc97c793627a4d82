//! Zenith rotations and mirror flips of SkyAngular images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::EnvFormat;
use crate::image::EnvMap;
use crate::resample::{remap_unchecked, InterpMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    /// Clockwise rotation about the zenith, in degrees.
    pub rotation: f64,
    /// Mirror east and west before rotating.
    pub flip: bool,
}

impl Augmentation {
    /// The eight lossless variants: four quarter turns, with and without a flip.
    pub fn dihedral() -> Vec<Augmentation> {
        let mut out = Vec::with_capacity(8);
        for flip in [false, true] {
            for k in 0..4 {
                out.push(Augmentation {
                    rotation: 90.0 * k as f64,
                    flip,
                });
            }
        }
        out
    }

    pub fn name(&self) -> String {
        format!("rot{}{}", self.rotation, if self.flip { "_flip" } else { "" })
    }
}

fn require_angular(img: &EnvMap) -> Result<()> {
    if img.format() != EnvFormat::SkyAngular {
        return Err(Error::param(format!(
            "augmentation needs a sky-angular image, got {}",
            img.format()
        )));
    }
    Ok(())
}

/// Pixel permutation: `out(x, y) = src(f(x, y))`.
fn permute(img: &EnvMap, f: impl Fn(usize, usize) -> (usize, usize)) -> EnvMap {
    let n = img.width();
    let raw = img.valid_mask_raw();
    let mut pixels = Vec::with_capacity(img.len());
    let mut valid = raw.map(|_| Vec::with_capacity(img.len()));
    for y in 0..n {
        for x in 0..n {
            let (sx, sy) = f(x, y);
            pixels.push(img.pixels()[sy * n + sx]);
            if let (Some(v), Some(r)) = (valid.as_mut(), raw) {
                v.push(r[sy * n + sx]);
            }
        }
    }
    EnvMap::from_parts(img.grid(), pixels, valid, img.encoding())
}

/// Mirror across the north-south axis.
pub fn flip_horizontal(img: &EnvMap) -> Result<EnvMap> {
    require_angular(img)?;
    let n = img.width();
    Ok(permute(img, |x, y| (n - 1 - x, y)))
}

/// Rotates content clockwise by `k` quarter turns; exact.
pub fn rotate_quarter(img: &EnvMap, k: u32) -> Result<EnvMap> {
    require_angular(img)?;
    let n = img.width();
    Ok(match k % 4 {
        0 => img.clone(),
        1 => permute(img, |x, y| (y, n - 1 - x)),
        2 => permute(img, |x, y| (n - 1 - x, n - 1 - y)),
        _ => permute(img, |x, y| (n - 1 - y, x)),
    })
}

/// Clockwise rotation by any angle. Quarter turns are routed through the
/// exact permutation; other angles are resampled with a linear spline.
pub fn rotate(img: &EnvMap, degrees: f64) -> Result<EnvMap> {
    require_angular(img)?;
    let turns = degrees / 90.0;
    if turns == turns.round() && turns.abs() < 1e6 {
        return rotate_quarter(img, (turns as i64).rem_euclid(4) as u32);
    }
    rotate_resampled(img, degrees)
}

/// Resampling path regardless of angle.
pub fn rotate_resampled(img: &EnvMap, degrees: f64) -> Result<EnvMap> {
    require_angular(img)?;
    remap_unchecked(img, img.grid(), InterpMethod::LinearSpline, degrees.to_radians())
}

pub fn augment(img: &EnvMap, ops: &[Augmentation]) -> Result<Vec<EnvMap>> {
    require_angular(img)?;
    ops.iter()
        .map(|op| {
            let base = if op.flip { flip_horizontal(img)? } else { img.clone() };
            rotate(&base, op.rotation)
        })
        .collect()
}
