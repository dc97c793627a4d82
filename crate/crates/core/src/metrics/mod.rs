//! Comparison metrics, exposure clipping and exposure matching.

mod report;
mod ssim;
pub mod table;

use crate::error::{Error, Result};
use crate::format::SolidAngleMap;
use crate::image::{EnvMap, Mask};
use crate::radiometry::{integrated_illumination, luminance_of, luminance_range};

pub use report::{
    evaluate, sensitivity_sweep, to_space, Metric, MetricReport, Space, SweepConfig, DEFAULT_SWEEP_METRICS,
};
pub use ssim::{ms_ssim_with_range, ssim_with_range, MS_SSIM_WEIGHTS};
pub use table::{format_g, Table};

/// Pixels valid in both images and in `mask`, if given.
fn joint_mask(a: &EnvMap, b: &EnvMap, mask: Option<&Mask>) -> Result<Vec<bool>> {
    a.same_shape(b)?;
    if let Some(m) = mask {
        if m.width != a.width() || m.height != a.height() {
            return Err(Error::DimensionMismatch("metric mask".into()));
        }
    }
    let bits: Vec<bool> = (0..a.len())
        .map(|i| a.is_valid(i) && b.is_valid(i) && mask.is_none_or(|m| m.bits[i]))
        .collect();
    if !bits.iter().any(|b| *b) {
        return Err(Error::EmptyMask);
    }
    Ok(bits)
}

fn masked_mean(a: &EnvMap, b: &EnvMap, mask: Option<&Mask>, f: impl Fn(f64) -> f64) -> Result<f64> {
    let bits = joint_mask(a, b, mask)?;
    let (mut sum, mut n) = (0.0f64, 0usize);
    for (i, keep) in bits.iter().enumerate() {
        if *keep {
            let (p, q) = (a.pixels()[i], b.pixels()[i]);
            for c in 0..3 {
                sum += f(p[c] as f64 - q[c] as f64);
            }
            n += 3;
        }
    }
    Ok(sum / n as f64)
}

/// Mean absolute difference over channels of jointly valid pixels.
pub fn mae(a: &EnvMap, b: &EnvMap, mask: Option<&Mask>) -> Result<f64> {
    masked_mean(a, b, mask, f64::abs)
}

/// Mean squared difference over channels of jointly valid pixels.
pub fn mse(a: &EnvMap, b: &EnvMap, mask: Option<&Mask>) -> Result<f64> {
    masked_mean(a, b, mask, |d| d * d)
}

/// `max − min` over the channel values of valid pixels.
pub fn data_range(img: &EnvMap) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, p) in img.pixels().iter().enumerate() {
        if img.is_valid(i) {
            for v in p {
                lo = lo.min(*v as f64);
                hi = hi.max(*v as f64);
            }
        }
    }
    if lo.is_finite() {
        Ok(hi - lo)
    } else {
        Err(Error::EmptyRegion)
    }
}

/// `10 · log_base(R² / mse)`; `+∞` when the error is zero.
pub fn psnr_from_mse(mse: f64, base: f64, data_range: f64) -> Result<f64> {
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(Error::param(format!("data range must be positive, got {data_range}")));
    }
    if !(base > 0.0 && base != 1.0 && base.is_finite()) {
        return Err(Error::param(format!("invalid logarithm base {base}")));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).ln() / base.ln())
}

/// PSNR of `b` against reference `a`. The data range defaults to the
/// reference's `max − min`.
pub fn psnr(a: &EnvMap, b: &EnvMap, base: f64, data_range_override: Option<f64>) -> Result<f64> {
    let r = match data_range_override {
        Some(r) => r,
        None => data_range(a)?,
    };
    psnr_from_mse(mse(a, b, None)?, base, r)
}

/// SSIM with constants from the reference's data range.
pub fn ssim(a: &EnvMap, b: &EnvMap) -> Result<f64> {
    ssim_with_range(a, b, data_range(a)?)
}

pub fn ms_ssim(a: &EnvMap, b: &EnvMap) -> Result<f64> {
    ms_ssim_with_range(a, b, data_range(a)?)
}

/// Wasserstein-1 distance between the luminance distributions of jointly
/// valid pixels.
pub fn emd(a: &EnvMap, b: &EnvMap) -> Result<f64> {
    let bits = joint_mask(a, b, None)?;
    let pick = |img: &EnvMap| {
        let mut v: Vec<f64> = bits
            .iter()
            .zip(img.pixels())
            .filter(|(k, _)| **k)
            .map(|(_, p)| luminance_of(*p))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (sa, sb) = (pick(a), pick(b));
    Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64)
}

/// Distance between exposure values measured in linear intensity.
pub fn ev_distance(ev_a: f64, ev_b: f64) -> f64 {
    (ev_a.exp2() - ev_b.exp2()).abs()
}

pub fn ii_distance(ii_a: f64, ii_b: f64) -> f64 {
    (ii_a - ii_b).abs()
}

#[derive(Debug, Clone, Copy)]
pub struct ClipSpec<'a> {
    /// Exposure range kept, in f-stops above the image's minimum luminance.
    pub ev_threshold: f64,
    /// Rescale the clipped image so its integrated illumination matches this one.
    pub equalize_target: Option<&'a EnvMap>,
}

impl ClipSpec<'_> {
    pub fn new(ev_threshold: f64) -> ClipSpec<'static> {
        ClipSpec {
            ev_threshold,
            equalize_target: None,
        }
    }
}

/// Luminance level at which a clip at `ev` f-stops saturates.
pub fn clip_level(min_luminance: f64, ev: f64) -> f64 {
    min_luminance + ev.exp2() - 1.0
}

/// Scales every pixel brighter than the clip level down to it, keeping
/// chromaticity, then optionally equalizes integrated illumination.
pub fn clip_exposure(img: &EnvMap, spec: ClipSpec<'_>, omega: &SolidAngleMap) -> Result<EnvMap> {
    img.require_linear()?;
    if !(spec.ev_threshold >= 0.0) {
        return Err(Error::param(format!("EV threshold must be >= 0, got {}", spec.ev_threshold)));
    }
    let (lo, _) = luminance_range(img)?;
    let level = clip_level(lo, spec.ev_threshold);
    let clipped = img.map_pixels(|p| {
        let y = luminance_of(p);
        if y > level {
            let k = level / y;
            p.map(|v| (v as f64 * k) as f32)
        } else {
            p
        }
    });
    let Some(target) = spec.equalize_target else {
        return Ok(clipped);
    };
    let want = integrated_illumination(target, omega, None)?;
    let have = integrated_illumination(&clipped, omega, None)?;
    if !(have > 0.0) {
        return Err(Error::param("cannot equalize an image with zero illumination"));
    }
    Ok(clipped.scaled(want / have))
}

/// Mean luminance over valid pixels.
pub fn mean_luminance(img: &EnvMap) -> Result<f64> {
    let (mut sum, mut n) = (0.0f64, 0usize);
    for (i, p) in img.pixels().iter().enumerate() {
        if img.is_valid(i) {
            sum += luminance_of(*p);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(sum / n as f64)
}

/// Rescales `fake` so its mean luminance matches `real`'s; returns the factor.
pub fn match_exposure(real: &EnvMap, fake: &EnvMap) -> Result<(f64, EnvMap)> {
    real.require_linear()?;
    fake.require_linear()?;
    let m_fake = mean_luminance(fake)?;
    if !(m_fake > 0.0 && m_fake.is_finite()) {
        return Err(Error::param("fake image has no positive mean luminance"));
    }
    let alpha = mean_luminance(real)? / m_fake;
    Ok((alpha, fake.scaled(alpha)))
}
