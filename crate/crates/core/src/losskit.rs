//! Loss kernels for external trainers and the EDR-to-FDR parametric boost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{EnvMap, Mask, Rgb};
use crate::metrics;
use crate::radiometry::BT709;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossBase {
    L1,
    L2,
}

/// `base` restricted to the pixels set in `mask`. An empty selection is an
/// error so that degenerate classes (e.g. a sunless frame) are not silently
/// scored as zero.
pub fn selective_loss(base: LossBase, real: &EnvMap, fake: &EnvMap, mask: &Mask) -> Result<f64> {
    match base {
        LossBase::L1 => metrics::mae(real, fake, Some(mask)),
        LossBase::L2 => metrics::mse(real, fake, Some(mask)),
    }
}

fn nonempty(preds: &[f64], what: &str) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::param(format!("{what} batch is empty")));
    }
    Ok(())
}

fn mean_relu(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.map(|v| v.max(0.0)).sum::<f64>() / n as f64
}

/// Generator hinge: `mean(relu(δ − p))`.
pub fn hinge_g(preds: &[f64], delta: f64) -> Result<f64> {
    nonempty(preds, "prediction")?;
    Ok(mean_relu(preds.iter().map(|p| delta - p), preds.len()))
}

/// Discriminator hinge: `(mean(relu(δ − p_real)) + mean(relu(δ + p_fake))) / 2`.
pub fn hinge_d(real: &[f64], fake: &[f64], delta: f64) -> Result<f64> {
    nonempty(real, "real prediction")?;
    nonempty(fake, "fake prediction")?;
    let r = mean_relu(real.iter().map(|p| delta - p), real.len());
    let f = mean_relu(fake.iter().map(|p| delta + p), fake.len());
    Ok((r + f) / 2.0)
}

/// `mean(d²) − mean(d)²` with `d = ln x − ln y`.
pub fn scale_invariant_loss(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} values", x.len(), y.len())));
    }
    nonempty(x, "value")?;
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if !(*a > 0.0 && *b > 0.0) {
            return Err(Error::param(format!("non-positive value at index {i}: ({a}, {b})")));
        }
        let d = a.ln() - b.ln();
        s1 += d;
        s2 += d * d;
    }
    let n = x.len() as f64;
    let m = s1 / n;
    Ok((s2 / n - m * m).max(0.0))
}

/// Scale-invariant loss over the channels of jointly valid pixels.
pub fn scale_invariant_loss_images(x: &EnvMap, y: &EnvMap) -> Result<f64> {
    x.same_shape(y)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..x.len() {
        if x.is_valid(i) && y.is_valid(i) {
            a.extend(x.pixels()[i].iter().map(|v| *v as f64));
            b.extend(y.pixels()[i].iter().map(|v| *v as f64));
        }
    }
    scale_invariant_loss(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rho: f64,
    pub theta: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Replaces the batch maximum of per-image means when set.
    pub max_mean_override: Option<f64>,
}

impl BoostParams {
    /// Constants used for HDR-to-FDR boosting of Text2Light output.
    pub const PAPER: BoostParams = BoostParams {
        rho: 4.0,
        theta: 0.83,
        gamma: 1.0,
        beta: 0.7,
        max_mean_override: None,
    };

    /// Constants for boosting raw LDR output scaled to `[-8, 8]`.
    pub const APPENDIX: BoostParams = BoostParams {
        rho: 8.0,
        theta: 0.83,
        gamma: 0.5,
        beta: 0.2,
        max_mean_override: Some(8.0),
    };

    pub fn preset(name: &str) -> Result<BoostParams> {
        match name {
            "paper" => Ok(Self::PAPER),
            "appendix" => Ok(Self::APPENDIX),
            _ => Err(Error::param(format!("unknown boost preset '{name}' (paper, appendix)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::param(format!("theta {} outside [0, 1]", self.theta)));
        }
        for (name, v) in [("rho", self.rho), ("gamma", self.gamma), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(Error::param(format!("{name} must be finite")));
            }
        }
        if let Some(m) = self.max_mean_override {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::param("max mean override must be positive"));
            }
        }
        Ok(())
    }
}

/// Float image for the boost, which accepts signed input.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostImage {
    pub pixels: Vec<[f64; 3]>,
    /// Pixels marked false are excluded from means and written as zero.
    pub valid: Option<Vec<bool>>,
}

impl BoostImage {
    pub fn from_env(img: &EnvMap) -> BoostImage {
        BoostImage {
            pixels: img.pixels().iter().map(|p| p.map(|v| v as f64)).collect(),
            valid: Some(img.valid_mask().bits),
        }
    }

    pub fn from_rgb(pixels: &[Rgb]) -> BoostImage {
        BoostImage {
            pixels: pixels.iter().map(|p| p.map(|v| v as f64)).collect(),
            valid: None,
        }
    }

    fn is_valid(&self, i: usize) -> bool {
        self.valid.as_ref().is_none_or(|v| v[i])
    }

    /// Mean luminance over valid pixels.
    pub fn mean_luminance(&self) -> Result<f64> {
        let (mut sum, mut n) = (0.0f64, 0usize);
        for (i, p) in self.pixels.iter().enumerate() {
            if self.is_valid(i) {
                sum += BT709[0] * p[0] + BT709[1] * p[1] + BT709[2] * p[2];
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptyRegion);
        }
        Ok(sum / n as f64)
    }
}

/// Per-image boost weights `M = clip((mean / max_mean) − ϑ, 0, 1)`.
pub fn boost_weights(means: &[f64], params: &BoostParams) -> Result<Vec<f64>> {
    params.validate()?;
    if means.is_empty() {
        return Err(Error::param("boost batch is empty"));
    }
    if let Some(m) = means.iter().find(|m| !m.is_finite()) {
        return Err(Error::param(format!("non-finite image mean {m}")));
    }
    let max = match params.max_mean_override {
        Some(m) => m,
        None => means.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };
    if !(max > 0.0) {
        return Err(Error::param(format!("maximum image mean {max} must be positive")));
    }
    Ok(means.iter().map(|m| (m / max - params.theta).clamp(0.0, 1.0)).collect())
}

/// `I' = I + I·M·ρ`, then `I'' = exp((I' − mean(I'))·γ − β)` per channel,
/// where the means are luminance means over valid pixels.
pub fn parametric_boost(batch: &[BoostImage], params: &BoostParams) -> Result<Vec<BoostImage>> {
    let means = batch.iter().map(BoostImage::mean_luminance).collect::<Result<Vec<_>>>()?;
    let weights = boost_weights(&means, params)?;
    batch
        .iter()
        .zip(weights)
        .map(|(img, m)| {
            let gain = 1.0 + m * params.rho;
            let lifted = BoostImage {
                pixels: img.pixels.iter().map(|p| p.map(|v| v * gain)).collect(),
                valid: img.valid.clone(),
            };
            let mean = lifted.mean_luminance()?;
            let pixels = lifted
                .pixels
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if img.is_valid(i) {
                        p.map(|v| ((v - mean) * params.gamma - params.beta).exp())
                    } else {
                        [0.0; 3]
                    }
                })
                .collect();
            Ok(BoostImage {
                pixels,
                valid: img.valid.clone(),
            })
        })
        .collect()
}

/// Boosts linear environment maps; see [`parametric_boost`].
pub fn boost_env_maps(batch: &[EnvMap], params: &BoostParams) -> Result<Vec<EnvMap>> {
    let inputs: Vec<BoostImage> = batch.iter().map(BoostImage::from_env).collect();
    let out = parametric_boost(&inputs, params)?;
    batch
        .iter()
        .zip(out)
        .map(|(src, b)| {
            let pixels = b.pixels.iter().map(|p| p.map(|v| v as f32)).collect();
            let img = EnvMap::new(src.format(), src.width(), src.height(), pixels)?;
            match src.valid_mask_raw() {
                Some(_) => img.with_valid_mask(src.valid_mask()),
                None => Ok(img),
            }
        })
        .collect()
}
