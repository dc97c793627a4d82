//! Invertible tonemapping operators.
//!
//! All operators are evaluated in `f64` and applied per channel. Every variant
//! is a strict monotone bijection on `[0, ∞)` onto its range, so the inverse is
//! exact up to floating-point rounding.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{EnvMap, Encoding};

pub const DEFAULT_MU: f64 = 5000.0;
pub const DEFAULT_GAMMA: f64 = 2.2;
pub const INVERTED_OFFSET: f64 = 0.01;

/// Relative slack on the inverse domain bounds; absorbs `f32` storage rounding.
const DOMAIN_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum ToneMapOp {
    /// `I^(1/γ)`
    Gamma { gamma: f64 },
    /// `log_n(I + 1)`
    LogN { base: f64 },
    /// `ln(1 + μI) / ln(1 + μ)`
    MuLaw { mu: f64 },
    /// `log2(μ-law(I) + 1)`
    MuLawLog2 { mu: f64 },
    /// `(ln(I + ε) + β)·α`
    NaturalLog { alpha: f64, beta: f64, epsilon: f64 },
    /// `1 / (1 + I + offset)`, strictly decreasing.
    Inverted { offset: f64 },
    Identity,
}

impl ToneMapOp {
    pub fn gamma(gamma: f64) -> ToneMapOp {
        ToneMapOp::Gamma { gamma }
    }

    pub fn mu_law_log2(mu: f64) -> ToneMapOp {
        ToneMapOp::MuLawLog2 { mu }
    }

    /// Natural-log operator with the constants used for clear-sky GAN training.
    pub fn natural_log_default() -> ToneMapOp {
        ToneMapOp::NaturalLog {
            alpha: 0.22,
            beta: 2.5,
            epsilon: 1e-3,
        }
    }

    pub fn inverted() -> ToneMapOp {
        ToneMapOp::Inverted {
            offset: INVERTED_OFFSET,
        }
    }

    /// One representative of every variant with default parameters.
    pub fn catalogue() -> Vec<ToneMapOp> {
        vec![
            ToneMapOp::Gamma { gamma: DEFAULT_GAMMA },
            ToneMapOp::LogN { base: 2.0 },
            ToneMapOp::MuLaw { mu: DEFAULT_MU },
            ToneMapOp::MuLawLog2 { mu: DEFAULT_MU },
            ToneMapOp::natural_log_default(),
            ToneMapOp::inverted(),
            ToneMapOp::Identity,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ToneMapOp::Gamma { gamma } => gamma > 0.0 && gamma.is_finite(),
            ToneMapOp::LogN { base } => base > 1.0 && base.is_finite(),
            ToneMapOp::MuLaw { mu } | ToneMapOp::MuLawLog2 { mu } => mu > 0.0 && mu.is_finite(),
            ToneMapOp::NaturalLog { alpha, beta, epsilon } => {
                alpha > 0.0 && alpha.is_finite() && beta.is_finite() && epsilon > 0.0 && epsilon.is_finite()
            }
            ToneMapOp::Inverted { offset } => offset > -1.0 && offset.is_finite(),
            ToneMapOp::Identity => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid tonemap parameters: {self}")))
        }
    }

    /// Decreasing operators map larger radiance to smaller codes.
    pub fn is_increasing(&self) -> bool {
        !matches!(self, ToneMapOp::Inverted { .. })
    }

    /// Concave and increasing on `[0, ∞)`.
    pub fn is_concave(&self) -> bool {
        match *self {
            ToneMapOp::Gamma { gamma } => gamma >= 1.0,
            ToneMapOp::Inverted { .. } => false,
            _ => true,
        }
    }

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        match *self {
            ToneMapOp::Gamma { gamma } => x.powf(1.0 / gamma),
            ToneMapOp::LogN { base } => x.ln_1p() / base.ln(),
            ToneMapOp::MuLaw { mu } => mu_law(x, mu),
            ToneMapOp::MuLawLog2 { mu } => mu_law(x, mu).ln_1p() / std::f64::consts::LN_2,
            ToneMapOp::NaturalLog { alpha, beta, epsilon } => ((x + epsilon).ln() + beta) * alpha,
            ToneMapOp::Inverted { offset } => 1.0 / (1.0 + x + offset),
            ToneMapOp::Identity => x,
        }
    }

    /// Range of the operator over `[0, ∞)` as `(lo, hi)`.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            ToneMapOp::Inverted { offset } => (0.0, 1.0 / (1.0 + offset)),
            _ => (self.forward(0.0), f64::INFINITY),
        }
    }

    /// Exact inverse; `None` outside the operator's range.
    #[inline]
    pub fn inverse(&self, y: f64) -> Option<f64> {
        if !y.is_finite() {
            return None;
        }
        let (lo, hi) = self.range();
        let slack = DOMAIN_SLACK * lo.abs().max(hi.abs().min(1.0)).max(f64::MIN_POSITIVE);
        let x = match *self {
            ToneMapOp::Inverted { offset } => {
                if y <= lo || y > hi + slack {
                    return None;
                }
                1.0 / y - (1.0 + offset)
            }
            _ => {
                if y < lo - slack {
                    return None;
                }
                self.inverse_unchecked(y.max(lo))
            }
        };
        Some(x.max(0.0))
    }

    #[inline]
    fn inverse_unchecked(&self, y: f64) -> f64 {
        match *self {
            ToneMapOp::Gamma { gamma } => y.powf(gamma),
            ToneMapOp::LogN { base } => (y * base.ln()).exp_m1(),
            ToneMapOp::MuLaw { mu } => mu_law_inv(y, mu),
            ToneMapOp::MuLawLog2 { mu } => mu_law_inv((y * std::f64::consts::LN_2).exp_m1(), mu),
            ToneMapOp::NaturalLog { alpha, beta, epsilon } => (y / alpha - beta).exp() - epsilon,
            ToneMapOp::Inverted { offset } => 1.0 / y - (1.0 + offset),
            ToneMapOp::Identity => y,
        }
    }
}

#[inline]
fn mu_law(x: f64, mu: f64) -> f64 {
    (mu * x).ln_1p() / mu.ln_1p()
}

#[inline]
fn mu_law_inv(y: f64, mu: f64) -> f64 {
    (y * mu.ln_1p()).exp_m1() / mu
}

impl fmt::Display for ToneMapOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ToneMapOp::Gamma { gamma } => write!(f, "gamma:{gamma}"),
            ToneMapOp::LogN { base } => write!(f, "log:{base}"),
            ToneMapOp::MuLaw { mu } => write!(f, "mulaw:{mu}"),
            ToneMapOp::MuLawLog2 { mu } => write!(f, "mulawlog2:{mu}"),
            ToneMapOp::NaturalLog { alpha, beta, epsilon } => {
                write!(f, "naturallog:{alpha}:{beta}:{epsilon}")
            }
            ToneMapOp::Inverted { offset } => write!(f, "inverted:{offset}"),
            ToneMapOp::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for ToneMapOp {
    type Err = Error;

    /// Parses `name[:p1[:p2...]]`, e.g. `gamma:2.2`, `mulawlog2`, `naturallog:0.22:2.5:0.001`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default().to_ascii_lowercase().replace(['-', '_'], "");
        let params = parts
            .map(|p| p.parse::<f64>().map_err(|_| Error::param(format!("bad tonemap parameter '{p}'"))))
            .collect::<Result<Vec<_>>>()?;
        let get = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let op = match name.as_str() {
            "gamma" => ToneMapOp::Gamma {
                gamma: get(0, DEFAULT_GAMMA),
            },
            "log" | "logn" => ToneMapOp::LogN { base: get(0, 2.0) },
            "mulaw" => ToneMapOp::MuLaw { mu: get(0, DEFAULT_MU) },
            "mulawlog2" => ToneMapOp::MuLawLog2 { mu: get(0, DEFAULT_MU) },
            "naturallog" | "loge" => ToneMapOp::NaturalLog {
                alpha: get(0, 0.22),
                beta: get(1, 2.5),
                epsilon: get(2, 1e-3),
            },
            "inverted" => ToneMapOp::Inverted {
                offset: get(0, INVERTED_OFFSET),
            },
            "identity" | "linear" => ToneMapOp::Identity,
            other => return Err(Error::param(format!("unknown tonemap operator '{other}'"))),
        };
        op.validate()?;
        Ok(op)
    }
}

/// Tonemaps a linear image. Pixels outside the sky region are written as 0.
pub fn apply(op: ToneMapOp, img: &EnvMap) -> Result<EnvMap> {
    op.validate()?;
    img.require_linear()?;
    let pixels = img
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if img.is_valid(i) {
                p.map(|v| op.forward(v as f64) as f32)
            } else {
                [0.0; 3]
            }
        })
        .collect();
    Ok(EnvMap::from_parts(
        img.grid(),
        pixels,
        img.valid_mask_raw().map(<[bool]>::to_vec),
        Encoding::Compressed(op),
    ))
}

/// Recovers linear radiance from an image tonemapped with `op`.
pub fn invert(op: ToneMapOp, img: &EnvMap) -> Result<EnvMap> {
    op.validate()?;
    match img.encoding() {
        Encoding::Linear => return Err(Error::LinearInput),
        Encoding::Compressed(tag) if tag != op => {
            return Err(Error::param(format!("image was tonemapped with {tag}, not {op}")));
        }
        Encoding::Compressed(_) => {}
    }
    let width = img.width();
    let pixels = img
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !img.is_valid(i) {
                return Ok([0.0; 3]);
            }
            let mut out = [0.0f32; 3];
            for (o, v) in out.iter_mut().zip(p) {
                *o = op.inverse(*v as f64).ok_or_else(|| Error::OutOfRange {
                    op: op.to_string(),
                    x: i % width,
                    y: i / width,
                    value: *v as f64,
                })? as f32;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnvMap::from_parts(
        img.grid(),
        pixels,
        img.valid_mask_raw().map(<[bool]>::to_vec),
        Encoding::Linear,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub intensity: f64,
    /// Uncompressed-space error produced by a compressed-space error `δ`.
    pub delta: f64,
    /// `T(I) - δ` left the invertible range; `delta` is then `I` for
    /// increasing operators (the error swallows the whole value) and `+∞`
    /// for the inverted operator.
    pub saturated: bool,
}

/// `Δ(I) = |I - T⁻¹(T(I) - δ)|` for each intensity.
pub fn nonlinearity_profile(op: ToneMapOp, delta: f64, intensities: &[f64]) -> Result<Vec<ProfilePoint>> {
    op.validate()?;
    if !(delta > 0.0) {
        return Err(Error::param("profile delta must be positive"));
    }
    let (lo, _) = op.range();
    Ok(intensities
        .iter()
        .map(|&i| {
            let shifted = op.forward(i) - delta;
            let inside = if op.is_increasing() { shifted >= lo } else { shifted > lo };
            match inside.then(|| op.inverse(shifted)).flatten() {
                Some(back) => ProfilePoint {
                    intensity: i,
                    delta: (i - back).abs(),
                    saturated: false,
                },
                None => ProfilePoint {
                    intensity: i,
                    delta: if op.is_increasing() { i } else { f64::INFINITY },
                    saturated: true,
                },
            }
        })
        .collect())
}

/// Affine shift of `[0, 1]` codes to `[-1, 1]`. Never clips.
pub fn shift_to_signed(img: &EnvMap) -> EnvMap {
    img.map_pixels(|p| p.map(|v| 2.0 * v - 1.0))
}

pub fn shift_from_signed(img: &EnvMap) -> EnvMap {
    img.map_pixels(|p| p.map(|v| (v + 1.0) * 0.5))
}

/// `n` log-spaced samples between `lo` and `hi` (both > 0), inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if n == 1 {
                lo
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::EnvFormat;

    #[test]
    fn fixed_points() {
        assert_eq!(ToneMapOp::gamma(2.2).forward(1.0), 1.0);
        assert_eq!(ToneMapOp::gamma(2.2).inverse(1.0), Some(1.0));
        for mu in [1.0, 255.0, 5000.0, 1e6] {
            let op = ToneMapOp::mu_law_log2(mu);
            assert_eq!(op.forward(0.0), 0.0);
            assert!((op.forward(1.0) - 1.0).abs() < 1e-15);
            assert!((ToneMapOp::MuLaw { mu }.forward(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn natural_log_at_unity() {
        // (ln(1.001) + 2.5) * 0.22, evaluated independently
        let expected = (1.001f64.ln() + 2.5) * 0.22;
        let got = ToneMapOp::natural_log_default().forward(1.0);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.55022).abs() < 1e-5);
    }

    #[test]
    fn inverted_endpoints() {
        let op = ToneMapOp::inverted();
        assert!((op.forward(0.0) - 1.0 / 1.01).abs() < 1e-16);
        let back = op.inverse(1.0 / 1.01).unwrap();
        assert!(back.abs() < 1e-15, "{back}");
        assert_eq!(op.inverse(0.0), None);
        assert_eq!(op.inverse(-0.5), None);
        assert_eq!(op.inverse(1.5), None);
    }

    #[test]
    fn increasing_ops_reject_values_below_range() {
        assert_eq!(ToneMapOp::gamma(2.2).inverse(-0.1), None);
        assert_eq!(ToneMapOp::natural_log_default().inverse(-5.0), None);
        assert_eq!(ToneMapOp::Identity.inverse(f64::NAN), None);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for op in ToneMapOp::catalogue() {
            let parsed: ToneMapOp = op.to_string().parse().unwrap();
            assert_eq!(parsed, op);
        }
        assert_eq!("mulawlog2".parse::<ToneMapOp>().unwrap(), ToneMapOp::mu_law_log2(DEFAULT_MU));
        assert!("gamma:-1".parse::<ToneMapOp>().is_err());
        assert!("log:1".parse::<ToneMapOp>().is_err());
        assert!("bogus".parse::<ToneMapOp>().is_err());
    }

    #[test]
    fn profile_identity_is_flat() {
        let pts = nonlinearity_profile(ToneMapOp::Identity, 0.01, &[0.5, 1.0, 100.0]).unwrap();
        for p in pts {
            assert!((p.delta - 0.01).abs() < 1e-12);
            assert!(!p.saturated);
        }
    }

    #[test]
    fn profile_saturation() {
        let pts = nonlinearity_profile(ToneMapOp::gamma(2.2), 0.5, &[0.001]).unwrap();
        assert!(pts[0].saturated);
        assert_eq!(pts[0].delta, 0.001);
        let pts = nonlinearity_profile(ToneMapOp::inverted(), 0.01, &[1000.0]).unwrap();
        assert!(pts[0].saturated);
        assert!(pts[0].delta.is_infinite());
        assert!(nonlinearity_profile(ToneMapOp::Identity, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn mulawlog2_profile_ratio() {
        let op = ToneMapOp::mu_law_log2(DEFAULT_MU);
        let pts = nonlinearity_profile(op, 0.01, &[1.0, 32768.0]).unwrap();
        assert!(pts[1].delta / pts[0].delta > 1e3);
    }

    #[test]
    fn image_round_trip_and_tags() {
        let img = EnvMap::from_fn(EnvFormat::LatLong, 16, 8, |x, y| {
            [(x * y) as f32, x as f32 * 0.01, 1000.0 * y as f32]
        })
        .unwrap();
        for op in ToneMapOp::catalogue() {
            let c = apply(op, &img).unwrap();
            assert_eq!(c.encoding(), Encoding::Compressed(op));
            assert!(apply(op, &c).is_err());
            let back = invert(op, &c).unwrap();
            for (a, b) in img.pixels().iter().zip(back.pixels()) {
                for k in 0..3 {
                    let (a, b) = (a[k] as f64, b[k] as f64);
                    assert!((a - b).abs() <= 1e-4 * a.max(1e-3), "{op}: {a} vs {b}");
                }
            }
        }
        assert!(matches!(invert(ToneMapOp::Identity, &img), Err(Error::LinearInput)));
        let c = apply(ToneMapOp::gamma(2.2), &img).unwrap();
        assert!(invert(ToneMapOp::gamma(2.4), &c).is_err());
    }

    #[test]
    fn invert_reports_offending_pixel() {
        let mut px = vec![[0.5f32; 3]; 8];
        px[5] = [0.5, -3.0, 0.5];
        let c = EnvMap::compressed(EnvFormat::LatLong, 4, 2, px, ToneMapOp::inverted()).unwrap();
        match invert(ToneMapOp::inverted(), &c) {
            Err(Error::OutOfRange { x, y, .. }) => assert_eq!((x, y), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn signed_shift_is_affine_without_clipping() {
        let img = EnvMap::compressed(EnvFormat::LatLong, 2, 1, vec![[0.0, 0.5, 1.0], [3.0, 0.25, 0.0]], ToneMapOp::Identity).unwrap();
        let s = shift_to_signed(&img);
        assert_eq!(s.pixel(0, 0), [-1.0, 0.0, 1.0]);
        assert_eq!(s.pixel(1, 0), [5.0, -0.5, -1.0]);
        assert_eq!(shift_from_signed(&s), img);
    }
}
