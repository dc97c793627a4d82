//! Per-pair metric reports and the exposure-range sensitivity sweep.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::Table;
use super::{
    clip_exposure, data_range, emd, ev_distance, ii_distance, mae, ms_ssim_with_range, mse, psnr_from_mse,
    ssim_with_range, ClipSpec,
};
use crate::error::{Error, Result};
use crate::format::SolidAngleMap;
use crate::image::{Encoding, EnvMap};
use crate::radiometry::{exposure_value, integrated_illumination};
use crate::tonemap::{self, ToneMapOp, DEFAULT_GAMMA};

/// Space a comparison is evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    /// Tonemapped with the configured LDR operator.
    Ldr,
    /// Gamma 2.2 tonemapped, then clipped to `[0, 1]`.
    Cldr,
    /// Linear radiance.
    Hdr,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Ldr => "ldr",
            Space::Cldr => "cldr",
            Space::Hdr => "hdr",
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Space> {
        match s.to_ascii_lowercase().as_str() {
            "ldr" => Ok(Space::Ldr),
            "cldr" => Ok(Space::Cldr),
            "hdr" => Ok(Space::Hdr),
            _ => Err(Error::param(format!("unknown space '{s}' (ldr, cldr, hdr)"))),
        }
    }
}

/// Converts a linear image into `space`.
pub fn to_space(img: &EnvMap, space: Space, ldr_op: ToneMapOp) -> Result<EnvMap> {
    img.require_linear()?;
    match space {
        Space::Hdr => Ok(img.clone()),
        Space::Ldr => tonemap::apply(ldr_op, img),
        Space::Cldr => {
            let op = ToneMapOp::gamma(DEFAULT_GAMMA);
            let g = tonemap::apply(op, img)?;
            Ok(g.map_pixels(|p| p.map(|v| v.clamp(0.0, 1.0))).with_encoding(Encoding::Compressed(op)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    L2,
    Psnr2,
    Psnr10,
    Ssim,
    MsSsim,
    Emd,
    /// Exposure value of the test image.
    Ev,
    EvDist,
    /// Integrated illumination of the test image.
    Ii,
    IiDist,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::L1,
        Metric::L2,
        Metric::Psnr2,
        Metric::Psnr10,
        Metric::Ssim,
        Metric::MsSsim,
        Metric::Emd,
        Metric::Ev,
        Metric::EvDist,
        Metric::Ii,
        Metric::IiDist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Psnr2 => "psnr2",
            Metric::Psnr10 => "psnr10",
            Metric::Ssim => "ssim",
            Metric::MsSsim => "ms_ssim",
            Metric::Emd => "emd",
            Metric::Ev => "ev",
            Metric::EvDist => "ev_dist",
            Metric::Ii => "ii",
            Metric::IiDist => "ii_dist",
        }
    }

    /// Exposure and illumination are only meaningful on linear radiance.
    pub fn hdr_only(self) -> bool {
        matches!(self, Metric::Ev | Metric::EvDist | Metric::Ii | Metric::IiDist)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::param(format!("unknown metric '{s}'")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_SWEEP_METRICS: [Metric; 6] = [
    Metric::Psnr2,
    Metric::Ssim,
    Metric::Ev,
    Metric::EvDist,
    Metric::Ii,
    Metric::IiDist,
];

/// Metrics of one real/fake pair in one space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub space: Space,
    pub l1: f64,
    pub l2: f64,
    pub psnr_base: f64,
    pub psnr: f64,
    /// `None` when the image is smaller than the SSIM window.
    pub ssim: Option<f64>,
    /// `None` when the image is too small for five scales.
    pub ms_ssim: Option<f64>,
    pub emd: f64,
    pub ev_real: Option<f64>,
    pub ev_fake: Option<f64>,
    pub ii_real: Option<f64>,
    pub ii_fake: Option<f64>,
}

/// Compares two linear images after converting both into `space`.
pub fn evaluate(
    real: &EnvMap,
    fake: &EnvMap,
    space: Space,
    omega: &SolidAngleMap,
    psnr_base: f64,
    ldr_op: ToneMapOp,
) -> Result<MetricReport> {
    let a = to_space(real, space, ldr_op)?;
    let b = to_space(fake, space, ldr_op)?;
    let range = data_range(&a)?;
    let hdr = space == Space::Hdr;
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::InvalidParameter(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let exposure = |img: &EnvMap| -> Result<(f64, f64)> {
        Ok((exposure_value(img)?, integrated_illumination(img, omega, None)?))
    };
    let (ev_real, ii_real, ev_fake, ii_fake) = if hdr {
        let (er, ir) = exposure(&a)?;
        let (ef, iff) = exposure(&b)?;
        (Some(er), Some(ir), Some(ef), Some(iff))
    } else {
        (None, None, None, None)
    };
    let l2 = mse(&a, &b, None)?;
    Ok(MetricReport {
        space,
        l1: mae(&a, &b, None)?,
        l2,
        psnr_base,
        psnr: if range > 0.0 {
            psnr_from_mse(l2, psnr_base, range)?
        } else {
            f64::NAN
        },
        ssim: if range > 0.0 { optional(ssim_with_range(&a, &b, range))? } else { None },
        ms_ssim: if range > 0.0 { optional(ms_ssim_with_range(&a, &b, range))? } else { None },
        emd: emd(&a, &b)?,
        ev_real,
        ev_fake,
        ii_real,
        ii_fake,
    })
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 11] = [
        "l1", "l2", "psnr", "ssim", "ms_ssim", "emd", "ev_real", "ev_fake", "ii_real", "ii_fake", "ev_dist",
    ];

    /// Values in [`MetricReport::COLUMNS`] order; missing entries are NaN.
    pub fn values(&self) -> Vec<f64> {
        let o = |v: Option<f64>| v.unwrap_or(f64::NAN);
        let ev_dist = match (self.ev_real, self.ev_fake) {
            (Some(a), Some(b)) => ev_distance(a, b),
            _ => f64::NAN,
        };
        vec![
            self.l1,
            self.l2,
            self.psnr,
            o(self.ssim),
            o(self.ms_ssim),
            self.emd,
            o(self.ev_real),
            o(self.ev_fake),
            o(self.ii_real),
            o(self.ii_fake),
            ev_dist,
        ]
    }

    /// Column names tagged with the space, e.g. `psnr2_hdr`.
    pub fn column_names(&self) -> Vec<String> {
        Self::COLUMNS
            .iter()
            .map(|c| {
                let c = if *c == "psnr" {
                    format!("psnr{}", super::format_g(self.psnr_base))
                } else {
                    c.to_string()
                };
                format!("{c}_{}", self.space)
            })
            .collect()
    }

    /// Column-wise mean over reports that share a space; infinite PSNR values
    /// make the mean infinite.
    pub fn mean(reports: &[MetricReport]) -> Result<Vec<f64>> {
        let first = reports.first().ok_or(Error::EmptyRegion)?;
        if reports.iter().any(|r| r.space != first.space) {
            return Err(Error::param("cannot average reports from different spaces"));
        }
        let mut acc = vec![0.0; Self::COLUMNS.len()];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        Ok(acc.into_iter().map(|v| v / reports.len() as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Strictly decreasing EV clip thresholds.
    pub thresholds: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub spaces: Vec<Space>,
    pub ldr_op: ToneMapOp,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            thresholds: (9..=15).rev().map(f64::from).collect(),
            metrics: DEFAULT_SWEEP_METRICS.to_vec(),
            spaces: vec![Space::Hdr, Space::Cldr],
            ldr_op: ToneMapOp::mu_law_log2(crate::tonemap::DEFAULT_MU),
        }
    }
}

impl SweepConfig {
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["ev_threshold".to_string()];
        for space in &self.spaces {
            for m in &self.metrics {
                if !m.hdr_only() || *space == Space::Hdr {
                    cols.push(format!("{}_{}", m.name(), space.name()));
                }
            }
        }
        cols
    }
}

struct Reference {
    space: Space,
    img: EnvMap,
    range: f64,
    ev: f64,
    ii: f64,
}

/// Clips `img` at every threshold (equalized back to its own integrated
/// illumination) and scores each result against the original.
pub fn sensitivity_sweep(img: &EnvMap, cfg: &SweepConfig, omega: &SolidAngleMap) -> Result<Table> {
    img.require_linear()?;
    if cfg.thresholds.is_empty() {
        return Err(Error::param("no thresholds given"));
    }
    if cfg.thresholds.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::param("thresholds must be strictly decreasing"));
    }
    let refs = cfg
        .spaces
        .iter()
        .map(|s| {
            let r = to_space(img, *s, cfg.ldr_op)?;
            Ok(Reference {
                space: *s,
                range: data_range(&r)?,
                ev: exposure_value(&r)?,
                ii: integrated_illumination(&r, omega, None)?,
                img: r,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = cfg
        .thresholds
        .par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let spec = ClipSpec {
                ev_threshold: *t,
                equalize_target: Some(img),
            };
            let clipped = clip_exposure(img, spec, omega)?;
            let mut row = vec![*t];
            for r in &refs {
                let test = to_space(&clipped, r.space, cfg.ldr_op)?;
                let l2 = || mse(&r.img, &test, None);
                for m in &cfg.metrics {
                    if m.hdr_only() && r.space != Space::Hdr {
                        continue;
                    }
                    row.push(match m {
                        Metric::L1 => mae(&r.img, &test, None)?,
                        Metric::L2 => l2()?,
                        Metric::Psnr2 => psnr_from_mse(l2()?, 2.0, r.range)?,
                        Metric::Psnr10 => psnr_from_mse(l2()?, 10.0, r.range)?,
                        Metric::Ssim => ssim_with_range(&r.img, &test, r.range)?,
                        Metric::MsSsim => ms_ssim_with_range(&r.img, &test, r.range)?,
                        Metric::Emd => emd(&r.img, &test)?,
                        Metric::Ev => exposure_value(&test)?,
                        Metric::EvDist => ev_distance(r.ev, exposure_value(&test)?),
                        Metric::Ii => integrated_illumination(&test, omega, None)?,
                        Metric::IiDist => ii_distance(r.ii, integrated_illumination(&test, omega, None)?),
                    });
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(cfg.columns());
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{solid_angles, EnvFormat};

    fn sky() -> EnvMap {
        EnvMap::from_fn(EnvFormat::SkyAngular, 64, 64, |x, y| {
            if (31..33).contains(&x) && (31..33).contains(&y) {
                [4096.0; 3]
            } else {
                [0.2 + 0.01 * x as f32, 0.3, 0.5 + 0.005 * y as f32]
            }
        })
        .unwrap()
    }

    #[test]
    fn space_conversion() {
        let img = sky();
        let c = to_space(&img, Space::Cldr, ToneMapOp::Identity).unwrap();
        assert!(c.pixels().iter().all(|p| p.iter().all(|v| (0.0..=1.0).contains(v))));
        assert!(!c.is_linear());
        assert_eq!(to_space(&img, Space::Hdr, ToneMapOp::Identity).unwrap(), img);
        assert!(to_space(&c, Space::Hdr, ToneMapOp::Identity).is_err());
    }

    #[test]
    fn report_identity_values() {
        let img = sky();
        let omega = solid_angles(EnvFormat::SkyAngular, 64, 64).unwrap();
        let r = evaluate(&img, &img, Space::Hdr, &omega, 2.0, ToneMapOp::Identity).unwrap();
        assert_eq!(r.l1, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        assert!((r.ssim.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.ms_ssim.is_none());
        assert_eq!(r.ev_real, r.ev_fake);
        let names = r.column_names();
        assert_eq!(names[2], "psnr2_hdr");
        let l = evaluate(&img, &img, Space::Cldr, &omega, 10.0, ToneMapOp::Identity).unwrap();
        assert!(l.ev_real.is_none());
        assert_eq!(l.column_names()[2], "psnr10_cldr");
        assert!(MetricReport::mean(&[r.clone(), l]).is_err());
        assert_eq!(MetricReport::mean(&[r.clone(), r.clone()]).unwrap()[0], 0.0);
    }

    #[test]
    fn sweep_shape_and_identity_row() {
        let img = sky();
        let omega = solid_angles(EnvFormat::SkyAngular, 64, 64).unwrap();
        let ev = exposure_value(&img).unwrap();
        let cfg = SweepConfig {
            thresholds: vec![ev, 10.0, 8.0, 6.0],
            ..Default::default()
        };
        let t = sensitivity_sweep(&img, &cfg, &omega).unwrap();
        assert_eq!(t.columns.len(), 1 + 6 + 2);
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.column("psnr2_hdr").unwrap()[0], f64::INFINITY);
        assert_eq!(t.column("ev_dist_hdr").unwrap()[0], 0.0);
        let evs = t.column("ev_hdr").unwrap();
        assert!(evs.windows(2).all(|w| w[1] <= w[0]));
        let iid = t.column("ii_dist_hdr").unwrap();
        assert!(iid.iter().all(|d| *d < 1e-6 * iid.len() as f64 + 1e-3));
        let bad = SweepConfig {
            thresholds: vec![8.0, 9.0],
            ..Default::default()
        };
        assert!(sensitivity_sweep(&img, &bad, &omega).is_err());
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("ms-ssim".parse::<Metric>().unwrap(), Metric::MsSsim);
        assert!("lpips".parse::<Metric>().is_err());
    }
}
