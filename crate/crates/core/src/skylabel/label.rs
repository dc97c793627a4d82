//! Cloud segmentation, mask compositing and label synthesis.

use serde::{Deserialize, Serialize};

use super::morphology::{close3, distance_field, erode_disk, open3};
use super::perlin::{modulation, PerlinConfig};
use super::solar::{snap_to_centroid, sun_mask, SunPosition};
use crate::error::{Error, Result};
use crate::format::{Grid, SolidAngleMap};
use crate::image::{Encoding, EnvMap, GrayImage, Mask, Rgb};
use crate::tonemap::{self, ToneMapOp, DEFAULT_MU};

pub const DEFAULT_THRESHOLD: f64 = 0.30;
pub const DEFAULT_SUN_DIAMETER: f64 = 5.0;
/// Brush diameter that turns a crude mask into a sketch-like one.
pub const HAND_DRAWN_KERNEL: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    /// Circular brush diameter in pixels (odd, 1 leaves the crude mask as is).
    pub kernel: u32,
    /// Pixels with ratio below this become cloud candidates.
    pub threshold: f64,
    /// Sun mask diameter in degrees.
    pub sun_diameter: f64,
    /// μ of the μ-law log₂ curve applied before thresholding.
    pub mu: f64,
    /// Snap the ephemeris sun to the image centroid within this many degrees.
    pub snap_degrees: Option<f64>,
    pub perlin: PerlinConfig,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            kernel: 1,
            threshold: DEFAULT_THRESHOLD,
            sun_diameter: DEFAULT_SUN_DIAMETER,
            mu: DEFAULT_MU,
            snap_degrees: None,
            perlin: PerlinConfig::default(),
        }
    }
}

impl LabelConfig {
    pub fn hand_drawn() -> LabelConfig {
        LabelConfig {
            kernel: HAND_DRAWN_KERNEL,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::param(format!("kernel must be odd and >= 1, got {}", self.kernel)));
        }
        if !(self.threshold > -1.0 && self.threshold < 1.0) {
            return Err(Error::param(format!("threshold {} outside (-1, 1)", self.threshold)));
        }
        if !(self.sun_diameter > 0.0 && self.sun_diameter.is_finite()) {
            return Err(Error::param("sun diameter must be positive"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param("mu must be positive"));
        }
        if let Some(s) = self.snap_degrees {
            if !(s > 0.0 && s <= 10.0) {
                return Err(Error::param("snap radius must be in (0, 10] degrees"));
            }
        }
        self.perlin.validate()
    }
}

/// Blue/red ratio `(B − R) / (B + R)`, 0 where `B + R = 0` and on invalid pixels.
pub fn cloud_ratio(img: &EnvMap) -> GrayImage {
    if !matches!(img.encoding(), Encoding::Compressed(ToneMapOp::MuLawLog2 { .. })) {
        log::warn!("cloud ratio expects a mu-law log2 image, got {:?}", img.encoding());
    }
    let mut out = GrayImage::zeros(img.width(), img.height());
    for (i, p) in img.pixels().iter().enumerate() {
        if !img.is_valid(i) {
            continue;
        }
        let (r, b) = (p[0] as f64, p[2] as f64);
        let s = b + r;
        if s != 0.0 {
            out.data[i] = ((b - r) / s).clamp(-1.0, 1.0);
        }
    }
    out
}

/// Thresholded candidates after one 3×3 open and one 3×3 close.
pub fn crude_cloud_mask(ratio: &GrayImage, threshold: f64, sky_valid: &Mask) -> Result<Mask> {
    if ratio.width != sky_valid.width || ratio.height != sky_valid.height {
        return Err(Error::DimensionMismatch("ratio raster vs sky mask".into()));
    }
    let cand = Mask::new(
        ratio.width,
        ratio.height,
        ratio
            .data
            .iter()
            .zip(&sky_valid.bits)
            .map(|(y, v)| *v && *y < threshold)
            .collect(),
    )?;
    Ok(close3(&open3(&cand)).and(sky_valid))
}

pub fn cloud_mask(ratio: &GrayImage, cfg: &LabelConfig, sky_valid: &Mask) -> Result<Mask> {
    cfg.validate()?;
    let crude = crude_cloud_mask(ratio, cfg.threshold, sky_valid)?;
    Ok(erode_disk(&crude, cfg.kernel))
}

/// Mutually exclusive region masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMaps {
    pub sun: Mask,
    pub cloud: Mask,
    pub skydome: Mask,
    pub border: Mask,
}

impl SegmentationMaps {
    /// Builds a partition with precedence border > sun > cloud; every other
    /// pixel is skydome.
    pub fn compose(border: &Mask, sun: &Mask, cloud: &Mask) -> Result<SegmentationMaps> {
        border.same_shape(sun)?;
        border.same_shape(cloud)?;
        let sun = sun.and_not(border);
        let cloud = cloud.and_not(border).and_not(&sun);
        let skydome = border.or(&sun).or(&cloud).not();
        Ok(SegmentationMaps {
            sun,
            cloud,
            skydome,
            border: border.clone(),
        })
    }

    /// Re-applies precedence to possibly overlapping masks. Pixels claimed by
    /// no mask fall into the skydome.
    pub fn resolve(self) -> Result<SegmentationMaps> {
        self.border.same_shape(&self.skydome)?;
        SegmentationMaps::compose(&self.border, &self.sun, &self.cloud)
    }

    pub fn width(&self) -> usize {
        self.border.width
    }

    pub fn height(&self) -> usize {
        self.border.height
    }

    pub fn is_partition(&self) -> bool {
        (0..self.border.bits.len()).all(|i| {
            let n = [&self.border, &self.sun, &self.cloud, &self.skydome]
                .iter()
                .filter(|m| m.bits[i])
                .count();
            n == 1
        })
    }

    fn check_shapes(&self) -> Result<()> {
        self.border.same_shape(&self.sun)?;
        self.border.same_shape(&self.cloud)?;
        self.border.same_shape(&self.skydome)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum LabelClass {
    Border = 0,
    Skydome = 1,
    Cloud = 2,
    Sun = 3,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteLabel {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u8>,
}

impl DiscreteLabel {
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.codes[y * self.width + x]
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.codes.iter().map(|c| *c as f64).collect(),
        }
    }
}

pub fn discrete_label(maps: &SegmentationMaps) -> Result<DiscreteLabel> {
    maps.check_shapes()?;
    let codes = (0..maps.border.bits.len())
        .map(|i| {
            let class = if maps.border.bits[i] {
                LabelClass::Border
            } else if maps.sun.bits[i] {
                LabelClass::Sun
            } else if maps.cloud.bits[i] {
                LabelClass::Cloud
            } else {
                LabelClass::Skydome
            };
            class as u8
        })
        .collect();
    Ok(DiscreteLabel {
        width: maps.width(),
        height: maps.height(),
        codes,
    })
}

/// Three-channel label: sun cosine, normalized solid angle, modulated cloud
/// distance field.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousLabel {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Rgb>,
}

impl ContinuousLabel {
    pub fn at(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }
}

pub fn continuous_label(
    maps: &SegmentationMaps,
    sun: &SunPosition,
    omega: &SolidAngleMap,
    cfg: &LabelConfig,
) -> Result<ContinuousLabel> {
    maps.check_shapes()?;
    cfg.validate()?;
    let (w, h) = (maps.width(), maps.height());
    if omega.width != w || omega.height != h {
        return Err(Error::DimensionMismatch(format!(
            "solid angles {}x{} vs label {w}x{h}",
            omega.width, omega.height
        )));
    }
    let grid = Grid::new(omega.format, w, h)?;
    let maps = maps.clone().resolve()?;

    let omega_max = omega.max();
    let dist = distance_field(&maps.cloud);
    let dist_max = dist.data.iter().cloned().fold(0.0, f64::max);
    let noise = modulation(w, h, &cfg.perlin);

    let mut data = vec![[0.0f32; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let px = &mut data[i];
            if maps.sun.bits[i] {
                if let Some(d) = grid.pixel_dir(x, y) {
                    let c = d[0] * sun.direction[0] + d[1] * sun.direction[1] + d[2] * sun.direction[2];
                    px[0] = c.clamp(0.0, 1.0) as f32;
                }
            }
            if (maps.skydome.bits[i] || maps.cloud.bits[i]) && omega_max > 0.0 {
                px[1] = (omega.omega[i] / omega_max) as f32;
            }
            if maps.cloud.bits[i] && dist_max > 0.0 {
                px[2] = (dist.data[i] / dist_max * noise.data[i]) as f32;
            }
        }
    }
    Ok(ContinuousLabel {
        width: w,
        height: h,
        data,
    })
}

/// Everything the segmentation pipeline produces for one image.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub sun: SunPosition,
    pub ratio: GrayImage,
    pub crude_cloud: Mask,
    pub maps: SegmentationMaps,
}

/// Segments a linear (or already μ-law log₂ compressed) sky image.
pub fn segment(img: &EnvMap, sun: &SunPosition, cfg: &LabelConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let compressed = match img.encoding() {
        Encoding::Linear => tonemap::apply(ToneMapOp::mu_law_log2(cfg.mu), img)?,
        Encoding::Compressed(_) => img.clone(),
    };
    let sun = match (cfg.snap_degrees, img.is_linear()) {
        (Some(r), true) => snap_to_centroid(sun, img, r),
        _ => *sun,
    };
    let ratio = cloud_ratio(&compressed);
    let sky_valid = img.valid_mask();
    let border = sky_valid.not();
    let crude = crude_cloud_mask(&ratio, cfg.threshold, &sky_valid)?;
    let cloud = erode_disk(&crude, cfg.kernel);
    let disk = sun_mask(&sun, img.grid(), cfg.sun_diameter)?;
    let maps = SegmentationMaps::compose(&border, &disk, &cloud)?;
    Ok(Segmentation {
        sun,
        ratio,
        crude_cloud: crude,
        maps,
    })
}
