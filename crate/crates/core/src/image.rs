//! Raster types: RGB environment maps, grayscale rasters and boolean masks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::{EnvFormat, Grid};
use crate::tonemap::ToneMapOp;

pub type Rgb = [f32; 3];

/// Values in `(NEGATIVE_CLAMP, 0)` are treated as codec rounding and clamped.
pub const NEGATIVE_CLAMP: f32 = -1e-6;

/// Radiometric space an image's values live in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Encoding {
    /// Linear, non-negative relative radiance.
    Linear,
    /// Output of a tonemapping operator.
    Compressed(ToneMapOp),
}

/// Three-channel environment map with an optional validity mask.
///
/// Linear images uphold the non-negativity invariant. Pixels are stored row
/// major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvMap {
    pub(crate) grid: Grid,
    pub(crate) pixels: Vec<Rgb>,
    pub(crate) valid: Option<Vec<bool>>,
    pub(crate) encoding: Encoding,
}

impl EnvMap {
    /// Builds a linear radiance image, clamping tiny negatives to zero and
    /// rejecting anything more negative or non-finite.
    pub fn new(format: EnvFormat, width: usize, height: usize, mut pixels: Vec<Rgb>) -> Result<EnvMap> {
        let grid = Grid::new(format, width, height)?;
        if pixels.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        for (i, p) in pixels.iter_mut().enumerate() {
            for (c, v) in p.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        x: i % width,
                        y: i / width,
                    });
                }
                if *v < 0.0 {
                    if *v > NEGATIVE_CLAMP {
                        *v = 0.0;
                    } else {
                        return Err(Error::NegativeRadiance {
                            x: i % width,
                            y: i / width,
                            channel: c,
                            value: *v,
                        });
                    }
                }
            }
        }
        Ok(EnvMap {
            grid,
            pixels,
            valid: None,
            encoding: Encoding::Linear,
        })
    }

    pub fn constant(format: EnvFormat, width: usize, height: usize, rgb: Rgb) -> Result<EnvMap> {
        let grid = Grid::new(format, width, height)?;
        EnvMap::new(format, width, height, vec![rgb; grid.len()])
    }

    /// Builds a linear image from a per-pixel function of `(x, y)`.
    pub fn from_fn(
        format: EnvFormat,
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> Rgb + Sync,
    ) -> Result<EnvMap> {
        Grid::new(format, width, height)?;
        let pixels: Vec<Rgb> = (0..width * height)
            .into_par_iter()
            .map(|i| f(i % width, i / width))
            .collect();
        EnvMap::new(format, width, height, pixels)
    }

    pub(crate) fn from_parts(grid: Grid, pixels: Vec<Rgb>, valid: Option<Vec<bool>>, encoding: Encoding) -> EnvMap {
        debug_assert_eq!(pixels.len(), grid.len());
        EnvMap {
            grid,
            pixels,
            valid,
            encoding,
        }
    }

    /// Wraps already-compressed values (e.g. read back from disk) with the
    /// operator that produced them. No range checks are made here.
    pub fn compressed(
        format: EnvFormat,
        width: usize,
        height: usize,
        pixels: Vec<Rgb>,
        op: ToneMapOp,
    ) -> Result<EnvMap> {
        let grid = Grid::new(format, width, height)?;
        if pixels.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(EnvMap {
            grid,
            pixels,
            valid: None,
            encoding: Encoding::Compressed(op),
        })
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn format(&self) -> EnvFormat {
        self.grid.format
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.encoding, Encoding::Linear)
    }

    pub fn require_linear(&self) -> Result<()> {
        match self.encoding {
            Encoding::Linear => Ok(()),
            Encoding::Compressed(op) => Err(Error::CompressedInput(op.to_string())),
        }
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.grid.width + x]
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }

    /// Explicit validity mask, if one has been attached.
    pub fn valid_mask_raw(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    /// Whether pixel `i` (row-major index) is part of the sky region: the
    /// attached mask if present, otherwise the format's geometric coverage.
    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        match &self.valid {
            Some(mask) => mask[i],
            None => self.grid.inside(i % self.grid.width, i / self.grid.width),
        }
    }

    pub fn valid_mask(&self) -> Mask {
        Mask {
            width: self.width(),
            height: self.height(),
            bits: (0..self.len()).map(|i| self.is_valid(i)).collect(),
        }
    }

    pub fn with_valid_mask(mut self, mask: Mask) -> Result<EnvMap> {
        if mask.width != self.width() || mask.height != self.height() {
            return Err(Error::DimensionMismatch("validity mask".into()));
        }
        self.valid = Some(mask.bits);
        Ok(self)
    }

    pub fn clear_valid_mask(mut self) -> EnvMap {
        self.valid = None;
        self
    }

    /// Relabels the pixel values' radiometric space without touching them.
    pub(crate) fn with_encoding(mut self, encoding: Encoding) -> EnvMap {
        self.encoding = encoding;
        self
    }

    /// Multiplies every channel of every pixel by `a`.
    pub fn scaled(&self, a: f64) -> EnvMap {
        let pixels = self
            .pixels
            .par_iter()
            .map(|p| p.map(|v| (v as f64 * a) as f32))
            .collect();
        EnvMap {
            pixels,
            ..self.clone()
        }
    }

    /// Applies `f` to every pixel, keeping geometry, mask and encoding.
    pub fn map_pixels(&self, f: impl Fn(Rgb) -> Rgb + Sync) -> EnvMap {
        let pixels = self.pixels.par_iter().map(|p| f(*p)).collect();
        EnvMap {
            pixels,
            ..self.clone()
        }
    }

    pub fn same_shape(&self, other: &EnvMap) -> Result<()> {
        if self.width() != other.width() || self.height() != other.height() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width(),
                self.height(),
                other.width(),
                other.height()
            )));
        }
        Ok(())
    }
}

/// Single-channel float raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn zeros(width: usize, height: usize) -> GrayImage {
        GrayImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Boolean raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Mask> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} mask bits for {width}x{height}",
                bits.len()
            )));
        }
        Ok(Mask { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Mask {
        Mask {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Mask {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask { width, height, bits }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn same_shape(&self, other: &Mask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a && !b)
    }

    pub fn not(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Subset test: every set bit of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    fn zip(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Mask {
        assert_eq!(self.bits.len(), other.bits.len(), "mask shapes differ");
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| f(*a, *b)).collect(),
        }
    }
}
