//! File formats: PFM and Radiance RGBE for images, PBM for masks.

pub mod pbm;
pub mod pfm;
pub mod rgbe;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::EnvFormat;
use crate::image::{EnvMap, GrayImage, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Pfm,
    Rgbe,
    Pbm,
}

impl FileKind {
    pub fn from_path(path: &Path) -> Option<FileKind> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pfm" => Some(FileKind::Pfm),
            "hdr" | "rgbe" | "pic" => Some(FileKind::Rgbe),
            "pbm" => Some(FileKind::Pbm),
            _ => None,
        }
    }
}

/// Raw RGB raster decoded from disk, before format tagging.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRgb {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

pub fn read_rgb(path: &Path) -> Result<RawRgb> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match FileKind::from_path(path) {
        Some(FileKind::Pfm) => {
            let img = pfm::decode_bytes(&bytes)?;
            let data = match img.channels {
                3 => img.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
                _ => img.data.iter().map(|v| [*v; 3]).collect(),
            };
            Ok(RawRgb {
                width: img.width,
                height: img.height,
                data,
            })
        }
        Some(FileKind::Rgbe) => {
            let img = rgbe::decode(&bytes)?;
            Ok(RawRgb {
                width: img.width,
                height: img.height,
                data: img.data,
            })
        }
        _ => Err(Error::decode("image", format!("unsupported extension: {}", path.display()))),
    }
}

/// Loads a linear environment map. The format is inferred from the aspect
/// ratio unless given.
pub fn load(path: &Path, format: Option<EnvFormat>) -> Result<EnvMap> {
    let raw = read_rgb(path)?;
    let format = resolve_format(format, raw.width, raw.height)?;
    EnvMap::new(format, raw.width, raw.height, raw.data)
}

pub fn resolve_format(format: Option<EnvFormat>, width: usize, height: usize) -> Result<EnvFormat> {
    match format {
        Some(f) => {
            f.validate(width, height)?;
            Ok(f)
        }
        None => EnvFormat::infer(width, height)
            .ok_or_else(|| Error::param(format!("cannot infer environment format from {width}x{height}"))),
    }
}

pub fn encode_env(img: &EnvMap, kind: FileKind) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match kind {
        FileKind::Pfm => pfm::encode(
            &pfm::PfmImage {
                width: img.width(),
                height: img.height(),
                channels: 3,
                data: img.pixels().iter().flatten().copied().collect(),
            },
            &mut out,
        )?,
        FileKind::Rgbe => rgbe::encode(
            &rgbe::RgbeImage {
                width: img.width(),
                height: img.height(),
                data: img.pixels().to_vec(),
            },
            &mut out,
        )?,
        FileKind::Pbm => return Err(Error::param("PBM holds masks, not images")),
    }
    Ok(out)
}

pub fn save(path: &Path, img: &EnvMap) -> Result<()> {
    let kind = FileKind::from_path(path).unwrap_or(FileKind::Pfm);
    let bytes = encode_env(img, kind)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_gray(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    pfm::encode(
        &pfm::PfmImage {
            width: img.width,
            height: img.height,
            channels: 1,
            data: img.data.iter().map(|v| *v as f32).collect(),
        },
        &mut out,
    )?;
    Ok(out)
}

/// Masks go to PBM, or to a 0/1 single-channel PFM for `.pfm` paths.
pub fn encode_mask(mask: &Mask, kind: FileKind) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match kind {
        FileKind::Pfm => {
            let gray = GrayImage {
                width: mask.width,
                height: mask.height,
                data: mask.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
            };
            return encode_gray(&gray);
        }
        _ => pbm::encode(mask, &mut out)?,
    }
    Ok(out)
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match FileKind::from_path(path) {
        Some(FileKind::Pfm) => {
            let img = pfm::decode_bytes(&bytes)?;
            let bits = img.data.chunks(img.channels).map(|c| c[0] > 0.5).collect();
            Mask::new(img.width, img.height, bits)
        }
        _ => pbm::decode(&bytes),
    }
}
