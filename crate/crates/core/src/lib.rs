//! Processing and evaluation toolkit for full-dynamic-range skydome
//! environment maps.

// `!(x > 0.0)` style checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod format;
pub mod image;
pub mod losskit;
pub mod metrics;
pub mod radiometry;
pub mod resample;
pub mod skylabel;
pub mod tonemap;

pub use error::{Error, Result};
pub use format::{solid_angles, EnvFormat, Grid, SolidAngleMap};
pub use image::{Encoding, EnvMap, GrayImage, Mask, Rgb};
pub use radiometry::{exposure_value, integrated_illumination, luminance, zero_border};
pub use resample::{convert_format, resize, InterpMethod};
pub use tonemap::ToneMapOp;
