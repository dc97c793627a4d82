//! Solar positioning, sky segmentation and label synthesis.

mod label;
pub mod morphology;
pub mod perlin;
pub mod solar;

pub use label::{
    cloud_mask, cloud_ratio, continuous_label, crude_cloud_mask, discrete_label, segment, ContinuousLabel,
    DiscreteLabel, LabelClass, LabelConfig, Segmentation, SegmentationMaps, DEFAULT_SUN_DIAMETER,
    DEFAULT_THRESHOLD, HAND_DRAWN_KERNEL,
};
pub use morphology::{distance_field, erode_disk};
pub use perlin::PerlinConfig;
pub use solar::{snap_to_centroid, solar_position, sun_mask, SunPosition};
