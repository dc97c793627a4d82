//! Closed-form solar ephemeris (PSA algorithm, arc-minute class accuracy).

use std::f64::consts::TAU;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{angle_between, EnvFormat, Grid, Spherical};
use crate::image::EnvMap;
use crate::radiometry::luminance_of;

const EARTH_MEAN_RADIUS_KM: f64 = 6371.01;
const ASTRONOMICAL_UNIT_KM: f64 = 149_597_890.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunPosition {
    /// Degrees above the horizon.
    pub elevation: f64,
    /// Degrees clockwise from north.
    pub azimuth: f64,
    /// Unit vector in the environment-map world frame (x north, y east, z up).
    pub direction: [f64; 3],
}

impl SunPosition {
    pub fn from_angles(elevation: f64, azimuth: f64) -> SunPosition {
        let dir = Spherical {
            theta: (90.0 - elevation).to_radians(),
            phi: azimuth.to_radians(),
        }
        .to_dir();
        SunPosition {
            elevation,
            azimuth: azimuth.rem_euclid(360.0),
            direction: dir,
        }
    }

    pub fn from_direction(d: [f64; 3]) -> SunPosition {
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let d = [d[0] / n, d[1] / n, d[2] / n];
        let s = Spherical::from_dir(d);
        SunPosition {
            elevation: 90.0 - s.theta.to_degrees(),
            azimuth: s.phi.to_degrees(),
            direction: d,
        }
    }

    pub fn zenith() -> SunPosition {
        SunPosition {
            elevation: 90.0,
            azimuth: 0.0,
            direction: [0.0, 0.0, 1.0],
        }
    }

    pub fn is_above_horizon(&self) -> bool {
        self.elevation > 0.0
    }
}

/// Topocentric solar elevation and azimuth (no refraction) for a UTC instant.
pub fn solar_position(timestamp: DateTime<Utc>, latitude: f64, longitude: f64) -> Result<SunPosition> {
    if !latitude.is_finite() || latitude.abs() > 90.0 {
        return Err(Error::param(format!("latitude {latitude} outside [-90, 90]")));
    }
    if !longitude.is_finite() || longitude.abs() > 180.0 {
        return Err(Error::param(format!("longitude {longitude} outside [-180, 180]")));
    }

    let hours = timestamp.hour() as f64
        + (timestamp.minute() as f64 + (timestamp.second() as f64 + timestamp.nanosecond() as f64 * 1e-9) / 60.0) / 60.0;
    let (year, month, day) = (
        timestamp.year() as i64,
        timestamp.month() as i64,
        timestamp.day() as i64,
    );
    let aux1 = (month - 14) / 12;
    let aux2 = (1461 * (year + 4800 + aux1)) / 4 + (367 * (month - 2 - 12 * aux1)) / 12
        - (3 * ((year + 4900 + aux1) / 100)) / 4
        + day
        - 32075;
    let julian_date = aux2 as f64 - 0.5 + hours / 24.0;
    let n = julian_date - 2_451_545.0;

    // ecliptic coordinates
    let omega = 2.1429 - 0.001_039_459_4 * n;
    let mean_longitude = 4.895_063_0 + 0.017_202_791_698 * n;
    let mean_anomaly = 6.240_060_0 + 0.017_201_969_9 * n;
    let ecliptic_longitude = mean_longitude + 0.033_416_07 * mean_anomaly.sin() + 0.000_348_94 * (2.0 * mean_anomaly).sin()
        - 0.000_113_4
        - 0.000_020_3 * omega.sin();
    let obliquity = 0.409_092_8 - 6.2140e-9 * n + 0.000_039_6 * omega.cos();

    // celestial coordinates
    let sin_lambda = ecliptic_longitude.sin();
    let right_ascension = (obliquity.cos() * sin_lambda)
        .atan2(ecliptic_longitude.cos())
        .rem_euclid(TAU);
    let declination = (obliquity.sin() * sin_lambda).asin();

    // local coordinates
    let gmst = 6.697_424_324_2 + 0.065_709_828_3 * n + hours;
    let lmst = (gmst * 15.0 + longitude).to_radians();
    let hour_angle = lmst - right_ascension;
    let lat = latitude.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let cos_ha = hour_angle.cos();

    let mut zenith = (cos_lat * cos_ha * declination.cos() + declination.sin() * sin_lat)
        .clamp(-1.0, 1.0)
        .acos();
    let azimuth = (-hour_angle.sin())
        .atan2(declination.tan() * cos_lat - sin_lat * cos_ha)
        .rem_euclid(TAU);
    zenith += EARTH_MEAN_RADIUS_KM / ASTRONOMICAL_UNIT_KM * zenith.sin();

    Ok(SunPosition::from_angles(90.0 - zenith.to_degrees(), azimuth.to_degrees()))
}

/// Pixels whose direction lies within `diameter / 2` degrees of the sun.
/// Hemisphere formats return an empty mask when the sun is below the horizon.
pub fn sun_mask(sun: &SunPosition, grid: Grid, diameter: f64) -> Result<crate::image::Mask> {
    if !(diameter > 0.0) {
        return Err(Error::param("sun diameter must be positive"));
    }
    let radius = (diameter / 2.0).to_radians();
    let hidden = grid.format.is_hemisphere() && sun.elevation < 0.0;
    Ok(crate::image::Mask::from_fn(grid.width, grid.height, |x, y| {
        !hidden
            && grid
                .pixel_dir(x, y)
                .is_some_and(|d| angle_between(d, sun.direction) <= radius)
    }))
}

/// Moves the sun to the luminance-weighted centroid of the brightest pixels
/// within `max_offset` degrees of the ephemeris direction. Pixels count when
/// they reach half the cone's peak luminance. Returns the input unchanged if
/// the cone holds no valid pixels.
pub fn snap_to_centroid(sun: &SunPosition, img: &EnvMap, max_offset: f64) -> SunPosition {
    let grid = img.grid();
    let limit = max_offset.to_radians();
    let mut cone = Vec::new();
    for y in 0..grid.height {
        for x in 0..grid.width {
            let i = y * grid.width + x;
            if !img.is_valid(i) {
                continue;
            }
            if let Some(d) = grid.pixel_dir(x, y) {
                if angle_between(d, sun.direction) <= limit {
                    cone.push((d, luminance_of(img.pixels()[i])));
                }
            }
        }
    }
    let peak = cone.iter().map(|c| c.1).fold(0.0, f64::max);
    if peak <= 0.0 {
        return *sun;
    }
    let mut acc = [0.0f64; 3];
    for (d, l) in cone.iter().filter(|c| c.1 >= 0.5 * peak) {
        for k in 0..3 {
            acc[k] += d[k] * l;
        }
    }
    let snapped = SunPosition::from_direction(acc);
    if angle_between(snapped.direction, sun.direction) <= limit {
        snapped
    } else {
        *sun
    }
}

/// Solid angle (sr) covered by a sun mask, for sanity reports.
pub fn mask_solid_angle(mask: &crate::image::Mask, format: EnvFormat) -> Result<f64> {
    let omega = crate::format::solid_angles(format, mask.width, mask.height)?;
    Ok(mask
        .bits
        .iter()
        .zip(&omega.omega)
        .filter(|(b, _)| **b)
        .map(|(_, o)| o)
        .sum())
}
