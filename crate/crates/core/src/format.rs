//! Environment-map parameterizations and their geometry.
//!
//! World frame: `x` points north, `y` east, `z` up (zenith). Azimuth `phi` is
//! measured clockwise from north when looking down on the horizon plane, polar
//! angle `theta` from the zenith. A direction is therefore
//! `(sin θ cos φ, sin θ sin φ, cos θ)`.
//!
//! * `LatLong` rows span `θ ∈ [0, π]` top to bottom, columns `φ ∈ [0, 2π)`.
//! * `SkyLatLong` is the upper half of `LatLong` at 4:1 aspect.
//! * `SkyAngular` is an equidistant fisheye of the upper hemisphere: the
//!   normalized radius `r` from the image center maps to `θ = r·π/2`, north is
//!   at the top edge and east at the right edge. Pixels with `r > 1` are border.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvFormat {
    LatLong,
    SkyLatLong,
    SkyAngular,
}

impl EnvFormat {
    pub const ALL: [EnvFormat; 3] = [EnvFormat::LatLong, EnvFormat::SkyLatLong, EnvFormat::SkyAngular];

    /// Checks the aspect constraint of the format.
    pub fn validate(self, width: usize, height: usize) -> Result<()> {
        let (ok, expected) = match self {
            EnvFormat::LatLong => (width == 2 * height, "width = 2 * height"),
            EnvFormat::SkyLatLong => (width == 4 * height, "width = 4 * height"),
            EnvFormat::SkyAngular => (width == height, "a square image"),
        };
        if ok && height > 0 {
            Ok(())
        } else {
            Err(Error::InvalidAspect {
                format: self,
                width,
                height,
                expected,
            })
        }
    }

    /// Guesses the format from the aspect ratio alone.
    pub fn infer(width: usize, height: usize) -> Option<EnvFormat> {
        EnvFormat::ALL
            .into_iter()
            .find(|f| f.validate(width, height).is_ok())
    }

    /// Height that pairs with `width` under this format.
    pub fn height_for_width(self, width: usize) -> usize {
        match self {
            EnvFormat::LatLong => width / 2,
            EnvFormat::SkyLatLong => width / 4,
            EnvFormat::SkyAngular => width,
        }
    }

    pub fn is_hemisphere(self) -> bool {
        !matches!(self, EnvFormat::LatLong)
    }

    /// Largest polar angle covered by the format.
    pub fn max_theta(self) -> f64 {
        match self {
            EnvFormat::LatLong => PI,
            EnvFormat::SkyLatLong | EnvFormat::SkyAngular => FRAC_PI_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvFormat::LatLong => "latlong",
            EnvFormat::SkyLatLong => "sky-latlong",
            EnvFormat::SkyAngular => "sky-angular",
        }
    }
}

impl fmt::Display for EnvFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "latlong" | "lat-long" => Ok(EnvFormat::LatLong),
            "sky-latlong" | "skylatlong" => Ok(EnvFormat::SkyLatLong),
            "sky-angular" | "skyangular" | "angular" => Ok(EnvFormat::SkyAngular),
            other => Err(Error::param(format!("unknown environment format '{other}'"))),
        }
    }
}

/// Polar/azimuth pair in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spherical {
    pub theta: f64,
    pub phi: f64,
}

impl Spherical {
    pub fn to_dir(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn from_dir(d: [f64; 3]) -> Spherical {
        let horiz = d[0].hypot(d[1]);
        let theta = horiz.atan2(d[2]);
        let phi = d[1].atan2(d[0]).rem_euclid(TAU);
        Spherical { theta, phi }
    }
}

/// Pixel grid of one environment map, used for mapping between pixel
/// coordinates and directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub format: EnvFormat,
    pub width: usize,
    pub height: usize,
}

impl Grid {
    pub fn new(format: EnvFormat, width: usize, height: usize) -> Result<Grid> {
        format.validate(width, height)?;
        Ok(Grid {
            format,
            width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centered, normalized disk coordinates of a SkyAngular pixel center.
    /// Computed from an integer numerator so mirrored pixels are exact negatives.
    #[inline]
    pub fn disk_coords(&self, x: usize, y: usize) -> (f64, f64) {
        let n = self.width as f64;
        let u = (2 * x + 1) as f64 - n;
        let m = self.height as f64;
        let v = (2 * y + 1) as f64 - m;
        (u / n, v / m)
    }

    /// Whether the pixel center lies inside the covered domain.
    #[inline]
    pub fn inside(&self, x: usize, y: usize) -> bool {
        match self.format {
            EnvFormat::SkyAngular => {
                let (u, v) = self.disk_coords(x, y);
                u * u + v * v <= 1.0
            }
            _ => true,
        }
    }

    /// Direction of a pixel center, `None` for border pixels.
    pub fn pixel_spherical(&self, x: usize, y: usize) -> Option<Spherical> {
        let w = self.width as f64;
        let h = self.height as f64;
        match self.format {
            EnvFormat::LatLong => Some(Spherical {
                theta: (y as f64 + 0.5) * PI / h,
                phi: (x as f64 + 0.5) * TAU / w,
            }),
            EnvFormat::SkyLatLong => Some(Spherical {
                theta: (y as f64 + 0.5) * FRAC_PI_2 / h,
                phi: (x as f64 + 0.5) * TAU / w,
            }),
            EnvFormat::SkyAngular => {
                let (u, v) = self.disk_coords(x, y);
                let r = u.hypot(v);
                if r > 1.0 {
                    return None;
                }
                Some(Spherical {
                    theta: r * FRAC_PI_2,
                    phi: u.atan2(-v).rem_euclid(TAU),
                })
            }
        }
    }

    pub fn pixel_dir(&self, x: usize, y: usize) -> Option<[f64; 3]> {
        self.pixel_spherical(x, y).map(Spherical::to_dir)
    }

    /// Continuous pixel coordinates (pixel centers at integer + 0.5 offsets
    /// removed, i.e. center of pixel `i` is at `i`) for a direction, or `None`
    /// when the direction is outside the format's coverage.
    pub fn locate(&self, s: Spherical) -> Option<(f64, f64)> {
        let w = self.width as f64;
        let h = self.height as f64;
        let phi = s.phi.rem_euclid(TAU);
        match self.format {
            EnvFormat::LatLong => Some((phi / TAU * w - 0.5, s.theta / PI * h - 0.5)),
            EnvFormat::SkyLatLong => {
                if s.theta > FRAC_PI_2 {
                    return None;
                }
                Some((phi / TAU * w - 0.5, s.theta / FRAC_PI_2 * h - 0.5))
            }
            EnvFormat::SkyAngular => {
                if s.theta > FRAC_PI_2 {
                    return None;
                }
                let r = s.theta / FRAC_PI_2;
                let u = r * phi.sin();
                let v = -r * phi.cos();
                Some(((u + 1.0) * w / 2.0 - 0.5, (v + 1.0) * h / 2.0 - 0.5))
            }
        }
    }

    /// Whether the horizontal axis wraps around (equirectangular formats).
    pub fn wraps_horizontally(&self) -> bool {
        !matches!(self.format, EnvFormat::SkyAngular)
    }

    /// Solid angle of one pixel in steradians; 0 on border pixels.
    pub fn pixel_solid_angle(&self, x: usize, y: usize) -> f64 {
        let w = self.width as f64;
        let h = self.height as f64;
        match self.format {
            EnvFormat::LatLong => {
                let theta = (y as f64 + 0.5) * PI / h;
                theta.sin() * (PI / h) * (TAU / w)
            }
            EnvFormat::SkyLatLong => {
                let theta = (y as f64 + 0.5) * FRAC_PI_2 / h;
                theta.sin() * (FRAC_PI_2 / h) * (TAU / w)
            }
            EnvFormat::SkyAngular => {
                let (u, v) = self.disk_coords(x, y);
                let r = u.hypot(v);
                let area = (2.0 / w) * (2.0 / h);
                if r > 1.0 {
                    0.0
                } else if r == 0.0 {
                    FRAC_PI_2 * FRAC_PI_2 * area
                } else {
                    (r * FRAC_PI_2).sin() * FRAC_PI_2 / r * area
                }
            }
        }
    }
}

/// Per-pixel solid angles of an environment map.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidAngleMap {
    pub format: EnvFormat,
    pub width: usize,
    pub height: usize,
    pub omega: Vec<f64>,
}

impl SolidAngleMap {
    pub fn total(&self) -> f64 {
        self.omega.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.omega.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.omega[y * self.width + x]
    }
}

pub fn solid_angles(format: EnvFormat, width: usize, height: usize) -> Result<SolidAngleMap> {
    let grid = Grid::new(format, width, height)?;
    let mut omega = Vec::with_capacity(grid.len());
    for y in 0..height {
        for x in 0..width {
            omega.push(grid.pixel_solid_angle(x, y));
        }
    }
    Ok(SolidAngleMap {
        format,
        width,
        height,
        omega,
    })
}

/// Angle between two unit vectors, robust near 0 and π.
pub fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos)
}
