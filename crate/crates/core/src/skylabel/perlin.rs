//! Seeded 2-D gradient noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerlinConfig {
    pub seed: u64,
    /// Base frequency in cycles per pixel.
    pub frequency: f64,
    pub octaves: u32,
    pub persistence: f64,
}

impl Default for PerlinConfig {
    fn default() -> Self {
        PerlinConfig {
            seed: 0,
            frequency: 1.0 / 64.0,
            octaves: 3,
            persistence: 0.5,
        }
    }
}

impl PerlinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::param("perlin frequency must be positive"));
        }
        if self.octaves == 0 || self.octaves > 16 {
            return Err(Error::param("perlin octaves must be in 1..=16"));
        }
        if !(self.persistence > 0.0 && self.persistence <= 1.0) {
            return Err(Error::param("perlin persistence must be in (0, 1]"));
        }
        Ok(())
    }
}

pub struct Perlin {
    perm: [u8; 512],
    gradients: [[f64; 2]; 256],
}

impl Perlin {
    pub fn new(seed: u64) -> Perlin {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table: Vec<u8> = (0..=255).collect();
        table.shuffle(&mut rng);
        let mut perm = [0u8; 512];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = table[i & 255];
        }
        let mut gradients = [[0.0; 2]; 256];
        for g in &mut gradients {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            *g = [a.cos(), a.sin()];
        }
        Perlin { perm, gradients }
    }

    /// Single-octave noise in roughly `[-1/√2, 1/√2]`.
    pub fn noise(&self, x: f64, y: f64) -> f64 {
        let (xf, yf) = (x.floor(), y.floor());
        let (xi, yi) = ((xf as i64 & 255) as usize, (yf as i64 & 255) as usize);
        let (dx, dy) = (x - xf, y - yf);
        let corner = |cx: usize, cy: usize, ox: f64, oy: f64| {
            let h = self.perm[self.perm[xi + cx] as usize + yi + cy] as usize;
            let g = self.gradients[h];
            g[0] * (dx - ox) + g[1] * (dy - oy)
        };
        let n00 = corner(0, 0, 0.0, 0.0);
        let n10 = corner(1, 0, 1.0, 0.0);
        let n01 = corner(0, 1, 0.0, 1.0);
        let n11 = corner(1, 1, 1.0, 1.0);
        let (u, v) = (fade(dx), fade(dy));
        let a = n00 + u * (n10 - n00);
        let b = n01 + u * (n11 - n01);
        a + v * (b - a)
    }

    /// Octave sum normalized by the total amplitude.
    pub fn fractal(&self, x: f64, y: f64, cfg: &PerlinConfig) -> f64 {
        let (mut sum, mut amp, mut norm, mut freq) = (0.0, 1.0, 0.0, cfg.frequency);
        for _ in 0..cfg.octaves {
            sum += amp * self.noise(x * freq, y * freq);
            norm += amp;
            amp *= cfg.persistence;
            freq *= 2.0;
        }
        sum / norm
    }
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Noise raster remapped to `[0.5, 1]`.
pub fn modulation(width: usize, height: usize, cfg: &PerlinConfig) -> GrayImage {
    let p = Perlin::new(cfg.seed);
    let mut out = GrayImage::zeros(width, height);
    for y in 0..height {
        for x in 0..width {
            let n = p.fractal(x as f64 + 0.5, y as f64 + 0.5, cfg);
            out.data[y * width + x] = 0.75 + 0.25 * (n * std::f64::consts::SQRT_2).clamp(-1.0, 1.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let cfg = PerlinConfig::default();
        let a = modulation(96, 64, &cfg);
        let b = modulation(96, 64, &cfg);
        assert_eq!(a, b);
        assert!(a.data.iter().all(|v| (0.5..=1.0).contains(v)));
        let spread = a.data.iter().cloned().fold(f64::MIN, f64::max) - a.data.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.05, "{spread}");
        let other = modulation(96, 64, &PerlinConfig { seed: 1, ..cfg });
        assert_ne!(a, other);
    }

    #[test]
    fn zero_at_lattice_points() {
        let p = Perlin::new(9);
        for (x, y) in [(0.0, 0.0), (3.0, 7.0), (-2.0, 5.0)] {
            assert_eq!(p.noise(x, y), 0.0);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(PerlinConfig { octaves: 0, ..Default::default() }.validate().is_err());
        assert!(PerlinConfig { frequency: 0.0, ..Default::default() }.validate().is_err());
        assert!(PerlinConfig { persistence: 1.5, ..Default::default() }.validate().is_err());
        assert!(PerlinConfig::default().validate().is_ok());
    }
}
