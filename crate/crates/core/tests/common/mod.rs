#![allow(dead_code)]

use fdrsky::{EnvFormat, EnvMap, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUN_RADIANCE: f32 = 32768.0;

/// Smooth sky background in roughly `[0.05, 2]`, bluish toward the zenith.
pub fn background(theta: f64, phi: f64, seed: u64) -> [f32; 3] {
    let s = seed as f64 * 0.37;
    let t = theta / std::f64::consts::FRAC_PI_2;
    let base = 0.3 + 0.9 * t * t + 0.25 * (phi + s).cos() * t + 0.1 * (2.0 * phi - s).sin();
    let base = base.clamp(0.05, 1.6);
    [(base * 0.8) as f32, base as f32, (base * 1.25).min(2.0) as f32]
}

/// 512² SkyAngular sky with the four center pixels at 2¹⁵.
pub fn fdr_sky(size: usize, seed: u64) -> EnvMap {
    let grid = Grid::new(EnvFormat::SkyAngular, size, size).unwrap();
    let c = size / 2;
    EnvMap::from_fn(EnvFormat::SkyAngular, size, size, |x, y| {
        if (c - 1..=c).contains(&x) && (c - 1..=c).contains(&y) {
            return [SUN_RADIANCE; 3];
        }
        match grid.pixel_spherical(x, y) {
            Some(s) => background(s.theta, s.phi, seed),
            None => [0.0; 3],
        }
    })
    .unwrap()
}

/// Smooth LatLong sky with a soft sun lobe; no single-pixel features.
pub fn smooth_latlong(width: usize, seed: u64) -> EnvMap {
    let h = width / 2;
    let grid = Grid::new(EnvFormat::LatLong, width, h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let el: f64 = rng.gen_range(0.3..1.2);
    let az: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let peak: f64 = rng.gen_range(50.0..2000.0);
    let sun = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
    EnvMap::from_fn(EnvFormat::LatLong, width, h, |x, y| {
        let s = grid.pixel_spherical(x, y).unwrap();
        let d = s.to_dir();
        let cos = d[0] * sun[0] + d[1] * sun[1] + d[2] * sun[2];
        let lobe = peak * ((cos - 1.0) * 20.0).exp();
        let bg = if s.theta < std::f64::consts::FRAC_PI_2 {
            background(s.theta, s.phi, seed)
        } else {
            [0.1, 0.09, 0.08]
        };
        bg.map(|v| v + lobe as f32)
    })
    .unwrap()
}

/// Random-ish skies with a few bright blobs, for generic property checks.
pub fn random_sky(format: EnvFormat, width: usize, seed: u64) -> EnvMap {
    let h = format.height_for_width(width);
    let grid = Grid::new(format, width, h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            let el: f64 = rng.gen_range(0.05..1.5);
            let az: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let d = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
            (d, rng.gen_range(10.0..60000.0), rng.gen_range(50.0..2000.0))
        })
        .collect();
    EnvMap::from_fn(format, width, h, |x, y| match grid.pixel_spherical(x, y) {
        Some(s) => {
            let d = s.to_dir();
            let mut v = background(s.theta.min(std::f64::consts::FRAC_PI_2), s.phi, seed);
            for (b, peak, sharp) in &blobs {
                let cos = d[0] * b[0] + d[1] * b[1] + d[2] * b[2];
                let add = (peak * ((cos - 1.0) * sharp).exp()) as f32;
                v = v.map(|c| c + add);
            }
            v
        }
        None => [0.0; 3],
    })
    .unwrap()
}
