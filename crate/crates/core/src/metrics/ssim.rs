//! Structural similarity on 11×11 Gaussian windows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::EnvMap;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn channel(img: &EnvMap, c: usize) -> Plane {
        Plane {
            w: img.width(),
            h: img.height(),
            v: img.pixels().iter().map(|p| p[c] as f64).collect(),
        }
    }

    /// 2×2 box average, dropping an odd trailing row or column.
    fn half(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut v = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let at = |dx: usize, dy: usize| self.v[(2 * y + dy) * self.w + 2 * x + dx];
                v[y * w + x] = 0.25 * (at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1));
            }
        }
        Plane { w, h, v }
    }

    fn mul(&self, o: &Plane) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            v: self.v.iter().zip(&o.v).map(|(a, b)| a * b).collect(),
        }
    }
}

fn gaussian_taps() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, t) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *t = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|t| t / s)
}

/// Separable filtering over windows that lie entirely inside the plane.
fn filter_valid(p: &Plane, taps: &[f64; WINDOW]) -> Plane {
    let (ow, oh) = (p.w + 1 - WINDOW, p.h + 1 - WINDOW);
    let rows: Vec<f64> = (0..p.h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let row = &p.v[y * p.w..(y + 1) * p.w];
            (0..ow).map(move |x| taps.iter().zip(&row[x..x + WINDOW]).map(|(t, v)| t * v).sum::<f64>())
        })
        .collect();
    let v = (0..oh)
        .into_par_iter()
        .flat_map_iter(|y| {
            let rows = &rows;
            (0..ow).map(move |x| (0..WINDOW).map(|k| taps[k] * rows[(y + k) * ow + x]).sum::<f64>())
        })
        .collect();
    Plane { w: ow, h: oh, v }
}

/// Mean SSIM and mean contrast-structure term of one channel.
fn ssim_plane(a: &Plane, b: &Plane, data_range: f64) -> (f64, f64) {
    let taps = gaussian_taps();
    let c1 = (K1 * data_range).powi(2);
    let c2 = (K2 * data_range).powi(2);
    let mu_a = filter_valid(a, &taps);
    let mu_b = filter_valid(b, &taps);
    let aa = filter_valid(&a.mul(a), &taps);
    let bb = filter_valid(&b.mul(b), &taps);
    let ab = filter_valid(&a.mul(b), &taps);
    let n = mu_a.v.len() as f64;
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_a.v.len() {
        let (ma, mb) = (mu_a.v[i], mu_b.v[i]);
        let va = aa.v[i] - ma * ma;
        let vb = bb.v[i] - mb * mb;
        let cov = ab.v[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (va + vb + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        s_sum += l * cs;
        cs_sum += cs;
    }
    (s_sum / n, cs_sum / n)
}

fn check(a: &EnvMap, b: &EnvMap, min_side: usize, data_range: f64) -> Result<()> {
    a.same_shape(b)?;
    if a.width() < min_side || a.height() < min_side {
        return Err(Error::param(format!(
            "image {}x{} is smaller than the {min_side}px minimum",
            a.width(),
            a.height()
        )));
    }
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(Error::param(format!("data range must be positive, got {data_range}")));
    }
    Ok(())
}

/// Channel-averaged SSIM with constants derived from `data_range`.
pub fn ssim_with_range(a: &EnvMap, b: &EnvMap, data_range: f64) -> Result<f64> {
    check(a, b, WINDOW, data_range)?;
    let s: f64 = (0..3)
        .map(|c| ssim_plane(&Plane::channel(a, c), &Plane::channel(b, c), data_range).0)
        .sum();
    Ok(s / 3.0)
}

/// Five-scale MS-SSIM; each side must be at least `11 · 2⁴` pixels.
pub fn ms_ssim_with_range(a: &EnvMap, b: &EnvMap, data_range: f64) -> Result<f64> {
    let scales = MS_SSIM_WEIGHTS.len();
    check(a, b, WINDOW << (scales - 1), data_range)?;
    let mut total = 0.0;
    for c in 0..3 {
        let (mut pa, mut pb) = (Plane::channel(a, c), Plane::channel(b, c));
        let mut value = 1.0;
        for (s, w) in MS_SSIM_WEIGHTS.iter().enumerate() {
            let (ssim, cs) = ssim_plane(&pa, &pb, data_range);
            let term = if s + 1 == scales { ssim } else { cs };
            value *= term.max(0.0).powf(*w);
            if s + 1 < scales {
                pa = pa.half();
                pb = pb.half();
            }
        }
        total += value;
    }
    Ok(total / 3.0)
}
