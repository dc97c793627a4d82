//! Binary morphology and the exact Euclidean distance transform.

use rayon::prelude::*;

use crate::image::{GrayImage, Mask};

/// Stand-in for infinity that keeps `FAR + i²` exact in `f64`.
const FAR: f64 = 1e12;

/// Exact Euclidean distance from each mask pixel to the nearest non-mask
/// pixel center. Pixels outside the raster count as non-mask, so a lone
/// mask pixel has distance 1. Non-mask pixels are 0.
pub fn distance_field(mask: &Mask) -> GrayImage {
    let d2 = squared_distance(mask);
    GrayImage {
        width: mask.width,
        height: mask.height,
        data: d2.into_iter().map(f64::sqrt).collect(),
    }
}

/// Squared EDT on a raster padded with one ring of background.
fn squared_distance(mask: &Mask) -> Vec<f64> {
    let (w, h) = (mask.width, mask.height);
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let (pw, ph) = (w + 2, h + 2);
    let mut grid = vec![0.0f64; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                grid[(y + 1) * pw + x + 1] = FAR;
            }
        }
    }

    grid.par_chunks_mut(pw).for_each(|row| {
        let out = edt_1d(row);
        row.copy_from_slice(&out);
    });

    let mut cols: Vec<Vec<f64>> = (0..pw)
        .into_par_iter()
        .map(|x| {
            let col: Vec<f64> = (0..ph).map(|y| grid[y * pw + x]).collect();
            edt_1d(&col)
        })
        .collect();

    let mut out = vec![0.0f64; w * h];
    for (x, col) in cols.iter_mut().enumerate().skip(1).take(w) {
        for y in 0..h {
            out[y * w + x - 1] = col[y + 1];
        }
    }
    out
}

/// Felzenszwalb-Huttenlocher lower envelope of parabolas.
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let sq = |i: usize| (i * i) as f64;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + sq(q)) - (f[p] + sq(p))) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let diff = q as f64 - v[k] as f64;
        *out = diff * diff + f[v[k]];
    }
    d
}

/// Erosion by a circular brush of diameter `k` pixels: a pixel survives when
/// every pixel within `k/2` of it is set. `k = 1` is the identity.
pub fn erode_disk(mask: &Mask, k: u32) -> Mask {
    if k <= 1 {
        return mask.clone();
    }
    let limit = (k as f64) * (k as f64) / 4.0;
    let d2 = squared_distance(mask);
    Mask {
        width: mask.width,
        height: mask.height,
        bits: d2.into_iter().map(|d| d > limit).collect(),
    }
}

/// 3×3 square erosion; out-of-raster neighbours are neutral.
pub fn erode3(mask: &Mask) -> Mask {
    filter3(mask, true)
}

/// 3×3 square dilation; out-of-raster neighbours are neutral.
pub fn dilate3(mask: &Mask) -> Mask {
    filter3(mask, false)
}

pub fn open3(mask: &Mask) -> Mask {
    dilate3(&erode3(mask))
}

pub fn close3(mask: &Mask) -> Mask {
    erode3(&dilate3(mask))
}

fn filter3(mask: &Mask, all: bool) -> Mask {
    let (w, h) = (mask.width, mask.height);
    Mask::from_fn(w, h, |x, y| {
        let mut acc = all;
        for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                let b = mask.get(nx, ny);
                if all {
                    acc &= b;
                } else {
                    acc |= b;
                }
            }
        }
        acc
    })
}
