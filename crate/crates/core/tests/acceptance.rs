//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Set `FDRSKY_REAL_HDRI` to a `:`-separated list of linear HDR files to add
//! them to the energy-retention corpus.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::{DateTime, Utc};
use fdrsky::losskit::{
    hinge_d, hinge_g, parametric_boost, scale_invariant_loss, selective_loss, BoostImage, BoostParams, LossBase,
};
use fdrsky::metrics::{
    clip_exposure, match_exposure, mean_luminance, sensitivity_sweep, ClipSpec, Metric, Space,
    SweepConfig,
};
use fdrsky::resample::remap_unchecked;
use fdrsky::skylabel::{
    continuous_label, erode_disk, segment, solar_position, LabelConfig, PerlinConfig, SunPosition,
};
use fdrsky::tonemap::{self, log_space, nonlinearity_profile, ToneMapOp};
use fdrsky::{
    codec, convert_format, exposure_value, integrated_illumination, resize, solid_angles, EnvFormat, EnvMap, Grid,
    InterpMethod, Mask,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{background, fdr_sky, random_sky, smooth_latlong, SUN_RADIANCE};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ii(img: &EnvMap) -> f64 {
    let omega = solid_angles(img.format(), img.width(), img.height()).unwrap();
    integrated_illumination(img, &omega, None).unwrap()
}

fn ev(img: &EnvMap) -> f64 {
    exposure_value(img).unwrap()
}

fn tonemap_bijection() -> Outcome {
    let start = Instant::now();
    let mut xs = vec![0.0];
    xs.extend(log_space(2f64.powi(-20), 2f64.powi(22), 99_999));
    let mut worst = 0.0f64;
    for op in ToneMapOp::catalogue() {
        for &x in &xs {
            let back = op.inverse(op.forward(x)).unwrap_or(f64::NAN);
            let err = if x == 0.0 { back.abs() } else { (back - x).abs() / x };
            worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 5.0,
        format!("max relative error {worst:.2e} over {} ops, {secs:.2}s", ToneMapOp::catalogue().len()),
    )
}

fn nonlinearity_profile_check() -> Outcome {
    let xs = log_space(2f64.powi(-10), 2f64.powi(22), 2000);
    let mut monotone = true;
    for op in ToneMapOp::catalogue().into_iter().filter(ToneMapOp::is_concave) {
        let p = nonlinearity_profile(op, 0.01, &xs).unwrap();
        // slack of a few ulps of I absorbs the rounding of T⁻¹(T(I) − δ)
        monotone &= p.windows(2).all(|w| w[1].delta >= w[0].delta - 1e-12 * w[1].intensity);
    }
    let mu = ToneMapOp::mu_law_log2(5000.0);
    let p = nonlinearity_profile(mu, 0.01, &[1.0, 32768.0]).unwrap();
    let ratio = p[1].delta / p[0].delta;
    outcome(monotone && ratio > 1e3, format!("monotone={monotone}, Δ(2^15)/Δ(1)={ratio:.1}"))
}

fn solid_angle_conservation() -> Outcome {
    let sa = solid_angles(EnvFormat::SkyAngular, 512, 512).unwrap().total();
    let ll = solid_angles(EnvFormat::LatLong, 1024, 512).unwrap().total();
    let e_sa = (sa - 2.0 * PI).abs() / (2.0 * PI);
    let e_ll = (ll - 4.0 * PI).abs() / (4.0 * PI);
    outcome(
        e_sa < 0.01 && e_ll < 0.001,
        format!("sky-angular 512² error {e_sa:.2e}, latlong 1024x512 error {e_ll:.2e}"),
    )
}

fn real_hdris() -> Vec<EnvMap> {
    std::env::var("FDRSKY_REAL_HDRI")
        .map(|v| {
            v.split(':')
                .filter(|s| !s.is_empty())
                .map(|p| codec::load(Path::new(p), None).expect("readable HDRI"))
                .collect()
        })
        .unwrap_or_default()
}

fn energy_retention() -> Outcome {
    let mut skies: Vec<EnvMap> = (0..25).map(|s| random_sky(EnvFormat::SkyAngular, 256, s)).collect();
    skies.extend((0..25).map(|s| fdr_sky(256, s)));
    let real = real_hdris();
    let n_real = real.len();
    skies.extend(real);
    let mut worst = f64::INFINITY;
    for img in &skies {
        let down = resize(img, img.width() / 2, img.height() / 2, InterpMethod::Area).unwrap();
        worst = worst.min(ii(&down) / ii(img));
    }
    let impulse = impulse_sky(512);
    let ev0 = ev(&impulse);
    let ev_bilinear = ev(&resize(&impulse, 256, 256, InterpMethod::Bilinear).unwrap());
    let ev_max = ev(&resize(&impulse, 256, 256, InterpMethod::MaxPool).unwrap());
    outcome(
        worst >= 0.99 && ev_bilinear < ev0 && ev_max == ev0,
        format!(
            "area retains >= {:.4} on {} skies ({n_real} real); EV {ev0:.4} -> bilinear {ev_bilinear:.4}, max-pool {ev_max:.4}",
            worst,
            skies.len()
        ),
    )
}

/// Constant background with a 2x2 sun at the center, so both the minimum
/// and the maximum survive max pooling.
fn impulse_sky(size: usize) -> EnvMap {
    let c = size / 2;
    EnvMap::from_fn(EnvFormat::SkyAngular, size, size, |x, y| {
        if (c - 1..=c).contains(&x) && (c - 1..=c).contains(&y) {
            [SUN_RADIANCE; 3]
        } else {
            [0.5, 0.6, 0.8]
        }
    })
    .unwrap()
}

fn no_recovery() -> Outcome {
    let mut corpus: Vec<EnvMap> = (0..3).map(|s| fdr_sky(128, s)).collect();
    corpus.extend((0..3).map(|s| random_sky(EnvFormat::SkyAngular, 128, s)));
    corpus.extend((0..2).map(|s| random_sky(EnvFormat::LatLong, 256, s)));
    corpus.extend(real_hdris());
    let ups = [InterpMethod::Nearest, InterpMethod::Bilinear, InterpMethod::LinearSpline];
    let mut violations = Vec::new();
    let mut pairs = 0;
    for (k, img) in corpus.iter().enumerate() {
        let (w, h) = (img.width(), img.height());
        let e0 = ev(img);
        for down in InterpMethod::ALL {
            let small = resize(img, w / 2, h / 2, down).unwrap();
            for up in ups {
                pairs += 1;
                let back = resize(&small, w, h, up).unwrap();
                let e = ev(&back);
                if e > e0 {
                    violations.push(format!("#{k} {down}->{up}: {e} > {e0}"));
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{pairs} image/method-pair cases, violations: {violations:?}"),
    )
}

/// Pixels of a LatLong raster whose centers lie above the horizon.
fn upper_hemisphere(width: usize) -> Mask {
    Mask::from_fn(width, width / 2, |_, y| y < width / 4)
}

fn format_conversion() -> Outcome {
    let mut worst = f64::INFINITY;
    for seed in 0..10 {
        let img = smooth_latlong(512, seed);
        let omega = solid_angles(EnvFormat::LatLong, 512, 256).unwrap();
        let src = integrated_illumination(&img, &omega, Some(&upper_hemisphere(512))).unwrap();
        let sky = convert_format(&img, EnvFormat::SkyAngular, None, InterpMethod::LinearSpline).unwrap();
        worst = worst.min(ii(&sky) / src);
    }
    let op = ToneMapOp::mu_law_log2(5000.0);
    let mut strictly_less = 0;
    let n = 10;
    for seed in 0..n {
        let img = random_sky(EnvFormat::LatLong, 512, 100 + seed);
        let grid = Grid::new(EnvFormat::SkyAngular, 256, 256).unwrap();
        let linear = remap_unchecked(&img, grid, InterpMethod::LinearSpline, 0.0).unwrap();
        let compressed = tonemap::apply(op, &img).unwrap();
        let remapped = remap_unchecked(&compressed, grid, InterpMethod::LinearSpline, 0.0).unwrap();
        let back = tonemap::invert(op, &remapped).unwrap();
        if ii(&back) < ii(&linear) {
            strictly_less += 1;
        }
    }
    outcome(
        worst >= 0.99 && strictly_less == n,
        format!("smooth skies retain >= {worst:.4}; compressed-space < linear on {strictly_less}/{n} FDR skies"),
    )
}

/// Independent per-pixel solid angle of an equidistant fisheye raster.
fn fisheye_omega(size: usize, x: usize, y: usize) -> f64 {
    let u = (2.0 * x as f64 + 1.0 - size as f64) / size as f64;
    let v = (2.0 * y as f64 + 1.0 - size as f64) / size as f64;
    let r = (u * u + v * v).sqrt();
    if r > 1.0 {
        return 0.0;
    }
    let area = (2.0 / size as f64).powi(2);
    let theta = r * FRAC_PI_2;
    // sin θ dθ dφ with dθ = (π/2) dr, r dr dφ = du dv
    let jac = if r == 0.0 { FRAC_PI_2 } else { theta.sin() / r };
    jac * FRAC_PI_2 * area
}

fn clipping_locality() -> Outcome {
    let size = 512;
    let img = fdr_sky(size, 1);
    let omega = solid_angles(EnvFormat::SkyAngular, size, size).unwrap();
    let clipped = clip_exposure(&img, ClipSpec::new(9.0), &omega).unwrap();
    let changed = img.pixels().iter().zip(clipped.pixels()).filter(|(a, b)| a != b).count();

    let c = size / 2;
    let sun = Mask::from_fn(size, size, |x, y| (c - 1..=c).contains(&x) && (c - 1..=c).contains(&y));
    let measured = integrated_illumination(&img, &omega, Some(&sun)).unwrap() / ii(&img);

    let grid = Grid::new(EnvFormat::SkyAngular, size, size).unwrap();
    let (mut sun_ii, mut total) = (0.0, 0.0);
    for y in 0..size {
        for x in 0..size {
            let w = fisheye_omega(size, x, y);
            let is_sun = sun.get(x, y);
            let y_lum = match (is_sun, grid.pixel_spherical(x, y)) {
                (true, _) => SUN_RADIANCE as f64,
                (false, Some(s)) => {
                    let p = background(s.theta, s.phi, 1).map(f64::from);
                    0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]
                }
                (false, None) => 0.0,
            };
            total += w * y_lum;
            if is_sun {
                sun_ii += w * y_lum;
            }
        }
    }
    let analytic = sun_ii / total;
    let err = (measured - analytic).abs();
    outcome(
        changed == 4 && err < 1e-6,
        format!("{changed} pixels altered; sun share {measured:.6} vs construction {analytic:.6} (diff {err:.1e})"),
    )
}

fn metric_sensitivity() -> Outcome {
    let img = fdr_sky(512, 1);
    let omega = solid_angles(EnvFormat::SkyAngular, 512, 512).unwrap();
    let cfg = SweepConfig {
        thresholds: (9..=15).rev().map(f64::from).collect(),
        metrics: vec![Metric::Psnr2, Metric::Ssim, Metric::EvDist],
        spaces: vec![Space::Hdr],
        ldr_op: ToneMapOp::mu_law_log2(5000.0),
    };
    let table = sensitivity_sweep(&img, &cfg, &omega).unwrap();
    let ssim = table.column("ssim_hdr").unwrap();
    let psnr = table.column("psnr2_hdr").unwrap();
    let evd = table.column("ev_dist_hdr").unwrap();
    let spread = ssim.iter().cloned().fold(f64::MIN, f64::max) - ssim.iter().cloned().fold(f64::MAX, f64::min);
    let psnr_down = psnr.windows(2).all(|w| w[1] < w[0]);
    let ev_up = evd.windows(2).all(|w| w[1] > w[0]);
    outcome(
        spread <= 1e-3 && psnr_down && ev_up,
        format!(
            "SSIM spread {spread:.2e}; PSNR2 {:.1} -> {:.1} decreasing={psnr_down}; EV distance {:.3} -> {:.3} increasing={ev_up}",
            psnr[0],
            psnr[psnr.len() - 1],
            evd[0],
            evd[evd.len() - 1]
        ),
    )
}

fn loss_kernels() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..1000).map(|_| rng.gen_range(1e-3..1e4)).collect();
    let si_worst = [0.1, 1.0, 7.0]
        .iter()
        .map(|c| {
            let y: Vec<f64> = x.iter().map(|v| v * c).collect();
            scale_invariant_loss(&x, &y).unwrap()
        })
        .fold(0.0, f64::max);

    let mut hinge_err = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(1..64);
        let real: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let fake: Vec<f64> = (0..n + 3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let delta = rng.gen_range(0.1..2.0);
        let mut g = 0.0;
        for p in &fake {
            if delta - p > 0.0 {
                g += delta - p;
            }
        }
        g /= fake.len() as f64;
        let (mut dr, mut df) = (0.0, 0.0);
        for p in &real {
            if delta - p > 0.0 {
                dr += delta - p;
            }
        }
        for p in &fake {
            if delta + p > 0.0 {
                df += delta + p;
            }
        }
        let d = (dr / real.len() as f64 + df / fake.len() as f64) / 2.0;
        hinge_err = hinge_err.max((hinge_g(&fake, delta).unwrap() - g).abs());
        hinge_err = hinge_err.max((hinge_d(&real, &fake, delta).unwrap() - d).abs());
    }

    let a = random_sky(EnvFormat::SkyLatLong, 64, 1);
    let b = random_sky(EnvFormat::SkyLatLong, 64, 2);
    let full = Mask::filled(64, 16, true);
    let mut sel_err = 0.0f64;
    for (base, global) in [
        (LossBase::L1, fdrsky::metrics::mae(&a, &b, None).unwrap()),
        (LossBase::L2, fdrsky::metrics::mse(&a, &b, None).unwrap()),
    ] {
        let s = selective_loss(base, &a, &b, &full).unwrap();
        sel_err = sel_err.max((s - global).abs() / global.abs().max(1.0));
    }

    let boost_err = boost_oracle_error();
    outcome(
        si_worst <= 1e-12 && hinge_err <= 1e-12 && sel_err <= 1e-12 && boost_err <= 1e-9,
        format!(
            "scale-invariant max {si_worst:.1e}; hinge diff {hinge_err:.1e}; selective diff {sel_err:.1e}; boost diff {boost_err:.1e}"
        ),
    )
}

/// Paper-preset boost against a literal step-by-step evaluation.
#[allow(clippy::manual_clamp)]
fn boost_oracle_error() -> f64 {
    let batch: Vec<Vec<[f64; 3]>> = [0.2, 0.5, 0.9, 1.0]
        .iter()
        .map(|scale| {
            (0..16)
                .map(|i| {
                    let t = i as f64 / 15.0 * scale;
                    [t, 0.8 * t, 1.2 * t]
                })
                .collect()
        })
        .collect();
    let (rho, theta, gamma, beta) = (4.0, 0.83, 1.0, 0.7);
    let lum = |p: &[f64; 3]| 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2];
    let means: Vec<f64> = batch.iter().map(|im| im.iter().map(lum).sum::<f64>() / 16.0).collect();
    let max_mean = means.iter().cloned().fold(f64::MIN, f64::max);
    let mut expected = Vec::new();
    for (im, mean) in batch.iter().zip(&means) {
        let mut m = mean / max_mean - theta;
        if m < 0.0 {
            m = 0.0;
        }
        if m > 1.0 {
            m = 1.0;
        }
        let lifted: Vec<[f64; 3]> = im.iter().map(|p| p.map(|v| v + v * m * rho)).collect();
        let lifted_mean = lifted.iter().map(lum).sum::<f64>() / 16.0;
        expected.push(
            lifted
                .iter()
                .map(|p| p.map(|v| ((v - lifted_mean) * gamma - beta).exp()))
                .collect::<Vec<_>>(),
        );
    }
    let inputs: Vec<BoostImage> = batch
        .iter()
        .map(|im| BoostImage {
            pixels: im.clone(),
            valid: None,
        })
        .collect();
    let got = parametric_boost(&inputs, &BoostParams::PAPER).unwrap();
    let mut err = 0.0f64;
    for (g, e) in got.iter().zip(&expected) {
        for (p, q) in g.pixels.iter().zip(e) {
            for c in 0..3 {
                err = err.max((p[c] - q[c]).abs());
            }
        }
    }
    err
}

fn exposure_matching() -> Outcome {
    let real = random_sky(EnvFormat::SkyAngular, 128, 9);
    let fake = real.map_pixels(|p| p.map(|v| v / 2.0));
    let (alpha, matched) = match_exposure(&real, &fake).unwrap();
    let (alpha2, again) = match_exposure(&real, &matched).unwrap();
    let mean_ok = (mean_luminance(&matched).unwrap() / mean_luminance(&real).unwrap() - 1.0).abs() < 1e-12;
    outcome(
        alpha == 2.0 && alpha2 == 1.0 && again == matched && mean_ok,
        format!("alpha {alpha}, second application alpha {alpha2}, unchanged={}", again == matched),
    )
}

/// Blue sky with grey cloud blobs and an optional sun.
fn cloudy_sky(size: usize, seed: u64) -> EnvMap {
    let grid = Grid::new(EnvFormat::SkyAngular, size, size).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..6))
        .map(|_| (rng.gen_range(0.0..1.4), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.1..0.5)))
        .collect();
    EnvMap::from_fn(EnvFormat::SkyAngular, size, size, |x, y| match grid.pixel_spherical(x, y) {
        Some(s) => {
            let d = s.to_dir();
            let cloudy = blobs.iter().any(|(t, p, r)| {
                let b = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                (d[0] * b[0] + d[1] * b[1] + d[2] * b[2]).acos() < *r
            });
            if cloudy {
                [0.6, 0.6, 0.62]
            } else {
                [0.001, 0.01, 0.2]
            }
        }
        None => [0.0; 3],
    })
    .unwrap()
}

fn label_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut partitions = 0;
    for k in 0..100 {
        let size = [32, 48, 64][k % 3];
        let img = cloudy_sky(size, k as u64);
        let sun = SunPosition::from_angles(rng.gen_range(-20.0..90.0), rng.gen_range(0.0..360.0));
        let cfg = LabelConfig {
            kernel: [1, 3, 5, 7][rng.gen_range(0..4)],
            threshold: rng.gen_range(-0.5..0.8),
            sun_diameter: rng.gen_range(1.0..20.0),
            ..LabelConfig::default()
        };
        if segment(&img, &sun, &cfg).unwrap().maps.is_partition() {
            partitions += 1;
        }
    }

    let img = cloudy_sky(128, 4);
    let seg = segment(&img, &SunPosition::from_angles(50.0, 120.0), &LabelConfig::default()).unwrap();
    let crude = seg.crude_cloud;
    let (k1, k7, k15) = (erode_disk(&crude, 1), erode_disk(&crude, 7), erode_disk(&crude, 15));
    let monotone = k15.is_subset_of(&k7) && k7.is_subset_of(&k1) && k15.count() < k1.count();

    let cfg = LabelConfig {
        kernel: 5,
        perlin: PerlinConfig {
            seed: 77,
            ..PerlinConfig::default()
        },
        ..LabelConfig::default()
    };
    let sun = SunPosition::from_angles(50.0, 120.0);
    let omega = solid_angles(EnvFormat::SkyAngular, 128, 128).unwrap();
    let run = || {
        let seg = segment(&img, &sun, &cfg).unwrap();
        continuous_label(&seg.maps, &seg.sun, &omega, &cfg).unwrap()
    };
    let first = run();
    let second = run();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let bits = |l: &fdrsky::skylabel::ContinuousLabel| -> Vec<u32> {
        l.data.iter().flat_map(|p| p.map(f32::to_bits)).collect()
    };
    let identical = bits(&first) == bits(&second) && bits(&first) == bits(&single);
    outcome(
        partitions == 100 && monotone && identical,
        format!(
            "partition {partitions}/100; |k15|={} <= |k7|={} <= |k1|={} nested={monotone}; continuous labels identical={identical}",
            k15.count(),
            k7.count(),
            k1.count()
        ),
    )
}

fn solar_positions() -> Outcome {
    // (UTC time, latitude, longitude, elevation, azimuth) from NREL SPA
    let rows: [(&str, f64, f64, f64, f64); 10] = [
        ("2016-06-07T17:54:00Z", 46.8139, -71.2080, 62.1732, 216.5251),
        ("2014-11-20T15:30:00Z", 46.8139, -71.2080, 22.0381, 164.6472),
        ("2015-03-20T12:07:00Z", 0.0, 0.0, 89.7776, 141.9580),
        ("2020-12-21T03:00:00Z", -33.8688, 151.2093, 72.0655, 301.2095),
        ("2019-07-04T12:00:00Z", 51.4779, -0.0015, 61.3803, 177.8818),
        ("2021-06-21T22:00:00Z", 69.6492, 18.9553, 3.4517, 349.4125),
        ("2010-09-23T06:30:00Z", 35.6762, 139.6503, 24.6720, 250.6642),
        ("2023-01-15T20:15:00Z", 39.7392, -104.9903, 27.3006, 197.2584),
        ("2016-02-29T09:45:00Z", -22.9068, -43.1729, 12.1387, 93.3493),
        ("2024-08-10T14:20:00Z", 64.1466, -21.9426, 40.4853, 194.9478),
    ];
    let mut worst_el = 0.0f64;
    let mut worst_sep = 0.0f64;
    let mut worst_az = 0.0f64;
    for (t, lat, lon, el, az) in rows {
        let t: DateTime<Utc> = t.parse().unwrap();
        let got = solar_position(t, lat, lon).unwrap();
        worst_el = worst_el.max((got.elevation - el).abs());
        let want = SunPosition::from_angles(el, az).direction;
        let dot: f64 = (0..3).map(|i| got.direction[i] * want[i]).sum();
        worst_sep = worst_sep.max(dot.clamp(-1.0, 1.0).acos().to_degrees());
        // azimuth is ill-conditioned near the zenith
        if el < 80.0 {
            let d = (got.azimuth - az).rem_euclid(360.0);
            worst_az = worst_az.max(d.min(360.0 - d));
        }
    }
    outcome(
        worst_el <= 0.2 && worst_sep <= 0.2 && worst_az <= 0.2,
        format!("max deviation: elevation {worst_el:.4}°, azimuth {worst_az:.4}°, direction {worst_sep:.4}°"),
    )
}

const BIN: &str = env!("CARGO_BIN_EXE_fdrsky");

/// Shared inputs for the CLI determinism runs.
fn cli_fixture(dir: &Path) -> BTreeMap<&'static str, PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    let mut f = BTreeMap::new();
    let sky = dir.join("sky.pfm");
    codec::save(&sky, &fdr_sky(192, 3)).unwrap();
    f.insert("sky", sky);
    let other = dir.join("other.pfm");
    codec::save(&other, &random_sky(EnvFormat::SkyAngular, 192, 4)).unwrap();
    f.insert("other", other);
    let ll = dir.join("ll.hdr");
    codec::save(&ll, &smooth_latlong(128, 2)).unwrap();
    f.insert("ll", ll);
    let cloudy = dir.join("cloudy.pfm");
    codec::save(&cloudy, &cloudy_sky(64, 8)).unwrap();
    f.insert("cloudy", cloudy);
    for (name, seed) in [("ldr_a", 5), ("ldr_b", 6)] {
        let p = dir.join(format!("{name}.pfm"));
        let ldr = random_sky(EnvFormat::SkyAngular, 64, seed).map_pixels(|q| q.map(|v| (v / (1.0 + v)).powf(0.45)));
        codec::save(&p, &ldr).unwrap();
        f.insert(name, p);
    }
    let ds = dir.join("dataset");
    for (day, hours) in [("20160607", [13, 15, 17, 19]), ("20160608", [12, 14, 16, 18]), ("20160609", [13, 16, 20, 23])] {
        let d = ds.join(day);
        std::fs::create_dir_all(&d).unwrap();
        for (i, h) in hours.iter().enumerate() {
            let img = random_sky(EnvFormat::SkyAngular, 32, (*h * 10 + i) as u64);
            codec::save(&d.join(format!("{day}_{h:02}0000.pfm")), &img).unwrap();
        }
    }
    f.insert("dataset", ds);
    f
}

fn invocations(f: &BTreeMap<&'static str, PathBuf>) -> Vec<Vec<String>> {
    let p = |k: &str| f[k].to_string_lossy().into_owned();
    let ds = [
        "--root".to_string(),
        p("dataset"),
        "--latitude".into(),
        "46.8".into(),
        "--longitude".into(),
        "-71.2".into(),
    ];
    let mut v: Vec<Vec<String>> = vec![
        vec!["info".into(), p("sky")],
        vec!["convert".into(), p("ll"), "-o".into(), "conv.pfm".into(), "--to".into(), "sky-angular".into()],
        vec!["resize".into(), p("sky"), "-o".into(), "small.pfm".into(), "--width".into(), "96".into()],
        vec!["tonemap".into(), p("sky"), "-o".into(), "tm.pfm".into()],
        vec!["untonemap".into(), "tm.pfm".into(), "-o".into(), "lin.pfm".into()],
        vec![
            "segment".into(),
            p("cloudy"),
            "-o".into(),
            "seg.pfm".into(),
            "--masks".into(),
            "masks".into(),
            "--elevation".into(),
            "40".into(),
            "--azimuth".into(),
            "200".into(),
        ],
        vec![
            "label".into(),
            p("cloudy"),
            "-o".into(),
            "label.pfm".into(),
            "--timestamp".into(),
            "2016-06-07T17:54:00Z".into(),
            "--latitude".into(),
            "46.8139".into(),
            "--longitude".into(),
            "-71.208".into(),
            "--kernel".into(),
            "3".into(),
            "--seed".into(),
            "11".into(),
        ],
        vec!["metrics".into(), p("sky"), p("other"), "-o".into(), "metrics.csv".into()],
        vec![
            "sensitivity".into(),
            p("sky"),
            "--thresholds".into(),
            "15,13,11,9,7".into(),
            "--metrics".into(),
            "psnr2,ssim,ev,ii".into(),
            "-o".into(),
            "sens.csv".into(),
        ],
        vec!["clip".into(), p("sky"), "-o".into(), "clip.pfm".into(), "--ev".into(), "9".into(), "--equalize".into()],
        vec!["boost".into(), p("ldr_a"), p("ldr_b"), "--out-dir".into(), "boosted".into(), "--preset".into(), "paper".into()],
        vec!["match-exposure".into(), p("sky"), p("other"), "-o".into(), "matched.pfm".into()],
    ];
    let mut with = |cmd: &str, extra: &[&str]| {
        let mut a = vec![cmd.to_string()];
        a.extend(ds.iter().cloned());
        a.extend(extra.iter().map(|s| s.to_string()));
        v.push(a);
    };
    with("dataset-scan", &["-o", "scan.csv"]);
    with("dataset-split", &["--seed", "3", "-o", "split.csv"]);
    with("dataset-report", &["--with-split", "--seed", "3", "--cache", "cache.json", "-o", "report.json", "--json"]);
    with("mean-skydome", &["--augment", "-o", "mean.pfm"]);
    v
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let e = e.unwrap();
        // the cache records file mtimes, which legitimately differ between runs
        if e.file_type().is_file() && e.file_name() != "cache.json" {
            let rel = e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            out.insert(rel, std::fs::read(e.path()).unwrap());
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = cli_fixture(&tmp.path().join("inputs"));
    let cmds = invocations(&fixture);
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (r, threads) in ["1", "1", "8"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{r}"));
        std::fs::create_dir_all(&dir).unwrap();
        let mut stdout = BTreeMap::new();
        for args in &cmds {
            let out = Command::new(BIN)
                .args(["--threads", threads])
                .args(args)
                .current_dir(&dir)
                .output()
                .unwrap();
            if !out.status.success() {
                failures.push(format!("{} exited {:?}: {}", args[0], out.status.code(), String::from_utf8_lossy(&out.stderr)));
            }
            stdout.insert(args[0].clone(), out.stdout);
        }
        runs.push((snapshot(&dir), stdout));
    }
    let same_repeat = runs[0] == runs[1];
    let same_threads = runs[0] == runs[2];
    let subcommands: std::collections::BTreeSet<&str> = cmds.iter().map(|c| c[0].as_str()).collect();
    outcome(
        failures.is_empty() && same_repeat && same_threads && subcommands.len() == 16,
        format!(
            "{} subcommands, {} output files; repeat identical={same_repeat}, threads 1 vs 8 identical={same_threads}; failures: {failures:?}",
            subcommands.len(),
            runs[0].0.len()
        ),
    )
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 13] = [
        ("tonemap bijection", tonemap_bijection),
        ("nonlinearity profile", nonlinearity_profile_check),
        ("solid-angle conservation", solid_angle_conservation),
        ("energy retention", energy_retention),
        ("no-recovery", no_recovery),
        ("format conversion retention", format_conversion),
        ("clipping locality", clipping_locality),
        ("metric sensitivity", metric_sensitivity),
        ("loss kernels", loss_kernels),
        ("exposure matching", exposure_matching),
        ("label pipeline", label_pipeline),
        ("solar position", solar_positions),
        ("end-to-end determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
