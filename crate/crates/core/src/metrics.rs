//! PSNR, SSIM and render-vs-render comparison reports.
//!
//! Metrics run on real-valued images before 8-bit quantization, with peak
//! value 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projection::Camera;
use crate::rasterizer::{render, Image, PerfCounters, RasterConfig, RasterError};
use crate::scene_io::SceneFile;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")]
    TooSmall,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

fn check_dims(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::DimensionMismatch(
            (a.width, a.height),
            (b.width, b.height),
        ));
    }
    Ok(())
}

/// Mean squared error over all channels.
pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let n = (a.pixels.len() * 3) as f64;
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).powi(2)))
        .sum();
    Ok(sum / n)
}

/// `10 log10(1 / MSE)`; `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    let e = mse(a, b)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * e.log10()
    })
}

pub fn max_abs_diff(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    Ok(a.pixels
        .iter()
        .zip(&b.pixels)
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs()))
        .fold(0.0, f64::max))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Separable "valid" filtering: output is `(w − 10) × (h − 10)`.
fn filter_valid(data: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let line = &data[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| w[k] * line[x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW)
                .map(|k| w[k] * rows[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

fn channel_ssim(a: &[f64], b: &[f64], width: usize, height: usize) -> f64 {
    let w = gaussian_window();
    let prod = |f: &dyn Fn(usize) -> f64| (0..a.len()).map(f).collect::<Vec<f64>>();
    let mu_a = filter_valid(a, width, height, &w);
    let mu_b = filter_valid(b, width, height, &w);
    let aa = filter_valid(&prod(&|i| a[i] * a[i]), width, height, &w);
    let bb = filter_valid(&prod(&|i| b[i] * b[i]), width, height, &w);
    let ab = filter_valid(&prod(&|i| a[i] * b[i]), width, height, &w);
    let n = mu_a.len();
    (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
        })
        .sum::<f64>()
        / n as f64
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall);
    }
    let plane = |img: &Image, c: usize| img.pixels.iter().map(|p| p[c]).collect::<Vec<f64>>();
    let total: f64 = (0..3)
        .map(|c| channel_ssim(&plane(a, c), &plane(b, c), w, h))
        .sum();
    Ok(total / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// `+∞` (serialized as `null` in JSON) when the renders are identical.
    #[serde(with = "infinite_as_null")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub max_abs_diff: f64,
    pub counters_a: PerfCounters,
    pub counters_b: PerfCounters,
    pub pair_ratio: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Ratio `b / a` of tight-test tile pairs.
pub fn pair_ratio(a: &PerfCounters, b: &PerfCounters) -> f64 {
    let (pa, pb) = (a.tile_pairs_after_tight_test, b.tile_pairs_after_tight_test);
    if pa == 0 {
        if pb == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        pb as f64 / pa as f64
    }
}

/// Renders both configurations; `cfg_a` is the reference. Images are
/// composited on each configuration's background and clamped to `[0, 1]`.
pub fn compare(
    scene: &SceneFile,
    cam: &Camera,
    cfg_a: &RasterConfig,
    cfg_b: &RasterConfig,
) -> Result<CompareReport, MetricsError> {
    let (fb_a, counters_a) = render(&scene.splats, scene.sh_degree, cam, cfg_a)?;
    let (fb_b, counters_b) = render(&scene.splats, scene.sh_degree, cam, cfg_b)?;
    let img_a = fb_a.composite(cfg_a.background).clamped();
    let img_b = fb_b.composite(cfg_b.background).clamped();
    Ok(CompareReport {
        psnr_db: psnr(&img_a, &img_b)?,
        ssim: ssim(&img_a, &img_b)?,
        max_abs_diff: max_abs_diff(&img_a, &img_b)?,
        pair_ratio: pair_ratio(&counters_a, &counters_b),
        counters_a,
        counters_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: u32, invert: bool) -> Image {
        let mut img = Image::filled(n, n, [0.0; 3]);
        for y in 0..n {
            for x in 0..n {
                let on = ((x + y) % 2 == 0) ^ invert;
                img.pixels[(y * n + x) as usize] = [if on { 1.0 } else { 0.0 }; 3];
            }
        }
        img
    }

    #[test]
    fn psnr_trivial_values() {
        let zero = Image::filled(8, 8, [0.0; 3]);
        assert_eq!(psnr(&zero, &zero).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&zero, &Image::filled(8, 8, [1.0; 3])).unwrap(), 0.0);
        let tenth = Image::filled(8, 8, [0.1; 3]);
        assert!((psnr(&zero, &tenth).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Image::filled(8, 8, [0.0; 3]);
        let b = Image::filled(8, 9, [0.0; 3]);
        assert!(matches!(
            psnr(&a, &b),
            Err(MetricsError::DimensionMismatch(..))
        ));
        assert!(matches!(
            ssim(&a, &b),
            Err(MetricsError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let a = checkerboard(16, false);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&a, &checkerboard(16, true)).unwrap() < 0.0);
        let small = Image::filled(10, 10, [0.0; 3]);
        assert_eq!(ssim(&small, &small), Err(MetricsError::TooSmall));
    }

    #[test]
    fn report_json_keeps_infinity() {
        let r = CompareReport {
            psnr_db: f64::INFINITY,
            ssim: 1.0,
            max_abs_diff: 0.0,
            counters_a: PerfCounters::default(),
            counters_b: PerfCounters::default(),
            pair_ratio: 1.0,
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"psnr_db\":null"));
        let back: CompareReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
