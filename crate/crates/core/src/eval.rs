//! PSNR, SSIM, endpoint error and temporal profiles.

use crate::error::{Error, Result};
use crate::frame::{rgb_to_luma, Frame};
use crate::motion::MotionField;

/// Reported PSNR for (numerically) identical inputs.
pub const PSNR_CAP: f64 = 99.0;
const MSE_FLOOR: f64 = 1e-10;

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Default interior crop for endpoint error.
pub const DEFAULT_EPE_CROP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorMode {
    Rgb,
    /// Evaluate on BT.601 luma only.
    Luma,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub psnr: f64,
    pub ssim: f64,
    pub epe_mean: Option<f64>,
    pub epe_p90: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpeStats {
    pub mean: f64,
    pub p90: f64,
}

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let sum: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x.clamp(0.0, 1.0) as f64 - y.clamp(0.0, 1.0) as f64;
            d * d
        })
        .sum();
    Ok(sum / a.samples().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < MSE_FLOOR {
        PSNR_CAP
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// PSNR with peak 1 over all samples, after clamping both inputs to `[0, 1]`.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-mode separable filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// PSNR over the interior left after removing `border` pixels on every side.
pub fn psnr_interior(a: &Frame, b: &Frame, border: usize) -> Result<f64> {
    a.ensure_same_shape(b)?;
    psnr(&a.interior(border)?, &b.interior(border)?)
}

/// Single-scale SSIM (11×11 Gaussian window, σ = 1.5, K1 = 0.01, K2 = 0.03,
/// L = 1), averaged over all positions where the window fits.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_shape(b)?;
    if a.channels() != 1 {
        return Err(Error::ChannelCount {
            expected: "1 (convert with rgb_to_luma)",
            found: a.channels(),
        });
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall(format!("SSIM needs >= {SSIM_WINDOW} px per side, got {w}x{h}")));
    }
    let pa: Vec<f64> = a.samples().iter().map(|v| v.clamp(0.0, 1.0) as f64).collect();
    let pb: Vec<f64> = b.samples().iter().map(|v| v.clamp(0.0, 1.0) as f64).collect();
    let k = gaussian_kernel();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&pa, w, h, &k);
    let mu_b = filter_valid(&pb, w, h, &k);
    let e_aa = filter_valid(&prod(&pa, &pa), w, h, &k);
    let e_bb = filter_valid(&prod(&pb, &pb), w, h, &k);
    let e_ab = filter_valid(&prod(&pa, &pb), w, h, &k);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
        })
        .sum();
    Ok(total / n as f64)
}

/// PSNR and SSIM. In RGB mode SSIM is computed on luma; in luma mode both
/// metrics use luma.
pub fn evaluate(a: &Frame, b: &Frame, mode: ColorMode) -> Result<Metrics> {
    a.ensure_same_shape(b)?;
    let to_y = |f: &Frame| if f.channels() == 3 { rgb_to_luma(f) } else { Ok(f.clone()) };
    let (ya, yb) = (to_y(a)?, to_y(b)?);
    let psnr = match mode {
        ColorMode::Rgb => psnr(a, b)?,
        ColorMode::Luma => psnr(&ya, &yb)?,
    };
    Ok(Metrics {
        psnr,
        ssim: ssim(&ya, &yb)?,
        epe_mean: None,
        epe_p90: None,
    })
}

/// Mean and 90th percentile (nearest rank) of per-pixel vector distance,
/// excluding `border_crop` pixels on every side.
pub fn endpoint_error(field: &MotionField, gt: &MotionField, border_crop: usize) -> Result<EpeStats> {
    if field.dims() != gt.dims() {
        return Err(Error::dims(
            format!("{}x{}", gt.width(), gt.height()),
            format!("{}x{}", field.width(), field.height()),
        ));
    }
    let (w, h) = field.dims();
    if 2 * border_crop >= w || 2 * border_crop >= h {
        return Err(Error::TooSmall(format!("crop {border_crop} leaves nothing of {w}x{h}")));
    }
    let mut d = Vec::with_capacity((w - 2 * border_crop) * (h - 2 * border_crop));
    for y in border_crop..h - border_crop {
        for x in border_crop..w - border_crop {
            let (a, b) = field.get(x, y);
            let (p, q) = gt.get(x, y);
            d.push(((a - p) as f64).hypot((b - q) as f64));
        }
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.sort_by(f64::total_cmp);
    let rank = ((0.9 * d.len() as f64).ceil() as usize).clamp(1, d.len());
    Ok(EpeStats {
        mean,
        p90: d[rank - 1],
    })
}

/// Stacks row `row` of every frame into a `width x frames` image.
pub fn temporal_profile(frames: &[Frame], row: usize) -> Result<Frame> {
    if frames.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "temporal profile needs >= 2 frames, got {}",
            frames.len()
        )));
    }
    for f in &frames[1..] {
        frames[0].ensure_same_shape(f)?;
    }
    let (w, h, ch) = (frames[0].width(), frames[0].height(), frames[0].channels());
    if row >= h {
        return Err(Error::OutOfBounds(format!("row {row} of height {h}")));
    }
    Ok(Frame::from_fn(w, frames.len(), ch, |x, t, c| frames[t].get(x, row, c)))
}

/// Mean absolute difference between consecutive rows of a profile; lower
/// means less temporal flicker.
pub fn profile_flicker(profile: &Frame) -> f64 {
    let (w, h) = (profile.width(), profile.height());
    let mut sum = 0.0;
    let mut n = 0usize;
    for c in 0..profile.channels() {
        for t in 1..h {
            for x in 0..w {
                sum += (profile.get(x, t, c) - profile.get(x, t - 1, c)).abs() as f64;
                n += 1;
            }
        }
    }
    sum / n as f64
}

/// `metric name=<name> value=<value>` with four decimals.
pub fn format_metric(name: &str, value: f64) -> String {
    format!("metric name={name} value={value:.4}")
}
