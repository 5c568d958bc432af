//! Dense pyramidal Lucas–Kanade polish of an initial motion field.

use rayon::prelude::*;

use super::{MotionField, MotionParams};
use crate::error::Result;
use crate::frame::Frame;
use crate::warp::{backward_warp, sample_bilinear};

const MIN_EIGEN: f32 = 1e-6;
const MAX_STEP: f32 = 1.0;
const MIN_LEVEL_SIDE: usize = 16;

fn downsample_plane(src: &[f32], w: usize, h: usize) -> (Vec<f32>, usize, usize) {
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = vec![0.0f32; nw * nh];
    for y in 0..nh {
        let (y0, y1) = (2 * y, (2 * y + 1).min(h - 1));
        for x in 0..nw {
            let (x0, x1) = (2 * x, (2 * x + 1).min(w - 1));
            out[y * nw + x] =
                0.25 * (src[y0 * w + x0] + src[y0 * w + x1] + src[y1 * w + x0] + src[y1 * w + x1]);
        }
    }
    (out, nw, nh)
}

fn downsample_frame(f: &Frame) -> Frame {
    let (w, h) = (f.width(), f.height());
    let mut data = Vec::new();
    let (mut nw, mut nh) = (0, 0);
    for c in 0..f.channels() {
        let (p, a, b) = downsample_plane(f.plane(c), w, h);
        data.extend(p);
        (nw, nh) = (a, b);
    }
    Frame::from_planar(nw, nh, f.channels(), data).expect("finite input stays finite")
}

fn downsample_field(f: &MotionField) -> MotionField {
    let (w, h) = f.dims();
    let (mut dx, nw, nh) = downsample_plane(f.dx(), w, h);
    let (mut dy, _, _) = downsample_plane(f.dy(), w, h);
    dx.iter_mut().chain(dy.iter_mut()).for_each(|v| *v *= 0.5);
    MotionField::from_planes(nw, nh, dx, dy).expect("finite input stays finite")
}

fn upsample_field(f: &MotionField, w: usize, h: usize) -> MotionField {
    let (cw, ch) = f.dims();
    MotionField::from_fn(w, h, |x, y| {
        let sx = (x as f32 + 0.5) / 2.0 - 0.5;
        let sy = (y as f32 + 0.5) / 2.0 - 0.5;
        (
            2.0 * sample_bilinear(f.dx(), cw, ch, sx, sy),
            2.0 * sample_bilinear(f.dy(), cw, ch, sx, sy),
        )
    })
}

/// Running box mean with replicated borders, applied separably.
fn box_mean(src: &[f32], w: usize, h: usize, radius: usize) -> Vec<f32> {
    if radius == 0 {
        return src.to_vec();
    }
    let r = radius as isize;
    let norm = 1.0 / (2 * radius + 1) as f32;
    let mut tmp = vec![0.0f32; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for d in -r..=r {
                let xx = (x as isize + d).clamp(0, w as isize - 1) as usize;
                acc += src[y * w + xx];
            }
            *out = acc * norm;
        }
    });
    let mut out = vec![0.0f32; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for d in -r..=r {
                let yy = (y as isize + d).clamp(0, h as isize - 1) as usize;
                acc += tmp[yy * w + x];
            }
            *o = acc * norm;
        }
    });
    out
}

/// One Gauss–Newton step per pixel on the windowed brightness-constancy
/// residual, using the mean of warped-source and target gradients.
fn lk_step(source: &Frame, target: &Frame, field: &mut MotionField, radius: usize) -> Result<bool> {
    let (w, h) = (target.width(), target.height());
    let warped = backward_warp(source, field)?;
    let n = w * h;
    // pixels sampling outside the source only see clamped border values
    let valid: Vec<bool> = (0..n)
        .map(|i| {
            let (fx, fy) = ((i % w) as f32 + field.dx()[i], (i / w) as f32 + field.dy()[i]);
            fx >= 0.0 && fy >= 0.0 && fx <= (w - 1) as f32 && fy <= (h - 1) as f32
        })
        .collect();
    let mut sums = vec![vec![0.0f32; n]; 5];
    for c in 0..target.channels() {
        let (wp, tp) = (warped.plane(c), target.plane(c));
        for y in 0..h {
            let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for x in 0..w {
                let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let i = y * w + x;
                if !valid[i] {
                    continue;
                }
                let gx = 0.25 * (wp[y * w + xp] - wp[y * w + xm] + tp[y * w + xp] - tp[y * w + xm]);
                let gy = 0.25 * (wp[yp * w + x] - wp[ym * w + x] + tp[yp * w + x] - tp[ym * w + x]);
                let e = wp[i] - tp[i];
                sums[0][i] += gx * gx;
                sums[1][i] += gx * gy;
                sums[2][i] += gy * gy;
                sums[3][i] += gx * e;
                sums[4][i] += gy * e;
            }
        }
    }
    if sums[3].iter().chain(&sums[4]).all(|&v| v == 0.0) {
        return Ok(false);
    }
    let s: Vec<Vec<f32>> = sums.par_iter().map(|p| box_mean(p, w, h, radius)).collect();
    let mut du = vec![0.0f32; n];
    let mut dv = vec![0.0f32; n];
    for i in 0..n {
        let (axx, axy, ayy, bx, by) = (s[0][i], s[1][i], s[2][i], s[3][i], s[4][i]);
        if bx == 0.0 && by == 0.0 {
            continue;
        }
        let det = axx * ayy - axy * axy;
        let tr = axx + ayy;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        if 0.5 * (tr - disc) < MIN_EIGEN || det <= 0.0 {
            continue;
        }
        let mut u = -(ayy * bx - axy * by) / det;
        let mut v = -(axx * by - axy * bx) / det;
        let mag = (u * u + v * v).sqrt();
        if mag > MAX_STEP {
            u *= MAX_STEP / mag;
            v *= MAX_STEP / mag;
        }
        du[i] = u;
        dv[i] = v;
    }
    // independent per-pixel steps oscillate against their neighbors; smooth them
    let du = box_mean(&du, w, h, radius);
    let dv = box_mean(&dv, w, h, radius);
    let (dx, dy) = field.planes_mut();
    let mut moved = false;
    for i in 0..n {
        if du[i] != 0.0 || dv[i] != 0.0 {
            dx[i] += du[i];
            dy[i] += dv[i];
            moved = true;
        }
    }
    Ok(moved)
}

pub(super) fn polish(
    source: &Frame,
    target: &Frame,
    init: &MotionField,
    params: &MotionParams,
) -> Result<MotionField> {
    let radius = params.lk_window / 2;
    let mut src_pyr = vec![source.clone()];
    let mut tgt_pyr = vec![target.clone()];
    let mut init_pyr = vec![init.clone()];
    while src_pyr.len() < params.pyramid_levels {
        let last = src_pyr.last().unwrap();
        if last.width().min(last.height()) / 2 < MIN_LEVEL_SIDE {
            break;
        }
        let s = downsample_frame(last);
        let t = downsample_frame(tgt_pyr.last().unwrap());
        let f = downsample_field(init_pyr.last().unwrap());
        src_pyr.push(s);
        tgt_pyr.push(t);
        init_pyr.push(f);
    }

    // residual relative to the initial field, carried coarse to fine
    let top = src_pyr.len() - 1;
    let mut residual = MotionField::new(src_pyr[top].width(), src_pyr[top].height());
    let mut total = init.clone();
    for level in (0..=top).rev() {
        let (w, h) = (src_pyr[level].width(), src_pyr[level].height());
        if residual.dims() != (w, h) {
            residual = upsample_field(&residual, w, h);
        }
        total = select_lower_error(
            &src_pyr[level],
            &tgt_pyr[level],
            &init_pyr[level],
            &add_fields(&init_pyr[level], &residual),
            radius,
        )?;
        for _ in 0..params.lk_iterations {
            if !lk_step(&src_pyr[level], &tgt_pyr[level], &mut total, radius)? {
                break;
            }
            total.clamp_components(params.max_displacement / (1 << level) as f32);
        }
        residual = sub_fields(&total, &init_pyr[level]);
    }
    Ok(total)
}

/// Windowed squared warp error of `field`, summed over channels.
fn windowed_error(source: &Frame, target: &Frame, field: &MotionField, radius: usize) -> Result<Vec<f32>> {
    let warped = backward_warp(source, field)?;
    let (w, h) = (target.width(), target.height());
    let mut err = vec![0.0f32; w * h];
    for c in 0..target.channels() {
        for ((e, a), b) in err.iter_mut().zip(warped.plane(c)).zip(target.plane(c)) {
            *e += (a - b) * (a - b);
        }
    }
    Ok(box_mean(&err, w, h, radius))
}

/// Per pixel, the candidate with the lower windowed error; ties keep `a`.
fn select_lower_error(
    source: &Frame,
    target: &Frame,
    a: &MotionField,
    b: &MotionField,
    radius: usize,
) -> Result<MotionField> {
    if a == b {
        return Ok(a.clone());
    }
    let ea = windowed_error(source, target, a, radius)?;
    let eb = windowed_error(source, target, b, radius)?;
    let (w, h) = a.dims();
    let mut out = a.clone();
    let (dx, dy) = out.planes_mut();
    for i in 0..w * h {
        if eb[i] < ea[i] {
            dx[i] = b.dx()[i];
            dy[i] = b.dy()[i];
        }
    }
    Ok(out)
}

fn add_fields(a: &MotionField, b: &MotionField) -> MotionField {
    let (w, h) = a.dims();
    let dx = a.dx().iter().zip(b.dx()).map(|(p, q)| p + q).collect();
    let dy = a.dy().iter().zip(b.dy()).map(|(p, q)| p + q).collect();
    MotionField::from_planes(w, h, dx, dy).expect("sum of finite fields")
}

fn sub_fields(a: &MotionField, b: &MotionField) -> MotionField {
    let (w, h) = a.dims();
    let dx = a.dx().iter().zip(b.dx()).map(|(p, q)| p - q).collect();
    let dy = a.dy().iter().zip(b.dy()).map(|(p, q)| p - q).collect();
    MotionField::from_planes(w, h, dx, dy).expect("difference of finite fields")
}
