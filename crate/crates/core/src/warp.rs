//! Backward warping and motion-field composition.
//!
//! Both use bilinear sampling with coordinates clamped to the image, so
//! every output is a convex combination of source samples.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::motion::MotionField;

/// Bilinear sample of a row-major plane at `(fx, fy)`, clamping to the edge.
///
/// Integer coordinates return the stored sample exactly.
#[inline]
pub fn sample_bilinear(plane: &[f32], width: usize, height: usize, fx: f32, fy: f32) -> f32 {
    let fx = fx.clamp(0.0, (width - 1) as f32);
    let fy = fy.clamp(0.0, (height - 1) as f32);
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let (x0, y0) = (x0 as usize, y0 as usize);
    let p00 = plane[y0 * width + x0];
    if tx == 0.0 && ty == 0.0 {
        return p00;
    }
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let p01 = plane[y0 * width + x1];
    let p10 = plane[y1 * width + x0];
    let p11 = plane[y1 * width + x1];
    let top = p00 + (p01 - p00) * tx;
    let bottom = p10 + (p11 - p10) * tx;
    top + (bottom - top) * ty
}

fn check_dims(frame_w: usize, frame_h: usize, field: &MotionField) -> Result<()> {
    if (frame_w, frame_h) != (field.width(), field.height()) {
        return Err(Error::dims(
            format!("{frame_w}x{frame_h}"),
            format!("{}x{} field", field.width(), field.height()),
        ));
    }
    Ok(())
}

/// `out(x, y) = source(x + dx, y + dy)` with bilinear sampling.
pub fn backward_warp(source: &Frame, field: &MotionField) -> Result<Frame> {
    let (w, h) = (source.width(), source.height());
    check_dims(w, h, field)?;
    let mut out = Frame::new(w, h, source.channels());
    for c in 0..source.channels() {
        let src = source.plane(c);
        out.plane_mut(c)
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                let (dxr, dyr) = (field.dx_row(y), field.dy_row(y));
                for x in 0..w {
                    row[x] = sample_bilinear(src, w, h, x as f32 + dxr[x], y as f32 + dyr[x]);
                }
            });
    }
    Ok(out)
}

/// `result(x) = inner(x) + outer(x + inner(x))`.
///
/// `inner` maps the reference grid into an intermediate frame and `outer`
/// maps the intermediate frame into the far frame, so the result maps the
/// reference grid straight into the far frame.
pub fn compose_fields(outer: &MotionField, inner: &MotionField) -> Result<MotionField> {
    if outer.dims() != inner.dims() {
        return Err(Error::dims(
            format!("{}x{}", outer.width(), outer.height()),
            format!("{}x{}", inner.width(), inner.height()),
        ));
    }
    let (w, h) = outer.dims();
    let mut dx = vec![0.0f32; w * h];
    let mut dy = vec![0.0f32; w * h];
    dx.par_chunks_mut(w)
        .zip(dy.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (rx, ry))| {
            for x in 0..w {
                let (ix, iy) = inner.get(x, y);
                let (px, py) = (x as f32 + ix, y as f32 + iy);
                rx[x] = ix + sample_bilinear(outer.dx(), w, h, px, py);
                ry[x] = iy + sample_bilinear(outer.dy(), w, h, px, py);
            }
        });
    MotionField::from_planes(w, h, dx, dy)
}
