use std::cmp::Ordering;

use super::{BlockMatch, MotionField, MotionParams};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::warp::sample_bilinear;

/// Block origins along one axis. The last block is shifted inward so every
/// block lies fully inside the frame.
pub fn block_origins(len: usize, block_size: usize) -> Vec<usize> {
    let n = len.div_ceil(block_size);
    (0..n).map(|b| (b * block_size).min(len - block_size)).collect()
}

/// Componentwise median of the prior over a block.
pub fn prior_block_vector(prior: &MotionField, origin: (usize, usize), block_size: usize) -> (f32, f32) {
    let mut xs = Vec::with_capacity(block_size * block_size);
    let mut ys = Vec::with_capacity(block_size * block_size);
    for y in origin.1..origin.1 + block_size {
        for x in origin.0..origin.0 + block_size {
            let (a, b) = prior.get(x, y);
            xs.push(a);
            ys.push(b);
        }
    }
    (median(&mut xs), median(&mut ys))
}

fn median(v: &mut [f32]) -> f32 {
    v.sort_by(f32::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sum of absolute differences between the target block and the displaced
/// source block, over all channels. Returns `None` as soon as the running
/// sum exceeds `bound`.
fn block_sad(
    source: &Frame,
    target: &Frame,
    (x0, y0): (usize, usize),
    bs: usize,
    (dx, dy): (f32, f32),
    bound: f64,
) -> Option<f64> {
    let (w, h) = (source.width(), source.height());
    let integer = dx.fract() == 0.0 && dy.fract() == 0.0;
    let mut sum = 0.0f64;
    for c in 0..source.channels() {
        let (sp, tp) = (source.plane(c), target.plane(c));
        for y in y0..y0 + bs {
            let mut row = 0.0f32;
            for x in x0..x0 + bs {
                let s = if integer {
                    let sx = (x as isize + dx as isize).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + dy as isize).clamp(0, h as isize - 1) as usize;
                    sp[sy * w + sx]
                } else {
                    sample_bilinear(sp, w, h, x as f32 + dx, y as f32 + dy)
                };
                row += (s - tp[y * w + x]).abs();
            }
            sum += row as f64;
            if sum > bound {
                return None;
            }
        }
    }
    Some(sum)
}

/// Mean absolute difference over the `block_size²` pixels and all channels
/// of the block at `origin`, with the source displaced by `displacement`
/// and read with edge clamping.
pub fn block_cost(
    source: &Frame,
    target: &Frame,
    origin: (usize, usize),
    displacement: (f32, f32),
    params: &MotionParams,
) -> Result<f64> {
    source.ensure_same_shape(target)?;
    let bs = params.block_size;
    if origin.0 + bs > target.width() || origin.1 + bs > target.height() {
        return Err(Error::OutOfBounds(format!(
            "block at {origin:?} of size {bs} in {}x{}",
            target.width(),
            target.height()
        )));
    }
    let sum = block_sad(source, target, origin, bs, displacement, f64::INFINITY).unwrap();
    Ok(sum / (bs * bs * source.channels()) as f64)
}

#[derive(Clone, Copy)]
struct Candidate {
    sum: f64,
    dx: f32,
    dy: f32,
}

impl Candidate {
    fn mag2(&self) -> f32 {
        self.dx * self.dx + self.dy * self.dy
    }

    /// Lower cost wins; ties go to the smaller magnitude, then smaller
    /// `(dy, dx)` lexicographically.
    fn order(&self, other: &Candidate) -> Ordering {
        self.sum
            .total_cmp(&other.sum)
            .then(self.mag2().total_cmp(&other.mag2()))
            .then(self.dy.total_cmp(&other.dy))
            .then(self.dx.total_cmp(&other.dx))
    }
}

fn axis_window(center: i64, radius: i64, origin: usize, len: usize, bs: usize, bound: i64) -> (i64, i64) {
    // keep at least half of the displaced block inside the source frame
    let half = (bs / 2) as i64;
    let min_valid = (-(origin as i64) - half).max(-bound);
    let max_valid = ((len - bs - origin) as i64 + half).min(bound);
    let lo = (center - radius).max(min_valid);
    let hi = (center + radius).min(max_valid);
    if lo > hi {
        let c = center.clamp(min_valid, max_valid);
        (c, c)
    } else {
        (lo, hi)
    }
}

pub(super) fn search_block(
    source: &Frame,
    target: &Frame,
    origin: (usize, usize),
    params: &MotionParams,
    prior: Option<&MotionField>,
) -> BlockMatch {
    let bs = params.block_size;
    let bound = params.max_displacement;
    let prior_vec = prior.map(|p| {
        let (a, b) = prior_block_vector(p, origin, bs);
        (a.clamp(-bound, bound), b.clamp(-bound, bound))
    });
    let (cx, cy) = prior_vec.map_or((0, 0), |(a, b)| (a.round() as i64, b.round() as i64));
    let r = params.search_radius as i64;
    let ib = bound.floor() as i64;
    let (xlo, xhi) = axis_window(cx, r, origin.0, source.width(), bs, ib);
    let (ylo, yhi) = axis_window(cy, r, origin.1, source.height(), bs, ib);

    let mut best: Option<Candidate> = None;
    let mut prior_sum = None;
    if let Some(v) = prior_vec {
        let sum = block_sad(source, target, origin, bs, v, f64::INFINITY).unwrap();
        prior_sum = Some(sum);
        best = Some(Candidate {
            sum,
            dx: v.0,
            dy: v.1,
        });
    }
    for dy in ylo..=yhi {
        for dx in xlo..=xhi {
            let bound = best.map_or(f64::INFINITY, |b| b.sum);
            if let Some(sum) = block_sad(source, target, origin, bs, (dx as f32, dy as f32), bound) {
                let cand = Candidate {
                    sum,
                    dx: dx as f32,
                    dy: dy as f32,
                };
                if best.is_none_or(|b| cand.order(&b) == Ordering::Less) {
                    best = Some(cand);
                }
            }
        }
    }
    let best = best.expect("search window is never empty");
    let n = (bs * bs * source.channels()) as f64;
    BlockMatch {
        origin,
        vector: (best.dx, best.dy),
        cost: best.sum / n,
        prior_cost: prior_sum.map(|s| s / n),
    }
}

/// Linear interpolation weights of `pos` between sorted sample `centers`.
fn axis_weights(centers: &[f32], pos: f32) -> (usize, usize, f32) {
    let last = centers.len() - 1;
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let j = centers.partition_point(|&c| c <= pos) - 1;
    let t = (pos - centers[j]) / (centers[j + 1] - centers[j]);
    (j, j + 1, t)
}

/// Bilinear interpolation of per-block vectors, anchored at block centers,
/// onto the pixel grid.
pub(super) fn interpolate_blocks(
    blocks: &[BlockMatch],
    xs: &[usize],
    ys: &[usize],
    bs: usize,
    w: usize,
    h: usize,
) -> MotionField {
    let half = (bs as f32 - 1.0) / 2.0;
    let cxs: Vec<f32> = xs.iter().map(|&x| x as f32 + half).collect();
    let cys: Vec<f32> = ys.iter().map(|&y| y as f32 + half).collect();
    let nbx = xs.len();
    let at = |bx: usize, by: usize| blocks[by * nbx + bx].vector;
    let lerp = |a: f32, b: f32, t: f32| if t == 0.0 { a } else { a + (b - a) * t };
    let xw: Vec<_> = (0..w).map(|x| axis_weights(&cxs, x as f32)).collect();
    let yw: Vec<_> = (0..h).map(|y| axis_weights(&cys, y as f32)).collect();
    MotionField::from_fn(w, h, |x, y| {
        let (x0, x1, tx) = xw[x];
        let (y0, y1, ty) = yw[y];
        let (a, b, c, d) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
        let top = (lerp(a.0, b.0, tx), lerp(a.1, b.1, tx));
        let bot = (lerp(c.0, d.0, tx), lerp(c.1, d.1, tx));
        (lerp(top.0, bot.0, ty), lerp(top.1, bot.1, ty))
    })
}
