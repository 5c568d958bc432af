//! Non-parametric adaptive re-weighting of aligned frames.
//!
//! Two gains are combined per aligned frame `k`:
//!
//! * accuracy: at every pixel, the cosine similarity between the reference
//!   vector `v0` and each vector of the 3×3 neighborhood in the aligned
//!   frame is turned into stencil weights by a softmax, and the
//!   neighborhood is averaged with those weights;
//! * consistency: `C_k = exp(alpha · (F_k − F_avg)²)` per sample, where
//!   `F_avg` is the mean of the aligned neighbors.
//!
//! The gated frames `F̄_k ⊙ C_k` are aggregated together with the reference
//! as a `C`-normalized weighted mean.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{save_frame, Frame};

/// Offsets of the 3×3 stencil, row-major (`dy` outer, `dx` inner).
pub const STENCIL: [(isize, isize); 9] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (0, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConsistencyReduce {
    /// Squared deviation per sample.
    Channelwise,
    /// Squared deviation summed over channels, shared by all channels of a pixel.
    Pixelwise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionParams {
    pub alpha: f32,
    pub norm_epsilon: f32,
    /// Include the reference frame in the final aggregation.
    pub include_reference: bool,
    pub reference_weight: f32,
    pub consistency_reduce: ConsistencyReduce,
    /// Include the reference frame in the consistency average.
    pub average_includes_reference: bool,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            alpha: -1.0,
            norm_epsilon: 1e-8,
            include_reference: true,
            reference_weight: 1.0,
            consistency_reduce: ConsistencyReduce::Channelwise,
            average_includes_reference: false,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha <= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be <= 0, got {}", self.alpha)));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(Error::InvalidParameter("norm_epsilon must be > 0".into()));
        }
        if !(self.reference_weight >= 0.0 && self.reference_weight.is_finite()) {
            return Err(Error::InvalidParameter("reference_weight must be >= 0".into()));
        }
        Ok(())
    }

    fn effective_reference_weight(&self) -> f32 {
        if self.include_reference {
            self.reference_weight
        } else {
            0.0
        }
    }
}

/// Per-pixel 3×3 softmax stencils over the reference grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    width: usize,
    height: usize,
    weights: Vec<[f32; 9]>,
}

impl WeightMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Stencil at `(x, y)`, ordered as [`STENCIL`].
    pub fn get(&self, x: usize, y: usize) -> &[f32; 9] {
        &self.weights[y * self.width + x]
    }

    /// The map as a 9-channel frame, one plane per stencil tap.
    pub fn to_frame(&self) -> Frame {
        Frame::from_fn(self.width, self.height, 9, |x, y, c| self.get(x, y)[c])
    }
}

/// Per-sample consistency gain, same shape as the aligned frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyMap(pub Frame);

impl ConsistencyMap {
    pub fn gains(&self) -> &Frame {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        let s = self.0.samples();
        s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct FusionDiagnostics {
    /// Mean consistency gain per aligned frame, in input order.
    pub mean_consistency: Vec<f64>,
    pub weights: Vec<WeightMap>,
    pub consistency: Vec<ConsistencyMap>,
}

fn ensure_all_same(frames: &[&Frame]) -> Result<()> {
    for f in &frames[1..] {
        frames[0].ensure_same_shape(f)?;
    }
    Ok(())
}

/// Accuracy-based re-weighting of one aligned frame against the reference.
pub fn accuracy_reweight(reference: &Frame, aligned: &Frame, params: &FusionParams) -> Result<(WeightMap, Frame)> {
    params.validate()?;
    reference.ensure_same_shape(aligned)?;
    let ch = aligned.channels();
    if ch < 2 {
        return Err(Error::ChannelCount {
            expected: ">= 2 (cosine similarity is degenerate for scalars)",
            found: ch,
        });
    }
    let (w, h) = (aligned.width(), aligned.height());
    let eps = params.norm_epsilon as f64;
    let norm_at = |f: &Frame, x: usize, y: usize| -> f64 {
        (0..ch).map(|c| (f.get(x, y, c) as f64).powi(2)).sum::<f64>().sqrt()
    };
    let aligned_norms: Vec<f64> = (0..w * h).map(|i| norm_at(aligned, i % w, i / w)).collect();

    let rows: Vec<(Vec<[f32; 9]>, Vec<f32>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut wrow = Vec::with_capacity(w);
            let mut frow = vec![0.0f32; w * ch];
            for x in 0..w {
                let v0_norm = norm_at(reference, x, y) + eps;
                let mut taps = [(0usize, 0usize); 9];
                let mut sims = [0.0f64; 9];
                for (s, &(dx, dy)) in STENCIL.iter().enumerate() {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    taps[s] = (xx, yy);
                    let dot: f64 = (0..ch)
                        .map(|c| aligned.get(xx, yy, c) as f64 * reference.get(x, y, c) as f64)
                        .sum();
                    sims[s] = dot / ((aligned_norms[yy * w + xx] + eps) * v0_norm);
                }
                let max = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps = sims.map(|s| (s - max).exp());
                let z: f64 = exps.iter().sum();
                let wts = exps.map(|e| e / z);
                for c in 0..ch {
                    frow[c * w + x] = taps
                        .iter()
                        .zip(&wts)
                        .map(|(&(xx, yy), &wt)| wt * aligned.get(xx, yy, c) as f64)
                        .sum::<f64>() as f32;
                }
                wrow.push(wts.map(|v| v as f32));
            }
            (wrow, frow)
        })
        .collect();

    let mut weights = Vec::with_capacity(w * h);
    let mut fused = Frame::new(w, h, ch);
    for (y, (wrow, frow)) in rows.into_iter().enumerate() {
        weights.extend(wrow);
        for c in 0..ch {
            fused.plane_mut(c)[y * w..(y + 1) * w].copy_from_slice(&frow[c * w..(c + 1) * w]);
        }
    }
    Ok((
        WeightMap {
            width: w,
            height: h,
            weights,
        },
        fused,
    ))
}

/// Elementwise mean with a fixed (input order) summation order.
fn average(frames: &[&Frame]) -> Frame {
    let mut acc = vec![0.0f64; frames[0].samples().len()];
    for f in frames {
        for (a, &v) in acc.iter_mut().zip(f.samples()) {
            *a += v as f64;
        }
    }
    let n = frames.len() as f64;
    let data = acc.into_iter().map(|v| (v / n) as f32).collect();
    let s = frames[0].shape();
    Frame::from_planar(s.width, s.height, s.channels, data).expect("mean of finite frames")
}

fn consistency_against(frame: &Frame, avg: &Frame, params: &FusionParams) -> ConsistencyMap {
    let alpha = params.alpha as f64;
    let n = frame.plane_len();
    let ch = frame.channels();
    let mut out = Frame::new(frame.width(), frame.height(), ch);
    match params.consistency_reduce {
        ConsistencyReduce::Channelwise => {
            for ((o, &a), &m) in out.samples_mut().iter_mut().zip(frame.samples()).zip(avg.samples()) {
                let d = a as f64 - m as f64;
                *o = (alpha * d * d).exp() as f32;
            }
        }
        ConsistencyReduce::Pixelwise => {
            for i in 0..n {
                let sq: f64 = (0..ch)
                    .map(|c| {
                        let d = frame.samples()[c * n + i] as f64 - avg.samples()[c * n + i] as f64;
                        d * d
                    })
                    .sum();
                let g = (alpha * sq).exp() as f32;
                for c in 0..ch {
                    out.samples_mut()[c * n + i] = g;
                }
            }
        }
    }
    ConsistencyMap(out)
}

/// Consistency gains of each aligned frame against the mean of the set.
pub fn consistency_maps(aligned_set: &[Frame], params: &FusionParams) -> Result<Vec<ConsistencyMap>> {
    params.validate()?;
    if aligned_set.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "consistency needs >= 2 aligned frames, got {}",
            aligned_set.len()
        )));
    }
    let refs: Vec<&Frame> = aligned_set.iter().collect();
    ensure_all_same(&refs)?;
    let avg = average(&refs);
    Ok(aligned_set.par_iter().map(|f| consistency_against(f, &avg, params)).collect())
}

/// Adaptive re-weighting fusion of the aligned neighbors with the reference.
pub fn arw_fuse(reference: &Frame, aligned_set: &[Frame], params: &FusionParams) -> Result<(Frame, FusionDiagnostics)> {
    params.validate()?;
    if aligned_set.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "fusion needs >= 2 aligned frames, got {}",
            aligned_set.len()
        )));
    }
    let mut all: Vec<&Frame> = vec![reference];
    all.extend(aligned_set.iter());
    ensure_all_same(&all)?;

    let avg = if params.average_includes_reference {
        average(&all)
    } else {
        average(&all[1..])
    };
    let consistency: Vec<ConsistencyMap> = aligned_set
        .par_iter()
        .map(|f| consistency_against(f, &avg, params))
        .collect();
    let accuracy = aligned_set
        .iter()
        .map(|f| accuracy_reweight(reference, f, params))
        .collect::<Result<Vec<_>>>()?;

    let wref = params.effective_reference_weight() as f64;
    let len = reference.samples().len();
    let mut num: Vec<f64> = reference.samples().iter().map(|&v| wref * v as f64).collect();
    let mut den = vec![wref; len];
    for ((_, fbar), cmap) in accuracy.iter().zip(&consistency) {
        for i in 0..len {
            let g = cmap.0.samples()[i] as f64;
            num[i] += fbar.samples()[i] as f64 * g;
            den[i] += g;
        }
    }
    let data = num.iter().zip(&den).map(|(n, d)| (n / d) as f32).collect();
    let s = reference.shape();
    let fused = Frame::from_planar(s.width, s.height, s.channels, data)?;
    let diagnostics = FusionDiagnostics {
        mean_consistency: consistency.iter().map(ConsistencyMap::mean).collect(),
        weights: accuracy.into_iter().map(|(wm, _)| wm).collect(),
        consistency,
    };
    Ok((fused, diagnostics))
}

/// Plain elementwise mean of the reference and all aligned frames.
pub fn mean_fuse(reference: &Frame, aligned_set: &[Frame]) -> Result<Frame> {
    let mut all: Vec<&Frame> = vec![reference];
    all.extend(aligned_set.iter());
    ensure_all_same(&all)?;
    Ok(average(&all))
}

/// Writes each stencil tap of `map` as a grayscale PNG `<prefix>_w<tap>.png`.
pub fn dump_weight_map(map: &WeightMap, dir: &Path, prefix: &str) -> Result<()> {
    let frame = map.to_frame();
    for tap in 0..9 {
        save_frame(&frame.channel(tap), &dir.join(format!("{prefix}_w{tap}.png")))?;
    }
    Ok(())
}

/// Writes each channel of a consistency map as `<prefix>_c<channel>.png`.
pub fn dump_consistency_map(map: &ConsistencyMap, dir: &Path, prefix: &str) -> Result<()> {
    for c in 0..map.0.channels() {
        save_frame(&map.0.channel(c), &dir.join(format!("{prefix}_c{c}.png")))?;
    }
    Ok(())
}
