//! Planar floating-point frames, frame windows, and per-frame transforms.

mod io;
mod y4m;

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::XorShift64Star;

pub use io::{load_frame, load_frames, load_sequence, save_frame, SequenceKind};
pub use y4m::{read_y4m, Y4mHeader};

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// Planar image with samples nominally in `[0, 1]`.
///
/// Samples are stored plane by plane, each plane row-major. Every sample is
/// finite; constructors that accept external data reject NaN and infinity.
#[derive(Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Frame({}x{}x{})", self.width, self.height, self.channels)
    }
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels >= 1, "frame needs at least one channel");
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        let mut f = Self::new(width, height, channels);
        f.data.fill(value);
        f
    }

    pub fn from_planar(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::ChannelCount {
                expected: ">= 1",
                found: 0,
            });
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(
                format!("{} samples", width * height * channels),
                format!("{} samples", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame samples"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a frame by evaluating `f(x, y, c)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Self {
        let mut out = Self::new(width, height, channels);
        for c in 0..channels {
            let plane = out.plane_mut(c);
            for y in 0..height {
                for x in 0..width {
                    plane[y * width + x] = f(x, y, c);
                }
            }
        }
        debug_assert!(out.data.iter().all(|v| v.is_finite()));
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> Shape {
        Shape {
            width: self.width,
            height: self.height,
            channels: self.channels,
        }
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn samples(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    /// Sample with coordinates clamped to the frame (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    pub fn ensure_same_shape(&self, other: &Frame) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dims(self.shape(), other.shape()));
        }
        Ok(())
    }

    pub fn clamped(&self) -> Frame {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out
    }

    pub fn channel(&self, c: usize) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Frame> {
        if x0 + width > self.width || y0 + height > self.height || width == 0 || height == 0 {
            return Err(Error::OutOfBounds(format!(
                "crop {width}x{height}+{x0}+{y0} of {}",
                self.shape()
            )));
        }
        Ok(Frame::from_fn(width, height, self.channels, |x, y, c| {
            self.get(x0 + x, y0 + y, c)
        }))
    }

    /// Crop that removes `border` pixels from every side.
    pub fn interior(&self, border: usize) -> Result<Frame> {
        if 2 * border >= self.width || 2 * border >= self.height {
            return Err(Error::TooSmall(format!(
                "border {border} leaves nothing of {}",
                self.shape()
            )));
        }
        self.crop(border, border, self.width - 2 * border, self.height - 2 * border)
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.channels)
    }
}

/// A `2N+1` frame window centered on the reference frame.
///
/// Frames are addressed by signed temporal offset in `-N..=N`; offset 0 is
/// the reference.
#[derive(Clone, Debug)]
pub struct Sequence {
    frames: Vec<Frame>,
}

impl Sequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if frames.len() < 3 || frames.len().is_multiple_of(2) {
            return Err(Error::FrameCount(frames.len()));
        }
        for f in &frames[1..] {
            frames[0].ensure_same_shape(f)?;
        }
        Ok(Self { frames })
    }

    /// Neighbor count per side.
    pub fn n(&self) -> usize {
        self.frames.len() / 2
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, offset: i32) -> &Frame {
        let n = self.n() as i32;
        assert!(offset.abs() <= n, "offset {offset} outside window of N={n}");
        &self.frames[(offset + n) as usize]
    }

    pub fn reference(&self) -> &Frame {
        self.get(0)
    }

    /// Frames in temporal order, `-N` first.
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn offsets(&self) -> impl Iterator<Item = i32> {
        let n = self.n() as i32;
        -n..=n
    }

    pub fn shape(&self) -> Shape {
        self.frames[0].shape()
    }

    /// Applies a per-frame transform, in parallel.
    pub fn try_map(&self, f: impl Fn(i32, &Frame) -> Result<Frame> + Sync) -> Result<Sequence> {
        let n = self.n() as i32;
        let frames = self
            .frames
            .par_iter()
            .enumerate()
            .map(|(idx, fr)| f(idx as i32 - n, fr))
            .collect::<Result<Vec<_>>>()?;
        Sequence::new(frames)
    }
}

/// Gaussian noise level on the 0–255 scale plus its seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }
}

/// BT.601 full-range luma.
pub fn rgb_to_luma(frame: &Frame) -> Result<Frame> {
    if frame.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: "3",
            found: frame.channels(),
        });
    }
    let (r, g, b) = (frame.plane(0), frame.plane(1), frame.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b)
        .collect();
    Frame::from_planar(frame.width(), frame.height(), 1, data)
}

/// Five-channel matching descriptor: `[R, G, B, |∂x L|, |∂y L|]`.
///
/// Gradients are central differences of the luma with replicated borders,
/// halved once more so a ramp of slope `s` per pixel reads `0.5·s`.
pub fn to_descriptor(frame: &Frame) -> Result<Frame> {
    let luma = rgb_to_luma(frame)?;
    let (w, h) = (frame.width(), frame.height());
    let mut out = Frame::new(w, h, 5);
    for c in 0..3 {
        out.plane_mut(c).copy_from_slice(frame.plane(c));
    }
    let l = luma.plane(0);
    let at = |x: usize, y: usize| l[y * w + x];
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            gx[y * w + x] = 0.5 * ((at(xp, y) - at(xm, y)) * 0.5).abs();
            gy[y * w + x] = 0.5 * ((at(x, yp) - at(x, ym)) * 0.5).abs();
        }
    }
    out.plane_mut(3).copy_from_slice(&gx);
    out.plane_mut(4).copy_from_slice(&gy);
    Ok(out)
}

/// Adds i.i.d. `Normal(0, (sigma/255)²)` noise to every sample, in planar
/// order, using the pinned generator. The result is not clamped.
pub fn add_gaussian_noise(frame: &Frame, spec: NoiseSpec) -> Frame {
    let mut out = frame.clone();
    if spec.sigma == 0.0 {
        return out;
    }
    let scale = spec.sigma / 255.0;
    let mut rng = XorShift64Star::new(spec.seed);
    for v in out.samples_mut() {
        *v = (*v as f64 + scale * rng.next_gaussian()) as f32;
    }
    out
}

/// Separable box filter of the given radius with replicated borders.
pub fn box_blur(frame: &Frame, radius: usize) -> Frame {
    if radius == 0 {
        return frame.clone();
    }
    let (w, h) = (frame.width(), frame.height());
    let norm = 1.0 / (2 * radius + 1) as f32;
    let r = radius as isize;
    let mut out = Frame::new(w, h, frame.channels());
    for c in 0..frame.channels() {
        let src = frame.plane(c);
        let mut tmp = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    let xx = (x as isize + d).clamp(0, w as isize - 1) as usize;
                    acc += src[y * w + xx];
                }
                tmp[y * w + x] = acc * norm;
            }
        }
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    let yy = (y as isize + d).clamp(0, h as isize - 1) as usize;
                    acc += tmp[yy * w + x];
                }
                dst[y * w + x] = acc * norm;
            }
        }
    }
    out
}
