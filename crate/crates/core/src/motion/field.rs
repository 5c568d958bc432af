use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MFLD";

/// Dense per-pixel displacement, backward-mapping convention:
/// `aligned(x, y) = source(x + dx, y + dy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionField {
    width: usize,
    height: usize,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl MotionField {
    pub fn new(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        Self {
            width,
            height,
            dx: vec![dx; width * height],
            dy: vec![dy; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f32, f32)) -> Self {
        let mut out = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                out.dx[y * width + x] = a;
                out.dy[y * width + x] = b;
            }
        }
        out
    }

    pub fn from_planes(width: usize, height: usize, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self> {
        if dx.len() != width * height || dy.len() != width * height {
            return Err(Error::dims(
                format!("{} vectors", width * height),
                format!("{}/{} components", dx.len(), dy.len()),
            ));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("motion field"));
        }
        Ok(Self {
            width,
            height,
            dx,
            dy,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    pub fn dy(&self) -> &[f32] {
        &self.dy
    }

    pub(crate) fn dx_row(&self, y: usize) -> &[f32] {
        &self.dx[y * self.width..(y + 1) * self.width]
    }

    pub(crate) fn dy_row(&self, y: usize) -> &[f32] {
        &self.dy[y * self.width..(y + 1) * self.width]
    }

    pub(crate) fn planes_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.dx, &mut self.dy)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn is_zero(&self) -> bool {
        self.dx.iter().chain(&self.dy).all(|&v| v == 0.0)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f32 {
        self.dx.iter().chain(&self.dy).fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn negated(&self) -> MotionField {
        Self {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().map(|v| -v).collect(),
            dy: self.dy.iter().map(|v| -v).collect(),
        }
    }

    pub(crate) fn clamp_components(&mut self, bound: f32) {
        for v in self.dx.iter_mut().chain(self.dy.iter_mut()) {
            *v = v.clamp(-bound, bound);
        }
    }

    /// Serializes as `MFLD`, u32 width, u32 height, then the dx plane and
    /// the dy plane as little-endian f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.dx.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in self.dx.iter().chain(&self.dy) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::UnsupportedFormat("missing MFLD magic".into()));
        }
        let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n = w * h;
        if bytes.len() != 12 + 8 * n {
            return Err(Error::UnsupportedFormat(format!(
                "MFLD payload is {} bytes, expected {}",
                bytes.len() - 12,
                8 * n
            )));
        }
        let floats: Vec<f32> = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (dx, dy) = floats.split_at(n);
        Self::from_planes(w, h, dx.to_vec(), dy.to_vec())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_bytes(&fs::read(path)?)
    }
}
