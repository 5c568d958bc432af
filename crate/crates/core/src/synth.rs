//! Synthetic sequences with analytic ground-truth motion.
//!
//! A band-limited texture is defined on the continuous plane as a Gaussian
//! filtered white-noise lattice. Every frame is an exact evaluation of that
//! texture under the motion model's transform, so ground-truth fields are
//! analytic and frames never carry resampling error from chained warps.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{add_gaussian_noise, box_blur, save_frame, Frame, NoiseSpec, Sequence};
use crate::motion::MotionField;
use crate::rng::{derive_seed, splitmix64};

pub const MIN_SIDE: usize = 32;
pub const DEFAULT_MAX_HOP_DISPLACEMENT: f64 = 16.0;
pub const DEFAULT_CUTOFF: f64 = 0.25;
/// Minimum fraction of reference pixels that must stay inside the outermost frames.
pub const MIN_IN_FRAME: f64 = 0.75;
const TEXTURE_CHANNELS: usize = 3;
const RANGE: (f64, f64) = (0.1, 0.9);

type Point = (f64, f64);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MotionModel {
    /// Constant velocity in px/hop.
    Constant { v: Point },
    /// `D(j) = v0·j + accel·j²/2`.
    Drift { v0: Point, accel: Point },
    /// Rotation about `center` (frame center when `None`) by `omega_deg` per hop.
    Rotation { center: Option<Point>, omega_deg: f64 },
}

impl MotionModel {
    fn translation(&self, j: i32) -> Option<Point> {
        let t = j as f64;
        match *self {
            MotionModel::Constant { v } => Some((v.0 * t, v.1 * t)),
            MotionModel::Drift { v0, accel } => Some((v0.0 * t + 0.5 * accel.0 * t * t, v0.1 * t + 0.5 * accel.1 * t * t)),
            MotionModel::Rotation { .. } => None,
        }
    }

    fn rotation(&self, size: (usize, usize)) -> Option<(Point, f64)> {
        match *self {
            MotionModel::Rotation { center, omega_deg } => {
                let c = center.unwrap_or(((size.0 as f64 - 1.0) / 2.0, (size.1 as f64 - 1.0) / 2.0));
                Some((c, omega_deg.to_radians()))
            }
            _ => None,
        }
    }

    /// Maps reference coordinates to frame `j` coordinates.
    pub fn forward(&self, j: i32, size: (usize, usize), p: Point) -> Point {
        if let Some(d) = self.translation(j) {
            return (p.0 + d.0, p.1 + d.1);
        }
        let (c, w) = self.rotation(size).expect("rotation model");
        rotate(p, c, w * j as f64)
    }

    /// Maps frame `j` coordinates back to reference coordinates.
    pub fn inverse(&self, j: i32, size: (usize, usize), q: Point) -> Point {
        if let Some(d) = self.translation(j) {
            return (q.0 - d.0, q.1 - d.1);
        }
        let (c, w) = self.rotation(size).expect("rotation model");
        rotate(q, c, -w * j as f64)
    }
}

fn rotate(p: Point, c: Point, angle: f64) -> Point {
    let (s, co) = angle.sin_cos();
    let (x, y) = (p.0 - c.0, p.1 - c.1);
    (c.0 + co * x - s * y, c.1 + s * x + co * y)
}

fn parse_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}")))
        .collect()
}

impl FromStr for MotionModel {
    type Err = Error;

    /// `const:vx,vy`, `drift:vx,vy,ax,ay`, `rot:deg` or `rot:deg,cx,cy`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("motion '{s}': {msg}"));
        let (kind, args) = s.split_once(':').ok_or_else(|| bad("expected <kind>:<values>".into()))?;
        let v = parse_numbers(args).map_err(bad)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad("values must be finite".into()));
        }
        match (kind, v.as_slice()) {
            ("const", [vx, vy]) => Ok(MotionModel::Constant { v: (*vx, *vy) }),
            ("drift", [vx, vy, ax, ay]) => Ok(MotionModel::Drift {
                v0: (*vx, *vy),
                accel: (*ax, *ay),
            }),
            ("rot", [deg]) => Ok(MotionModel::Rotation {
                center: None,
                omega_deg: *deg,
            }),
            ("rot", [deg, cx, cy]) => Ok(MotionModel::Rotation {
                center: Some((*cx, *cy)),
                omega_deg: *deg,
            }),
            _ => Err(bad("expected const:vx,vy | drift:vx,vy,ax,ay | rot:deg[,cx,cy]".into())),
        }
    }
}

impl fmt::Display for MotionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotionModel::Constant { v } => write!(f, "const:{},{}", v.0, v.1),
            MotionModel::Drift { v0, accel } => write!(f, "drift:{},{},{},{}", v0.0, v0.1, accel.0, accel.1),
            MotionModel::Rotation { center: None, omega_deg } => write!(f, "rot:{omega_deg}"),
            MotionModel::Rotation {
                center: Some(c),
                omega_deg,
            } => write!(f, "rot:{omega_deg},{},{}", c.0, c.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degradation {
    /// Clean frames; the noise spec is ignored.
    None,
    GaussianNoise,
    /// Box blur of the given radius, followed by the configured noise.
    BoxBlur { radius: usize },
}

impl FromStr for Degradation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Degradation::None),
            "noise" => Ok(Degradation::GaussianNoise),
            _ => s
                .strip_prefix("blur:")
                .and_then(|r| r.parse().ok())
                .map(|radius| Degradation::BoxBlur { radius })
                .ok_or_else(|| Error::InvalidParameter(format!("degradation '{s}': expected none | noise | blur:<radius>"))),
        }
    }
}

impl fmt::Display for Degradation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degradation::None => f.write_str("none"),
            Degradation::GaussianNoise => f.write_str("noise"),
            Degradation::BoxBlur { radius } => write!(f, "blur:{radius}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub size: (usize, usize),
    pub n: usize,
    pub motion: MotionModel,
    pub texture_seed: u64,
    pub texture_cutoff: f64,
    pub noise: NoiseSpec,
    pub degradation: Degradation,
    /// Upper bound on the magnitude of any ground-truth hop vector.
    pub max_hop_displacement: f64,
}

impl SynthSpec {
    pub fn new(size: (usize, usize), n: usize, motion: MotionModel, seed: u64, sigma: f64) -> Result<Self> {
        Ok(Self {
            size,
            n,
            motion,
            texture_seed: seed,
            texture_cutoff: DEFAULT_CUTOFF,
            noise: NoiseSpec::new(sigma, derive_seed(seed, 1))?,
            degradation: Degradation::GaussianNoise,
            max_hop_displacement: DEFAULT_MAX_HOP_DISPLACEMENT,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub clean_reference: Frame,
    /// Clean frames before degradation.
    pub clean: Sequence,
    pub sequence: Sequence,
    /// Single-hop fields `i → i − sign(i)`, keyed by `i`.
    pub gt_hop_fields: BTreeMap<i32, MotionField>,
    /// Long-range fields `k → 0`, keyed by `k`.
    pub gt_long_fields: BTreeMap<i32, MotionField>,
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if cutoff > 0.0 && cutoff <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("texture cutoff must be in (0, 1], got {cutoff}")))
    }
}

/// Band-limited texture on the continuous plane.
struct Texture {
    seed: u64,
    sigma: f64,
    radius: i64,
}

enum Mapping<'a> {
    Translation(Point),
    General(&'a (dyn Fn(Point) -> Point + Sync)),
}

impl Texture {
    fn new(seed: u64, cutoff: f64) -> Self {
        let sigma = 0.5 / cutoff;
        Self {
            seed,
            sigma,
            radius: (4.0 * sigma).ceil() as i64,
        }
    }

    fn lattice(&self, i: i64, j: i64, c: usize) -> f64 {
        let h = splitmix64(self.seed ^ splitmix64((i as u64) ^ splitmix64((j as u64) ^ splitmix64(c as u64))));
        (h >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0
    }

    fn taps(&self, q: f64) -> (i64, Vec<f64>) {
        let first = q.floor() as i64 - self.radius;
        let k = 1.0 / (2.0 * self.sigma * self.sigma);
        let w = (0..2 * self.radius + 2)
            .map(|t| {
                let d = q - (first + t) as f64;
                (-d * d * k).exp()
            })
            .collect();
        (first, w)
    }

    /// Unnormalized texture sampled at `mapping(x, y)` for every pixel.
    fn render(&self, (w, h): (usize, usize), mapping: Mapping<'_>) -> Frame {
        let mut out = Frame::new(w, h, TEXTURE_CHANNELS);
        match mapping {
            Mapping::Translation((tx, ty)) => {
                let cols: Vec<(i64, Vec<f64>)> = (0..w).map(|x| self.taps(x as f64 + tx)).collect();
                let rows: Vec<(i64, Vec<f64>)> = (0..h).map(|y| self.taps(y as f64 + ty)).collect();
                let j0 = rows[0].0;
                let jn = rows[h - 1].0 + rows[h - 1].1.len() as i64;
                for c in 0..TEXTURE_CHANNELS {
                    // horizontal pass over every lattice row touched by the frame
                    let partial: Vec<Vec<f64>> = (j0..jn)
                        .into_par_iter()
                        .map(|j| {
                            cols.iter()
                                .map(|(i0, wx)| {
                                    wx.iter()
                                        .enumerate()
                                        .map(|(t, g)| g * self.lattice(i0 + t as i64, j, c))
                                        .sum()
                                })
                                .collect()
                        })
                        .collect();
                    let plane = out.plane_mut(c);
                    plane.par_chunks_mut(w).zip(&rows).for_each(|(row, (r0, wy))| {
                        for (x, v) in row.iter_mut().enumerate() {
                            *v = wy
                                .iter()
                                .enumerate()
                                .map(|(t, g)| g * partial[(r0 - j0) as usize + t][x])
                                .sum::<f64>() as f32;
                        }
                    });
                }
            }
            Mapping::General(f) => {
                let pts: Vec<Point> = (0..w * h).map(|p| f(((p % w) as f64, (p / w) as f64))).collect();
                for c in 0..TEXTURE_CHANNELS {
                    let plane = out.plane_mut(c);
                    plane.par_iter_mut().zip(&pts).for_each(|(v, &(qx, qy))| {
                        let (i0, wx) = self.taps(qx);
                        let (j0, wy) = self.taps(qy);
                        let mut acc = 0.0;
                        for (tj, gy) in wy.iter().enumerate() {
                            let row: f64 = wx
                                .iter()
                                .enumerate()
                                .map(|(ti, gx)| gx * self.lattice(i0 + ti as i64, j0 + tj as i64, c))
                                .sum();
                            acc += gy * row;
                        }
                        *v = acc as f32;
                    });
                }
            }
        }
        out
    }
}

/// Per-channel affine map taking the reference render onto `RANGE`.
#[derive(Clone, Copy)]
struct Normalization {
    scale: [f64; TEXTURE_CHANNELS],
    offset: [f64; TEXTURE_CHANNELS],
}

impl Normalization {
    fn fit(raw: &Frame) -> Self {
        let mut scale = [0.0; TEXTURE_CHANNELS];
        let mut offset = [RANGE.0; TEXTURE_CHANNELS];
        for c in 0..TEXTURE_CHANNELS {
            let p = raw.plane(c);
            let lo = p.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
            let hi = p.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
            if hi > lo {
                scale[c] = (RANGE.1 - RANGE.0) / (hi - lo);
                offset[c] = RANGE.0 - lo * scale[c];
            }
        }
        Self { scale, offset }
    }

    fn apply(&self, raw: &mut Frame) {
        for c in 0..TEXTURE_CHANNELS {
            let (s, o) = (self.scale[c], self.offset[c]);
            for v in raw.plane_mut(c) {
                *v = ((*v as f64) * s + o).clamp(RANGE.0, RANGE.1) as f32;
            }
        }
    }

    /// Like `apply`, without clamping: content outside the reference grid may
    /// legitimately exceed the reference extremes.
    fn apply_unclamped(&self, raw: &mut Frame) {
        for c in 0..TEXTURE_CHANNELS {
            let (s, o) = (self.scale[c], self.offset[c]);
            for v in raw.plane_mut(c) {
                *v = ((*v as f64) * s + o) as f32;
            }
        }
    }
}

/// Seeded band-limited RGB texture, normalized to `[0.1, 0.9]` per channel.
///
/// The low-pass is a separable Gaussian with `sigma = 0.5 / cutoff` pixels.
pub fn texture(seed: u64, size: (usize, usize), cutoff: f64) -> Result<Frame> {
    check_cutoff(cutoff)?;
    if size.0 == 0 || size.1 == 0 {
        return Err(Error::TooSmall(format!("texture size {}x{}", size.0, size.1)));
    }
    let tex = Texture::new(seed, cutoff);
    let mut raw = tex.render(size, Mapping::Translation((0.0, 0.0)));
    Normalization::fit(&raw).apply(&mut raw);
    Ok(raw)
}

fn field_from_map(size: (usize, usize), f: impl Fn(Point) -> Point + Sync) -> MotionField {
    MotionField::from_fn(size.0, size.1, |x, y| {
        let p = (x as f64, y as f64);
        let q = f(p);
        ((q.0 - p.0) as f32, (q.1 - p.1) as f32)
    })
}

fn in_frame_fraction(spec: &SynthSpec, k: i32) -> f64 {
    let (w, h) = spec.size;
    let inside = (0..w * h)
        .filter(|&p| {
            let q = spec.motion.forward(k, spec.size, ((p % w) as f64, (p / w) as f64));
            q.0 >= 0.0 && q.1 >= 0.0 && q.0 <= (w - 1) as f64 && q.1 <= (h - 1) as f64
        })
        .count();
    inside as f64 / (w * h) as f64
}

impl SynthSpec {
    /// Checks size, parameters and both displacement bounds without rendering.
    pub fn validate(&self) -> Result<()> {
        validate(self)?;
        let n = self.n as i32;
        for k in (-n..=n).filter(|&k| k != 0) {
            let hop = hop_field(self, k);
            let peak = hop
                .dx()
                .iter()
                .zip(hop.dy())
                .map(|(a, b)| (a * a + b * b).sqrt())
                .fold(0.0f32, f32::max) as f64;
            if peak > self.max_hop_displacement + 1e-9 {
                return Err(Error::DisplacementBound(format!(
                    "hop {k} moves up to {peak:.3} px, above the bound of {} px",
                    self.max_hop_displacement
                )));
            }
        }
        Ok(())
    }
}

fn validate(spec: &SynthSpec) -> Result<()> {
    let (w, h) = spec.size;
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::TooSmall(format!("synthetic frames must be at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}")));
    }
    if spec.n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    check_cutoff(spec.texture_cutoff)?;
    if !(spec.max_hop_displacement > 0.0) {
        return Err(Error::InvalidParameter("max_hop_displacement must be > 0".into()));
    }
    if let Degradation::BoxBlur { radius: 0 } = spec.degradation {
        return Err(Error::InvalidParameter("blur radius must be >= 1".into()));
    }
    NoiseSpec::new(spec.noise.sigma, spec.noise.seed)?;
    let n = spec.n as i32;
    for k in [-n, n] {
        let frac = in_frame_fraction(spec, k);
        if frac < MIN_IN_FRAME {
            return Err(Error::DisplacementBound(format!(
                "only {:.1}% of reference pixels stay in frame {k} (need {:.0}%)",
                frac * 100.0,
                MIN_IN_FRAME * 100.0
            )));
        }
    }
    Ok(())
}

fn hop_field(spec: &SynthSpec, i: i32) -> MotionField {
    let prev = i - i.signum();
    field_from_map(spec.size, |p| {
        spec.motion.forward(i, spec.size, spec.motion.inverse(prev, spec.size, p))
    })
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let n = spec.n as i32;
    let offsets: Vec<i32> = (-n..=n).collect();

    let mut gt_hop_fields = BTreeMap::new();
    let mut gt_long_fields = BTreeMap::new();
    for &k in offsets.iter().filter(|&&k| k != 0) {
        gt_hop_fields.insert(k, hop_field(spec, k));
        gt_long_fields.insert(k, field_from_map(spec.size, |p| spec.motion.forward(k, spec.size, p)));
    }

    let tex = Texture::new(spec.texture_seed, spec.texture_cutoff);
    let mut reference = tex.render(spec.size, Mapping::Translation((0.0, 0.0)));
    let norm = Normalization::fit(&reference);
    norm.apply(&mut reference);

    let clean: Vec<Frame> = offsets
        .iter()
        .map(|&j| {
            if j == 0 {
                return reference.clone();
            }
            let mut raw = match spec.motion.translation(j) {
                Some(d) => tex.render(spec.size, Mapping::Translation((-d.0, -d.1))),
                None => {
                    let inv = |q: Point| spec.motion.inverse(j, spec.size, q);
                    tex.render(spec.size, Mapping::General(&inv))
                }
            };
            norm.apply_unclamped(&mut raw);
            raw
        })
        .collect();

    let degraded: Vec<Frame> = clean
        .par_iter()
        .zip(&offsets)
        .map(|(f, &j)| {
            let noise = NoiseSpec {
                sigma: spec.noise.sigma,
                seed: derive_seed(spec.noise.seed, (j + n) as u64),
            };
            match spec.degradation {
                Degradation::None => f.clone(),
                Degradation::GaussianNoise => add_gaussian_noise(f, noise),
                Degradation::BoxBlur { radius } => add_gaussian_noise(&box_blur(f, radius), noise),
            }
        })
        .collect();

    Ok(SynthOutput {
        clean_reference: reference,
        clean: Sequence::new(clean)?,
        sequence: Sequence::new(degraded)?,
        gt_hop_fields,
        gt_long_fields,
    })
}

/// File-name tag for a signed offset: `m2`, `m1`, `p1`, `p2`.
pub fn offset_tag(k: i32) -> String {
    if k < 0 {
        format!("m{}", -k)
    } else {
        format!("p{k}")
    }
}

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Writes degraded frames, long-range GT fields and a manifest into `dir`,
/// and the clean reference plus hop fields into `dir/gt`. Returns the
/// manifest path.
pub fn write_output(output: &SynthOutput, spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    let gt_dir = dir.join("gt");
    std::fs::create_dir_all(&gt_dir)?;
    let mut manifest = String::new();
    let mut line = |k: &str, v: String| manifest.push_str(&format!("{k} = {v}\n"));
    line("size", format!("{}x{}", spec.size.0, spec.size.1));
    line("n", spec.n.to_string());
    line("motion", spec.motion.to_string());
    line("texture_seed", spec.texture_seed.to_string());
    line("texture_cutoff", spec.texture_cutoff.to_string());
    line("sigma", spec.noise.sigma.to_string());
    line("noise_seed", spec.noise.seed.to_string());
    line("degradation", spec.degradation.to_string());
    line("max_hop_displacement", spec.max_hop_displacement.to_string());
    line("frames", "frame_%03d.png".into());
    line("reference_index", spec.n.to_string());

    for (idx, frame) in output.sequence.frames().iter().enumerate() {
        save_frame(&frame.clamped(), &dir.join(format!("frame_{idx:03}.png")))?;
    }
    save_frame(&output.clean_reference, &gt_dir.join("reference.png"))?;
    for (k, field) in &output.gt_long_fields {
        let name = format!("gt_long_{}.mfld", offset_tag(*k));
        field.save(&dir.join(&name))?;
        line(&format!("gt_long_{}", offset_tag(*k)), name);
    }
    for (i, field) in &output.gt_hop_fields {
        field.save(&gt_dir.join(format!("hop_{}.mfld", offset_tag(*i))))?;
    }
    line("clean_reference", "gt/reference.png".into());
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest)?;
    Ok(path)
}
