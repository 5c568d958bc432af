use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};

use super::{y4m, Frame, Sequence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceKind {
    /// A directory of PNGs (sorted by name) or a `prefix_%03d.png` pattern.
    PngSequence,
    Y4m,
}

/// Reads one 8-bit PNG (gray or RGB; alpha is dropped) into `[0, 1]` samples.
pub fn load_frame(path: &Path) -> Result<Frame> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => planar_from_interleaved(w, h, 1, g.as_raw()),
        DynamicImage::ImageLumaA8(_) => planar_from_interleaved(w, h, 1, img.to_luma8().as_raw()),
        DynamicImage::ImageRgb8(rgb) => planar_from_interleaved(w, h, 3, rgb.as_raw()),
        DynamicImage::ImageRgba8(_) => planar_from_interleaved(w, h, 3, img.to_rgb8().as_raw()),
        other => Err(Error::UnsupportedFormat(format!(
            "{}: only 8-bit PNGs are accepted, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

fn planar_from_interleaved(w: usize, h: usize, channels: usize, raw: &[u8]) -> Result<Frame> {
    let mut data = vec![0.0f32; w * h * channels];
    for (i, px) in raw.chunks_exact(channels).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * w * h + i] = v as f32 / 255.0;
        }
    }
    Frame::from_planar(w, h, channels, data)
}

/// Writes an 8-bit PNG. Samples are clamped to `[0, 1]` and quantized as
/// `round(v · 255)` with halves rounding up.
pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = (frame.width(), frame.height());
    let quant = |v: f32| ((v.clamp(0.0, 1.0) as f64 * 255.0 + 0.5).floor()) as u8;
    match frame.channels() {
        1 => {
            let raw = frame.plane(0).iter().map(|&v| quant(v)).collect();
            GrayImage::from_raw(w as u32, h as u32, raw)
                .expect("buffer size matches")
                .save(path)?;
        }
        3 => {
            let mut raw = Vec::with_capacity(w * h * 3);
            for i in 0..w * h {
                for c in 0..3 {
                    raw.push(quant(frame.plane(c)[i]));
                }
            }
            RgbImage::from_raw(w as u32, h as u32, raw)
                .expect("buffer size matches")
                .save(path)?;
        }
        n => {
            return Err(Error::ChannelCount {
                expected: "1 or 3",
                found: n,
            })
        }
    }
    Ok(())
}

/// Reads every frame of a PNG sequence or Y4M file, in order.
pub fn load_frames(source: &Path, kind: SequenceKind) -> Result<Vec<Frame>> {
    match kind {
        SequenceKind::Y4m => {
            if !source.is_file() {
                return Err(Error::MissingFile(source.to_path_buf()));
            }
            y4m::read_y4m(&fs::read(source)?)
        }
        SequenceKind::PngSequence => resolve_png_paths(source)?.iter().map(|p| load_frame(p)).collect(),
    }
}

/// Like [`load_frames`], validated as an odd-length window.
pub fn load_sequence(source: &Path, kind: SequenceKind) -> Result<Sequence> {
    Sequence::new(load_frames(source, kind)?)
}

fn resolve_png_paths(source: &Path) -> Result<Vec<PathBuf>> {
    if source.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(source)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::MissingFile(source.join("*.png")));
        }
        return Ok(paths);
    }
    let pattern = source.to_string_lossy();
    if expand_pattern(&pattern, 0).is_none() {
        // a single file, or nothing at all
        return Err(Error::MissingFile(source.to_path_buf()));
    }
    let first = (0..=1)
        .find(|&i| Path::new(&expand_pattern(&pattern, i).unwrap()).is_file())
        .ok_or_else(|| Error::MissingFile(PathBuf::from(expand_pattern(&pattern, 0).unwrap())))?;
    let mut paths = Vec::new();
    let mut i = first;
    loop {
        let p = PathBuf::from(expand_pattern(&pattern, i).unwrap());
        if !p.is_file() {
            break;
        }
        paths.push(p);
        i += 1;
    }
    Ok(paths)
}

/// Substitutes a printf-style `%d` / `%0Nd` in `pattern`.
fn expand_pattern(pattern: &str, index: usize) -> Option<String> {
    let start = pattern.find('%')?;
    let rest = &pattern[start + 1..];
    let end = rest.find('d')?;
    let spec = &rest[..end];
    if !spec.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let width: usize = if spec.is_empty() { 0 } else { spec.parse().ok()? };
    Some(format!(
        "{}{:0width$}{}",
        &pattern[..start],
        index,
        &rest[end + 1..],
        width = width
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_expansion() {
        assert_eq!(expand_pattern("d/f_%03d.png", 7).unwrap(), "d/f_007.png");
        assert_eq!(expand_pattern("f%d.png", 12).unwrap(), "f12.png");
        assert!(expand_pattern("plain.png", 0).is_none());
    }

    #[test]
    fn quantization_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.png");
        let f = Frame::from_planar(3, 1, 1, vec![1.0, 0.5, -0.2]).unwrap();
        save_frame(&f, &p).unwrap();
        let back = load_frame(&p).unwrap();
        assert_eq!(back.samples(), &[1.0, 128.0 / 255.0, 0.0]);

        let grid = Frame::from_fn(5, 4, 3, |x, y, c| ((x * 37 + y * 11 + c * 101) % 256) as f32 / 255.0);
        let p = dir.path().join("rgb.png");
        save_frame(&grid, &p).unwrap();
        assert_eq!(load_frame(&p).unwrap(), grid);
    }

    #[test]
    fn unsupported_channels() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::new(2, 2, 5);
        assert!(matches!(
            save_frame(&f, &dir.path().join("x.png")),
            Err(Error::ChannelCount { found: 5, .. })
        ));
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 2, vec![0u16, 1, 2, 3])
            .unwrap()
            .save(&p)
            .unwrap();
        assert!(matches!(load_frame(&p), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn sequence_from_pattern_and_dir() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..5 {
            let f = Frame::filled(64, 64, 3, i as f32 / 8.0);
            save_frame(&f, &dir.path().join(format!("f_{i:03}.png"))).unwrap();
        }
        let pat = dir.path().join("f_%03d.png");
        let s = load_sequence(&pat, SequenceKind::PngSequence).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.shape().channels, 3);
        assert_eq!(s.reference().get(0, 0, 0), 64.0 / 255.0);
        let s2 = load_sequence(dir.path(), SequenceKind::PngSequence).unwrap();
        assert_eq!(s2.len(), 5);
    }

    #[test]
    fn sequence_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_sequence(&dir.path().join("none_%03d.png"), SequenceKind::PngSequence),
            Err(Error::MissingFile(_))
        ));
        assert!(matches!(
            load_sequence(dir.path(), SequenceKind::PngSequence),
            Err(Error::MissingFile(_))
        ));
        save_frame(&Frame::new(64, 64, 3), &dir.path().join("a_000.png")).unwrap();
        save_frame(&Frame::new(64, 32, 3), &dir.path().join("a_001.png")).unwrap();
        save_frame(&Frame::new(64, 64, 3), &dir.path().join("a_002.png")).unwrap();
        assert!(matches!(
            load_sequence(&dir.path().join("a_%03d.png"), SequenceKind::PngSequence),
            Err(Error::DimensionMismatch { .. })
        ));
        save_frame(&Frame::new(64, 64, 3), &dir.path().join("b_000.png")).unwrap();
        save_frame(&Frame::new(64, 64, 3), &dir.path().join("b_001.png")).unwrap();
        assert!(matches!(
            load_sequence(&dir.path().join("b_%03d.png"), SequenceKind::PngSequence),
            Err(Error::FrameCount(2))
        ));
    }
}
