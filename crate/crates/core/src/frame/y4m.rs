//! YUV4MPEG2 reader (8-bit 4:2:0 only).

use super::Frame;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub colorspace: String,
}

const MAGIC: &[u8] = b"YUV4MPEG2";

fn parse_header(line: &[u8]) -> Result<Y4mHeader> {
    let text = std::str::from_utf8(line)
        .map_err(|_| Error::UnsupportedFormat("y4m header is not ASCII".into()))?;
    let mut tokens = text.split_ascii_whitespace();
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(Error::UnsupportedFormat("missing YUV4MPEG2 magic".into()));
    }
    let (mut width, mut height) = (None, None);
    let mut colorspace = "420jpeg".to_string();
    for tok in tokens {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = val.parse().ok(),
            "H" => height = val.parse().ok(),
            "C" => colorspace = val.to_string(),
            _ => {}
        }
    }
    let (width, height) = match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => return Err(Error::UnsupportedFormat("y4m header lacks W/H".into())),
    };
    match colorspace.as_str() {
        "420" | "420jpeg" | "420paldv" | "420mpeg2" => {}
        cs if cs.starts_with("420p") => {
            return Err(Error::UnsupportedFormat(format!(
                "unsupported bit depth in colorspace C{cs}; only 8-bit is accepted"
            )))
        }
        cs => {
            return Err(Error::UnsupportedFormat(format!(
                "unsupported colorspace C{cs}; only 4:2:0 is accepted"
            )))
        }
    }
    Ok(Y4mHeader {
        width,
        height,
        colorspace,
    })
}

fn split_line(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::UnsupportedFormat("truncated y4m line".into()))?;
    Ok((&bytes[..nl], &bytes[nl + 1..]))
}

/// Decodes every frame to full-resolution RGB. Chroma is upsampled by
/// nearest neighbor and converted with full-range BT.601.
pub fn read_y4m(bytes: &[u8]) -> Result<Vec<Frame>> {
    if !bytes.starts_with(MAGIC) {
        return Err(Error::UnsupportedFormat("missing YUV4MPEG2 magic".into()));
    }
    let (line, mut rest) = split_line(bytes)?;
    let hdr = parse_header(line)?;
    let (w, h) = (hdr.width, hdr.height);
    let (cw, ch) = (w.div_ceil(2), h.div_ceil(2));
    let frame_len = w * h + 2 * cw * ch;
    let mut frames = Vec::new();
    while !rest.is_empty() {
        let (fline, body) = split_line(rest)?;
        if !fline.starts_with(b"FRAME") {
            return Err(Error::UnsupportedFormat("expected FRAME marker".into()));
        }
        if body.len() < frame_len {
            return Err(Error::UnsupportedFormat("truncated y4m frame".into()));
        }
        let (yp, up, vp) = (
            &body[..w * h],
            &body[w * h..w * h + cw * ch],
            &body[w * h + cw * ch..frame_len],
        );
        let mut rgb = Frame::new(w, h, 3);
        {
            let data = rgb.samples_mut();
            for y in 0..h {
                for x in 0..w {
                    let luma = yp[y * w + x] as f32;
                    let u = up[(y / 2) * cw + x / 2] as f32 - 128.0;
                    let v = vp[(y / 2) * cw + x / 2] as f32 - 128.0;
                    let r = luma + 1.402 * v;
                    let g = luma - 0.344_136 * u - 0.714_136 * v;
                    let b = luma + 1.772 * u;
                    let i = y * w + x;
                    data[i] = r.clamp(0.0, 255.0) / 255.0;
                    data[w * h + i] = g.clamp(0.0, 255.0) / 255.0;
                    data[2 * w * h + i] = b.clamp(0.0, 255.0) / 255.0;
                }
            }
        }
        frames.push(rgb);
        rest = &body[frame_len..];
    }
    Ok(frames)
}
