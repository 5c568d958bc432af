pub mod bench;
pub mod eval;
pub mod restore;
pub mod synth;

use clap::{Args, ValueEnum};
use tempalign::fusion::{ConsistencyReduce, FusionParams};
use tempalign::{Frame, MotionParams};

use crate::errors::InputError;

#[derive(Args, Debug, Clone)]
pub struct MotionArgs {
    /// Block size of the integer search stage.
    #[arg(long, default_value_t = 8)]
    pub block_size: usize,
    /// Search radius per estimation call, in pixels.
    #[arg(long, default_value_t = 12)]
    pub search_radius: usize,
    /// Lucas-Kanade iterations per pyramid level.
    #[arg(long, default_value_t = 5)]
    pub lk_iterations: usize,
    /// Lucas-Kanade window size in pixels.
    #[arg(long, default_value_t = 7)]
    pub lk_window: usize,
    #[arg(long, default_value_t = 3)]
    pub pyramid_levels: usize,
    /// Bound on each displacement component, in pixels.
    #[arg(long, default_value_t = 128.0)]
    pub max_displacement: f32,
}

impl MotionArgs {
    pub fn params(&self) -> anyhow::Result<MotionParams> {
        let p = MotionParams {
            block_size: self.block_size,
            search_radius: self.search_radius,
            lk_iterations: self.lk_iterations,
            lk_window: self.lk_window,
            pyramid_levels: self.pyramid_levels,
            max_displacement: self.max_displacement,
        };
        p.validate().map_err(InputError::msg)?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Reduce {
    Channelwise,
    Pixelwise,
}

#[derive(Args, Debug, Clone)]
pub struct FusionArgs {
    /// Consistency exponent scale (must be <= 0).
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub alpha: f32,
    #[arg(long, default_value_t = 1.0)]
    pub reference_weight: f32,
    /// Leave the reference frame out of the final aggregation.
    #[arg(long)]
    pub exclude_reference: bool,
    #[arg(long, value_enum, default_value_t = Reduce::Channelwise)]
    pub consistency_reduce: Reduce,
    /// Include the reference frame in the consistency average.
    #[arg(long)]
    pub average_includes_reference: bool,
}

impl FusionArgs {
    pub fn params(&self) -> anyhow::Result<FusionParams> {
        let p = FusionParams {
            alpha: self.alpha,
            reference_weight: self.reference_weight,
            include_reference: !self.exclude_reference,
            consistency_reduce: match self.consistency_reduce {
                Reduce::Channelwise => ConsistencyReduce::Channelwise,
                Reduce::Pixelwise => ConsistencyReduce::Pixelwise,
            },
            average_includes_reference: self.average_includes_reference,
            ..FusionParams::default()
        };
        p.validate().map_err(InputError::msg)?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum FusionMode {
    Arw,
    Mean,
}

impl FusionMode {
    pub fn name(self) -> &'static str {
        match self {
            FusionMode::Arw => "arw",
            FusionMode::Mean => "mean",
        }
    }
}

/// `WxH`, e.g. `256x256`.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let w = w.trim().parse().map_err(|e| format!("bad width '{w}': {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("bad height '{h}': {e}"))?;
    Ok((w, h))
}

/// Replicates a single-channel frame to RGB; other layouts pass through.
pub fn as_rgb(frame: &Frame) -> Frame {
    if frame.channels() == 1 {
        Frame::from_fn(frame.width(), frame.height(), 3, |x, y, _| frame.get(x, y, 0))
    } else {
        frame.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("256x128"), Ok((256, 128)));
        assert!(parse_size("256").is_err());
        assert!(parse_size("ax3").is_err());
    }
}
