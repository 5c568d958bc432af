//! Dense motion estimation between a source and a target frame.
//!
//! Estimation runs in two stages. An exhaustive integer block search
//! (mean absolute difference over all channels) produces one vector per
//! block; when a prior field is supplied, each block's window is centered
//! on the prior's block median and that median vector is itself a
//! candidate, so the block stage never scores worse than the prior. The
//! block vectors are then interpolated to a dense field and polished to
//! subpixel precision with pyramidal Lucas–Kanade.

mod block;
mod field;
mod lk;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;

pub use block::{block_cost, block_origins, prior_block_vector};
pub use field::MotionField;

#[derive(Clone, Debug, PartialEq)]
pub struct MotionParams {
    pub block_size: usize,
    /// Integer search radius per estimation call.
    pub search_radius: usize,
    pub lk_iterations: usize,
    /// Side of the square Lucas–Kanade aggregation window.
    pub lk_window: usize,
    pub pyramid_levels: usize,
    /// Components of every estimated vector are clamped to this bound.
    pub max_displacement: f32,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            block_size: 8,
            search_radius: 12,
            lk_iterations: 5,
            lk_window: 7,
            pyramid_levels: 3,
            max_displacement: 128.0,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.block_size < 4 {
            return bad(format!("block_size must be >= 4, got {}", self.block_size));
        }
        if self.search_radius < 1 {
            return bad("search_radius must be >= 1".into());
        }
        if self.pyramid_levels < 1 {
            return bad("pyramid_levels must be >= 1".into());
        }
        if self.lk_window < 1 {
            return bad("lk_window must be >= 1".into());
        }
        if !(self.max_displacement > 0.0 && self.max_displacement.is_finite()) {
            return bad(format!("max_displacement must be positive, got {}", self.max_displacement));
        }
        Ok(())
    }

    pub fn with_search_radius(&self, radius: usize) -> Self {
        Self {
            search_radius: radius,
            ..self.clone()
        }
    }
}

/// Result of the integer block stage for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatch {
    pub origin: (usize, usize),
    pub vector: (f32, f32),
    pub cost: f64,
    /// Cost of the prior's block vector, when a prior was given.
    pub prior_cost: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Estimate {
    pub field: MotionField,
    pub blocks: Vec<BlockMatch>,
}

impl Estimate {
    pub fn mean_block_cost(&self) -> f64 {
        self.blocks.iter().map(|b| b.cost).sum::<f64>() / self.blocks.len() as f64
    }

    pub fn mean_prior_cost(&self) -> Option<f64> {
        let costs: Option<Vec<f64>> = self.blocks.iter().map(|b| b.prior_cost).collect();
        costs.map(|c| c.iter().sum::<f64>() / c.len() as f64)
    }
}

pub fn estimate(
    source: &Frame,
    target: &Frame,
    params: &MotionParams,
    prior: Option<&MotionField>,
) -> Result<MotionField> {
    estimate_detailed(source, target, params, prior).map(|e| e.field)
}

/// Like [`estimate`], also returning the per-block integer-stage matches.
pub fn estimate_detailed(
    source: &Frame,
    target: &Frame,
    params: &MotionParams,
    prior: Option<&MotionField>,
) -> Result<Estimate> {
    params.validate()?;
    source.ensure_same_shape(target)?;
    let (w, h) = (target.width(), target.height());
    if let Some(p) = prior {
        if p.dims() != (w, h) {
            return Err(Error::dims(
                format!("{w}x{h}"),
                format!("{}x{} prior", p.width(), p.height()),
            ));
        }
    }
    let bs = params.block_size;
    if w < bs || h < bs {
        return Err(Error::TooSmall(format!(
            "{w}x{h} frame is smaller than block size {bs}"
        )));
    }

    let xs = block_origins(w, bs);
    let ys = block_origins(h, bs);
    let origins: Vec<(usize, usize)> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect();
    let blocks: Vec<BlockMatch> = origins
        .par_iter()
        .map(|&o| block::search_block(source, target, o, params, prior))
        .collect();

    let dense = block::interpolate_blocks(&blocks, &xs, &ys, bs, w, h);
    let mut field = lk::polish(source, target, &dense, params)?;
    field.clamp_components(params.max_displacement);
    Ok(Estimate { field, blocks })
}
