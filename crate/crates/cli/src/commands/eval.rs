use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use tempalign::eval::{endpoint_error, evaluate, format_metric, ColorMode, DEFAULT_EPE_CROP};
use tempalign::frame::load_frame;
use tempalign::MotionField;

use crate::errors::{InputContext, InputError};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// First image.
    pub a: Option<PathBuf>,
    /// Second image.
    pub b: Option<PathBuf>,
    /// Evaluate RGB inputs on luma only.
    #[arg(long)]
    pub luma: bool,
    /// Estimated motion field (MFLD).
    #[arg(long, requires = "gt_field")]
    pub field: Option<PathBuf>,
    /// Ground-truth motion field (MFLD).
    #[arg(long, requires = "field")]
    pub gt_field: Option<PathBuf>,
    /// Border excluded from endpoint error, in pixels.
    #[arg(long, default_value_t = DEFAULT_EPE_CROP)]
    pub crop: usize,
}

pub fn run(args: &EvalArgs) -> anyhow::Result<()> {
    let images = match (&args.a, &args.b) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(InputError::msg("eval needs two images").into()),
    };
    if images.is_none() && args.field.is_none() {
        return Err(InputError::msg("nothing to evaluate: give two images and/or --field with --gt-field").into());
    }
    if let Some((a, b)) = images {
        let fa = load_frame(a).with_context(|| format!("loading {}", a.display())).input()?;
        let fb = load_frame(b).with_context(|| format!("loading {}", b.display())).input()?;
        if fa.shape() != fb.shape() {
            return Err(InputError::msg(format!("{} is {}, {} is {}", a.display(), fa.shape(), b.display(), fb.shape())).into());
        }
        let mode = if args.luma { ColorMode::Luma } else { ColorMode::Rgb };
        let m = evaluate(&fa, &fb, mode).input()?;
        println!("{}", format_metric("psnr", m.psnr));
        println!("{}", format_metric("ssim", m.ssim));
    }
    if let (Some(f), Some(g)) = (&args.field, &args.gt_field) {
        let field = MotionField::load(f).with_context(|| format!("loading {}", f.display())).input()?;
        let gt = MotionField::load(g).with_context(|| format!("loading {}", g.display())).input()?;
        let e = endpoint_error(&field, &gt, args.crop).input()?;
        println!("{}", format_metric("epe_mean", e.mean));
        println!("{}", format_metric("epe_p90", e.p90));
    }
    Ok(())
}
