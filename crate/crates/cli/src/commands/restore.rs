use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use tempalign::eval::{endpoint_error, evaluate, format_metric, ColorMode, DEFAULT_EPE_CROP};
use tempalign::frame::{load_frame, load_frames, save_frame, to_descriptor, SequenceKind};
use tempalign::fusion::{arw_fuse, dump_consistency_map, dump_weight_map, mean_fuse};
use tempalign::schedule::{run_with_ground_truth, GroundTruth, ScheduleConfig};
use tempalign::synth::offset_tag;
use tempalign::{Frame, MotionField, ScheduleKind, Sequence};

use super::{as_rgb, FusionArgs, FusionMode, MotionArgs};
use crate::errors::{InputContext, InputError};

#[derive(Args, Debug)]
pub struct RestoreArgs {
    /// Directory of PNGs, a `name_%03d.png` pattern, or a .y4m file.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the input as Y4M regardless of its extension.
    #[arg(long)]
    pub y4m: bool,
    /// Neighbors per side; by default the whole input is one window.
    #[arg(long)]
    pub n: Option<usize>,
    /// Index of the reference frame when `--n` selects a window.
    #[arg(long)]
    pub center: Option<usize>,
    #[arg(long, default_value = "iterative")]
    pub schedule: String,
    #[arg(long, value_enum, default_value_t = FusionMode::Arw)]
    pub fusion: FusionMode,
    /// Estimate every refinement from scratch (iterative schedule only).
    #[arg(long)]
    pub no_prior: bool,
    /// Highest refinement counter that still receives a prior.
    #[arg(long)]
    pub max_refines: Option<u32>,
    #[command(flatten)]
    pub motion: MotionArgs,
    #[command(flatten)]
    pub fusion_params: FusionArgs,
    /// Clean reference image for PSNR/SSIM.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Directory holding `hop_<tag>.mfld` / `gt_long_<tag>.mfld` (also searched in `<dir>/gt`).
    #[arg(long)]
    pub gt_fields: Option<PathBuf>,
    /// Evaluate on luma only.
    #[arg(long)]
    pub luma: bool,
    /// Print one diagnostics line per sub-alignment execution.
    #[arg(long)]
    pub diagnostics: bool,
    /// Write the aligned RGB neighbors here as `aligned_<tag>.png`.
    #[arg(long)]
    pub aligned_dir: Option<PathBuf>,
    /// Write accuracy weights and consistency maps here.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    #[arg(long, default_value = "restored.png")]
    pub out: PathBuf,
}

fn load_window(args: &RestoreArgs) -> anyhow::Result<Sequence> {
    let is_y4m = args.y4m || args.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("y4m"));
    let kind = if is_y4m { SequenceKind::Y4m } else { SequenceKind::PngSequence };
    let frames = load_frames(&args.input, kind)
        .with_context(|| format!("loading {}", args.input.display()))
        .input()?;
    let frames: Vec<Frame> = frames.iter().map(as_rgb).collect();
    let window = match args.n {
        None => frames,
        Some(n) => {
            let center = args.center.unwrap_or(frames.len() / 2);
            if n == 0 || center < n || center + n >= frames.len() {
                return Err(InputError::msg(format!(
                    "window of {n} neighbors around frame {center} does not fit {} frames",
                    frames.len()
                ))
                .into());
            }
            frames[center - n..=center + n].to_vec()
        }
    };
    Sequence::new(window).input()
}

fn find_field(dir: &Path, name: &str) -> anyhow::Result<Option<MotionField>> {
    for candidate in [dir.join(name), dir.join("gt").join(name)] {
        if candidate.is_file() {
            return MotionField::load(&candidate)
                .with_context(|| format!("loading {}", candidate.display()))
                .input()
                .map(Some);
        }
    }
    Ok(None)
}

fn load_ground_truth(dir: &Path, n: usize, dims: (usize, usize)) -> anyhow::Result<GroundTruth> {
    let mut gt = GroundTruth::default();
    let n = n as i32;
    for k in (-n..=n).filter(|&k| k != 0) {
        let tag = offset_tag(k);
        let slots = [(&mut gt.hops, format!("hop_{tag}.mfld")), (&mut gt.long, format!("gt_long_{tag}.mfld"))];
        for (map, name) in slots {
            if let Some(f) = find_field(dir, &name)? {
                if f.dims() != dims {
                    return Err(InputError::msg(format!("{name} is {}x{}, frames are {}x{}", f.width(), f.height(), dims.0, dims.1)).into());
                }
                map.insert(k, f);
            }
        }
    }
    if gt.hops.is_empty() && gt.long.is_empty() {
        return Err(InputError::msg(format!("no ground-truth fields found in {}", dir.display())).into());
    }
    Ok(gt)
}

pub fn run(args: &RestoreArgs) -> anyhow::Result<()> {
    let kind: ScheduleKind = args.schedule.parse().input()?;
    if args.no_prior && kind != ScheduleKind::Iterative {
        return Err(InputError::msg("--no-prior is only valid with --schedule iterative").into());
    }
    let config = ScheduleConfig {
        kind,
        motion: args.motion.params()?,
        use_prior: !args.no_prior,
        max_refines_per_index: args.max_refines,
    };
    let fusion = args.fusion_params.params()?;
    let sequence = load_window(args)?;
    let shape = sequence.shape();
    let reference = sequence.reference().clone();

    let clean = match &args.gt {
        Some(path) => {
            let gt = as_rgb(&load_frame(path).with_context(|| format!("loading {}", path.display())).input()?);
            if gt.shape() != reference.shape() {
                return Err(InputError::msg(format!("ground truth is {}, frames are {}", gt.shape(), reference.shape())).into());
            }
            Some(gt)
        }
        None => None,
    };
    let fields = match &args.gt_fields {
        Some(dir) => Some(load_ground_truth(dir, sequence.n(), (shape.width, shape.height))?),
        None => None,
    };

    let descriptors = sequence.try_map(|_, f| to_descriptor(f))?;
    let alignment = run_with_ground_truth(&descriptors, &config, fields.as_ref())?;
    if args.diagnostics {
        for line in alignment.exec_lines() {
            println!("{line}");
        }
    }
    let aligned: BTreeMap<i32, Frame> = alignment.apply_to_sequence(&sequence)?;
    let aligned_set: Vec<Frame> = aligned.values().cloned().collect();

    let restored = match args.fusion {
        FusionMode::Mean => mean_fuse(&reference, &aligned_set)?,
        FusionMode::Arw => {
            let (out, diag) = arw_fuse(&reference, &aligned_set, &fusion)?;
            if let Some(dir) = &args.dump_dir {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                for ((k, w), c) in aligned.keys().zip(&diag.weights).zip(&diag.consistency) {
                    let prefix = format!("k{}", offset_tag(*k));
                    dump_weight_map(w, dir, &prefix)?;
                    dump_consistency_map(c, dir, &prefix)?;
                }
            }
            out
        }
    };
    if let Some(dir) = &args.aligned_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (k, f) in &aligned {
            save_frame(&f.clamped(), &dir.join(format!("aligned_{}.png", offset_tag(*k))))?;
        }
    }
    save_frame(&restored.clamped(), &args.out).with_context(|| format!("writing {}", args.out.display()))?;

    let mode = if args.luma { ColorMode::Luma } else { ColorMode::Rgb };
    if let Some(clean) = &clean {
        let m = evaluate(&restored, clean, mode)?;
        let single = evaluate(&reference, clean, mode)?;
        println!("{}", format_metric("psnr", m.psnr));
        println!("{}", format_metric("ssim", m.ssim));
        println!("{}", format_metric("psnr_single", single.psnr));
        println!("{}", format_metric("ssim_single", single.ssim));
    }
    if let Some(gt) = &fields {
        let crop = DEFAULT_EPE_CROP.min(shape.width.min(shape.height) / 4);
        let mut stats = Vec::new();
        for (k, g) in &gt.long {
            stats.push(endpoint_error(&alignment.effective_field(*k)?, g, crop)?);
        }
        if !stats.is_empty() {
            let count = stats.len() as f64;
            println!("{}", format_metric("epe_mean", stats.iter().map(|s| s.mean).sum::<f64>() / count));
            println!("{}", format_metric("epe_p90", stats.iter().map(|s| s.p90).sum::<f64>() / count));
        }
    }
    Ok(())
}
