use std::f64::consts::PI;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use tempalign::eval::{endpoint_error, psnr_interior, DEFAULT_EPE_CROP};
use tempalign::frame::to_descriptor;
use tempalign::fusion::{arw_fuse, mean_fuse, FusionParams};
use tempalign::rng::{derive_seed, XorShift64Star};
use tempalign::schedule::{self, ScheduleConfig};
use tempalign::synth::{generate, MotionModel, SynthSpec, DEFAULT_CUTOFF};
use tempalign::{Frame, MotionParams, ScheduleKind};

use super::{parse_size, FusionArgs, FusionMode, MotionArgs};
use crate::errors::{InputContext, InputError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long, default_value = "128x128", value_parser = parse_size)]
    pub size: (usize, usize),
    /// Neighbors per side.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 20.0)]
    pub sigma: f64,
    /// Seeds per motion bin.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Per-hop motion magnitudes in pixels.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8,10", allow_hyphen_values = true)]
    pub bins: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "independent,progressive,iterative")]
    pub schedules: Vec<String>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "arw")]
    pub fusion: Vec<FusionMode>,
    /// Master seed; every cell derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(flatten)]
    pub motion: MotionArgs,
    #[command(flatten)]
    pub fusion_params: FusionArgs,
}

#[derive(Clone, Debug, Default)]
struct Cell {
    psnr_aligned: f64,
    psnr_restored: f64,
    epe_mean: f64,
    epe_p90: f64,
}

impl Cell {
    fn add(&mut self, other: &Cell) {
        self.psnr_aligned += other.psnr_aligned;
        self.psnr_restored += other.psnr_restored;
        self.epe_mean += other.epe_mean;
        self.epe_p90 += other.epe_p90;
    }

    fn scaled(&self, s: f64) -> Cell {
        Cell {
            psnr_aligned: self.psnr_aligned * s,
            psnr_restored: self.psnr_restored * s,
            epe_mean: self.epe_mean * s,
            epe_p90: self.epe_p90 * s,
        }
    }
}

/// Constant motion of the given magnitude in a seed-dependent direction.
pub fn bin_motion(magnitude: f64, seed: u64) -> MotionModel {
    let angle = 2.0 * PI * XorShift64Star::new(derive_seed(seed, 99)).next_f64();
    MotionModel::Constant {
        v: (magnitude * angle.cos(), magnitude * angle.sin()),
    }
}

struct Job<'a> {
    args: &'a BenchArgs,
    kinds: &'a [ScheduleKind],
    motion: &'a MotionParams,
    fusion: &'a FusionParams,
}

impl Job<'_> {
    fn spec(&self, bin: f64, seed: u64) -> anyhow::Result<SynthSpec> {
        let mut spec = SynthSpec::new(self.args.size, self.args.n, bin_motion(bin, seed), seed, self.args.sigma).input()?;
        spec.texture_cutoff = self.args.cutoff;
        Ok(spec)
    }

    /// One (bin, seed) cell: every schedule × fusion combination in order.
    fn run(&self, bin: f64, seed: u64) -> anyhow::Result<Vec<Cell>> {
        let out = generate(&self.spec(bin, seed)?)?;
        let n = self.args.n as i32;
        let crop = (n as f64 * bin).ceil() as usize + DEFAULT_EPE_CROP;
        let desc = out.sequence.try_map(|_, f| to_descriptor(f))?;
        let mut cells = Vec::new();
        for &kind in self.kinds {
            let cfg = ScheduleConfig {
                motion: self.motion.clone(),
                ..ScheduleConfig::new(kind)
            };
            let res = schedule::run(&desc, &cfg)?;
            let mut aligned_psnr = 0.0;
            let (mut epe_mean, mut epe_p90) = (0.0, 0.0);
            for (&k, gt) in &out.gt_long_fields {
                let warped = res.apply(k, out.clean.get(k))?;
                aligned_psnr += psnr_interior(&warped, &out.clean_reference, crop)?;
                let e = endpoint_error(&res.effective_field(k)?, gt, DEFAULT_EPE_CROP.min(self.args.size.0.min(self.args.size.1) / 4))?;
                epe_mean += e.mean;
                epe_p90 += e.p90;
            }
            let count = out.gt_long_fields.len() as f64;
            let aligned = res.apply_to_sequence(&out.sequence)?;
            let aligned: Vec<Frame> = aligned.into_values().collect();
            for &mode in &self.args.fusion {
                let restored = match mode {
                    FusionMode::Arw => arw_fuse(out.sequence.reference(), &aligned, self.fusion)?.0,
                    FusionMode::Mean => mean_fuse(out.sequence.reference(), &aligned)?,
                };
                cells.push(Cell {
                    psnr_aligned: aligned_psnr / count,
                    psnr_restored: psnr_interior(&restored, &out.clean_reference, crop)?,
                    epe_mean: epe_mean / count,
                    epe_p90: epe_p90 / count,
                });
            }
        }
        Ok(cells)
    }
}

pub fn run_bench(args: &BenchArgs) -> anyhow::Result<String> {
    if args.bins.is_empty() || args.bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
        bail!(InputError::msg(format!("bins must be finite and non-negative, got {:?}", args.bins)));
    }
    if args.seeds == 0 {
        bail!(InputError::msg("--seeds must be at least 1"));
    }
    let mut kinds = Vec::new();
    for s in &args.schedules {
        let k: ScheduleKind = s.parse().input()?;
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    kinds.sort_by_key(|k| ScheduleKind::ALL.iter().position(|a| a == k));
    let mut fusion_modes = args.fusion.clone();
    fusion_modes.sort();
    fusion_modes.dedup();
    let mut bins = args.bins.clone();
    bins.sort_by(f64::total_cmp);
    bins.dedup();
    let normalized = BenchArgs {
        bins,
        fusion: fusion_modes,
        ..args.clone()
    };
    let motion = args.motion.params()?;
    let fusion = args.fusion_params.params()?;
    let job = Job {
        args: &normalized,
        kinds: &kinds,
        motion: &motion,
        fusion: &fusion,
    };

    // validate every spec before spending time on estimation
    for &bin in &normalized.bins {
        for s in 0..args.seeds {
            let spec = job.spec(bin, derive_seed(args.seed, s))?;
            spec.validate().with_context(|| format!("bin {bin}, seed {s}")).input()?;
        }
    }

    let jobs: Vec<(usize, u64)> = (0..normalized.bins.len())
        .flat_map(|b| (0..args.seeds).map(move |s| (b, s)))
        .collect();
    let results: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(b, s)| job.run(normalized.bins[b], derive_seed(args.seed, s)))
        .collect::<anyhow::Result<_>>()?;

    let per_bin = kinds.len() * normalized.fusion.len();
    let mut rows = Vec::new();
    for (b, &bin) in normalized.bins.iter().enumerate() {
        let mut sums = vec![Cell::default(); per_bin];
        for ((jb, _), cells) in jobs.iter().zip(&results) {
            if *jb == b {
                sums.iter_mut().zip(cells).for_each(|(acc, c)| acc.add(c));
            }
        }
        let mut idx = 0;
        for kind in &kinds {
            for mode in &normalized.fusion {
                rows.push((bin, kind.name(), mode.name(), sums[idx].scaled(1.0 / args.seeds as f64)));
                idx += 1;
            }
        }
    }
    Ok(render(&rows, args.format))
}

fn render(rows: &[(f64, &str, &str, Cell)], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("bin,schedule,fusion,psnr_aligned,psnr_restored,epe_mean,epe_p90\n");
            for (bin, s, f, c) in rows {
                out.push_str(&format!(
                    "{bin},{s},{f},{:.4},{:.4},{:.4},{:.4}\n",
                    c.psnr_aligned, c.psnr_restored, c.epe_mean, c.epe_p90
                ));
            }
        }
        Format::Text => {
            out.push_str(&format!(
                "{:>6}  {:<12} {:<6} {:>12} {:>13} {:>9} {:>8}\n",
                "bin", "schedule", "fusion", "psnr_aligned", "psnr_restored", "epe_mean", "epe_p90"
            ));
            for (bin, s, f, c) in rows {
                out.push_str(&format!(
                    "{bin:>6}  {s:<12} {f:<6} {:>12.4} {:>13.4} {:>9.4} {:>8.4}\n",
                    c.psnr_aligned, c.psnr_restored, c.epe_mean, c.epe_p90
                ));
            }
        }
    }
    out
}

pub fn run(args: &BenchArgs) -> anyhow::Result<()> {
    print!("{}", run_bench(args)?);
    Ok(())
}
