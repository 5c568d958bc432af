use std::path::PathBuf;

use clap::Args;
use tempalign::synth::{generate, write_output, Degradation, MotionModel, SynthSpec, DEFAULT_CUTOFF, DEFAULT_MAX_HOP_DISPLACEMENT};

use super::parse_size;
use crate::errors::InputContext;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Frame size as WxH.
    #[arg(long, default_value = "256x256", value_parser = parse_size)]
    pub size: (usize, usize),
    /// Neighbors per side.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// const:vx,vy | drift:vx,vy,ax,ay | rot:deg[,cx,cy]
    #[arg(long, default_value = "const:0,0", allow_hyphen_values = true)]
    pub motion: String,
    /// Gaussian noise level on the 0-255 scale.
    #[arg(long, default_value_t = 20.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Texture cutoff frequency in (0, 1].
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: f64,
    /// none | noise | blur:<radius>
    #[arg(long, default_value = "noise")]
    pub degradation: String,
    /// Largest allowed ground-truth hop displacement, in pixels.
    #[arg(long, default_value_t = DEFAULT_MAX_HOP_DISPLACEMENT)]
    pub max_hop: f64,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn spec(&self) -> anyhow::Result<SynthSpec> {
        let motion: MotionModel = self.motion.parse().input()?;
        let mut spec = SynthSpec::new(self.size, self.n, motion, self.seed, self.sigma).input()?;
        spec.texture_cutoff = self.cutoff;
        spec.degradation = self.degradation.parse::<Degradation>().input()?;
        spec.max_hop_displacement = self.max_hop;
        Ok(spec)
    }
}

pub fn run(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = args.spec()?;
    let output = generate(&spec).input()?;
    let manifest = write_output(&output, &spec, &args.out)?;
    println!("{}", manifest.display());
    Ok(())
}
