//! Multi-frame temporal alignment and fusion.
//!
//! The crate aligns the `2N` neighbors of a frame window onto the center
//! frame using chains of single-hop motion estimates, optionally refining
//! shared hops with previously estimated fields as priors, and fuses the
//! aligned stack with accuracy- and consistency-based re-weighting. A
//! synthetic generator with analytic ground-truth motion makes alignment
//! error directly measurable.

pub mod error;
pub mod eval;
pub mod frame;
pub mod fusion;
pub mod motion;
pub mod rng;
pub mod schedule;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
pub use frame::{Frame, NoiseSpec, Sequence};
pub use motion::{MotionField, MotionParams};
pub use schedule::{ExecutionPlan, ScheduleKind, SubAlignmentExec};
