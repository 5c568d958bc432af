//! Alignment schedules: independent, progressive and iterative.
//!
//! A long-range alignment `A_k` (neighbor `k` onto the reference) is a chain
//! of sub-alignments `a_i: F_i → F_{i−1}` for `i = k, …, 1`. Each hop warps
//! the carried frame one step closer to the reference. The iterative
//! schedule re-estimates every shared hop once per long-range alignment that
//! contains it, seeding the estimator with the hop's previous field.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{endpoint_error, DEFAULT_EPE_CROP};
use crate::frame::{Frame, Sequence};
use crate::motion::{estimate_detailed, Estimate, MotionField, MotionParams};
use crate::warp::{backward_warp, compose_fields};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScheduleKind {
    Independent,
    Progressive,
    Iterative,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 3] = [ScheduleKind::Independent, ScheduleKind::Progressive, ScheduleKind::Iterative];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Independent => "independent",
            ScheduleKind::Progressive => "progressive",
            ScheduleKind::Iterative => "iterative",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown schedule '{s}' (independent | progressive | iterative)")))
    }
}

/// One sub-alignment execution: hop `i` inside long-range alignment `k`,
/// at refinement `t` (1-based). The sign of `i` and `k` is the temporal side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubAlignmentExec {
    pub i: i32,
    pub k: i32,
    pub t: u32,
}

impl SubAlignmentExec {
    pub fn side(&self) -> i32 {
        self.k.signum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionPlan {
    pub kind: ScheduleKind,
    pub n: usize,
    pub execs: Vec<SubAlignmentExec>,
}

impl ExecutionPlan {
    pub fn len(&self) -> usize {
        self.execs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.execs.is_empty()
    }

    /// Number of executions of hop `i`.
    pub fn refinements(&self, i: i32) -> usize {
        self.execs.iter().filter(|e| e.i == i).count()
    }
}

/// Builds the execution plan; the positive side comes first.
///
/// Independent plans hold one direct `k → 0` execution per neighbor, encoded
/// with `i = k`. Progressive plans hold each hop once per side.
pub fn plan(kind: ScheduleKind, n: usize) -> Result<ExecutionPlan> {
    if n < 1 {
        return Err(Error::InvalidParameter("plan needs n >= 1".into()));
    }
    let n_i = n as i32;
    let mut execs = Vec::new();
    for side in [1, -1] {
        for k in 1..=n_i {
            match kind {
                ScheduleKind::Independent | ScheduleKind::Progressive => execs.push(SubAlignmentExec {
                    i: side * k,
                    k: side * k,
                    t: 1,
                }),
                ScheduleKind::Iterative => execs.extend((1..=k).rev().map(|i| SubAlignmentExec {
                    i: side * i,
                    k: side * k,
                    t: (k + 1 - i) as u32,
                })),
            }
        }
    }
    Ok(ExecutionPlan { kind, n, execs })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub motion: MotionParams,
    /// Seed refinements with the hop's previous field. Only meaningful for
    /// the iterative schedule; disabling it makes every execution a fresh
    /// estimate.
    pub use_prior: bool,
    /// Highest refinement counter that still receives a prior.
    pub max_refines_per_index: Option<u32>,
}

impl ScheduleConfig {
    pub fn new(kind: ScheduleKind) -> Self {
        Self {
            kind,
            motion: MotionParams::default(),
            use_prior: true,
            max_refines_per_index: None,
        }
    }

    fn prior_allowed(&self, t: u32) -> bool {
        self.kind == ScheduleKind::Iterative
            && self.use_prior
            && t > 1
            && self.max_refines_per_index.is_none_or(|cap| t <= cap)
    }
}

/// Latest field and refinement counter per hop index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubAlignmentState {
    entries: BTreeMap<i32, (MotionField, u32)>,
}

impl SubAlignmentState {
    pub fn field(&self, i: i32) -> Option<&MotionField> {
        self.entries.get(&i).map(|(f, _)| f)
    }

    pub fn refinements(&self, i: i32) -> u32 {
        self.entries.get(&i).map_or(0, |&(_, t)| t)
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> + '_ {
        self.entries.keys().copied()
    }

    fn store(&mut self, i: i32, field: MotionField, t: u32) -> Result<()> {
        if let Some((old, _)) = self.entries.get(&i) {
            if old.dims() != field.dims() {
                return Err(Error::dims(
                    format!("{}x{}", old.width(), old.height()),
                    format!("{}x{}", field.width(), field.height()),
                ));
            }
        }
        self.entries.insert(i, (field, t));
        Ok(())
    }
}

/// Ground-truth fields used for per-execution endpoint-error diagnostics.
#[derive(Clone, Debug, Default)]
pub struct GroundTruth {
    /// Hop fields keyed by `i`.
    pub hops: BTreeMap<i32, MotionField>,
    /// Long-range fields keyed by `k`.
    pub long: BTreeMap<i32, MotionField>,
}

#[derive(Clone, Debug)]
pub struct ExecRecord {
    pub exec: SubAlignmentExec,
    pub used_prior: bool,
    pub estimate: Estimate,
    pub epe: Option<f64>,
}

impl ExecRecord {
    /// `exec side=<±> i=<n> k=<n> t=<n> cost=<f> epe=<f|na>`
    pub fn to_line(&self) -> String {
        let e = &self.exec;
        let side = if e.side() > 0 { '+' } else { '-' };
        let epe = self.epe.map_or_else(|| "na".to_string(), |v| format!("{v:.4}"));
        format!(
            "exec side={side} i={} k={} t={} cost={:.6} epe={epe}",
            e.i.abs(),
            e.k.abs(),
            e.t,
            self.estimate.mean_block_cost()
        )
    }
}

#[derive(Clone, Debug)]
pub struct AlignmentOutput {
    pub kind: ScheduleKind,
    /// `F̂_k^0` for every neighbor `k`.
    pub aligned: BTreeMap<i32, Frame>,
    /// Fields applied to neighbor `k`, in application order.
    pub chains: BTreeMap<i32, Vec<MotionField>>,
    /// Latest field per hop index (per neighbor for the independent schedule).
    pub final_fields: BTreeMap<i32, MotionField>,
    pub state: SubAlignmentState,
    /// Executions in run order, positive side first.
    pub records: Vec<ExecRecord>,
}

impl AlignmentOutput {
    fn chain(&self, k: i32) -> Result<&[MotionField]> {
        self.chains
            .get(&k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidParameter(format!("no alignment for neighbor {k}")))
    }

    /// Warps `frame` (neighbor `k`'s content in any channel layout) hop by
    /// hop through the same fields used for the descriptor frames.
    pub fn apply(&self, k: i32, frame: &Frame) -> Result<Frame> {
        let mut carried = frame.clone();
        for field in self.chain(k)? {
            carried = backward_warp(&carried, field)?;
        }
        Ok(carried)
    }

    /// Applies every chain to the matching frame of `sequence`.
    pub fn apply_to_sequence(&self, sequence: &Sequence) -> Result<BTreeMap<i32, Frame>> {
        self.chains.keys().map(|&k| Ok((k, self.apply(k, sequence.get(k))?))).collect()
    }

    /// The chain of neighbor `k` composed into a single field.
    pub fn effective_field(&self, k: i32) -> Result<MotionField> {
        let chain = self.chain(k)?;
        let mut fields = chain.iter().rev();
        let mut eff = fields.next().expect("chains are never empty").clone();
        for outer in fields {
            eff = compose_fields(outer, &eff)?;
        }
        Ok(eff)
    }

    pub fn exec_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.records.iter().map(ExecRecord::to_line)
    }
}

struct SideResult {
    aligned: Vec<(i32, Frame)>,
    chains: Vec<(i32, Vec<MotionField>)>,
    state: SubAlignmentState,
    records: Vec<ExecRecord>,
}

fn epe_of(field: &MotionField, gt: Option<&MotionField>) -> Result<Option<f64>> {
    let Some(gt) = gt else { return Ok(None) };
    let crop = DEFAULT_EPE_CROP.min(field.width().min(field.height()) / 4);
    Ok(Some(endpoint_error(field, gt, crop)?.mean))
}

fn run_side(sequence: &Sequence, config: &ScheduleConfig, side: i32, gt: Option<&GroundTruth>) -> Result<SideResult> {
    let n = sequence.n() as i32;
    let mut out = SideResult {
        aligned: Vec::new(),
        chains: Vec::new(),
        state: SubAlignmentState::default(),
        records: Vec::new(),
    };
    for k in (1..=n).map(|k| side * k) {
        if config.kind == ScheduleKind::Independent {
            let params = config.motion.with_search_radius(config.motion.search_radius * k.unsigned_abs() as usize);
            let est = estimate_detailed(sequence.get(k), sequence.reference(), &params, None)?;
            let aligned = backward_warp(sequence.get(k), &est.field)?;
            let exec = SubAlignmentExec { i: k, k, t: 1 };
            out.records.push(ExecRecord {
                exec,
                used_prior: false,
                epe: epe_of(&est.field, gt.and_then(|g| g.long.get(&k)))?,
                estimate: est.clone(),
            });
            out.state.store(k, est.field.clone(), 1)?;
            out.aligned.push((k, aligned));
            out.chains.push((k, vec![est.field]));
            continue;
        }
        let mut carried = sequence.get(k).clone();
        let mut chain = Vec::with_capacity(k.unsigned_abs() as usize);
        for i in (1..=k.abs()).rev().map(|i| side * i) {
            let t = match config.kind {
                ScheduleKind::Iterative => (k.abs() + 1 - i.abs()) as u32,
                _ => 1,
            };
            let prior = if config.prior_allowed(t) {
                out.state.field(i)
            } else {
                None
            };
            let used_prior = prior.is_some();
            let est = estimate_detailed(&carried, sequence.get(i - side), &config.motion, prior)?;
            carried = backward_warp(&carried, &est.field)?;
            out.records.push(ExecRecord {
                exec: SubAlignmentExec { i, k, t },
                used_prior,
                epe: epe_of(&est.field, gt.and_then(|g| g.hops.get(&i)))?,
                estimate: est.clone(),
            });
            out.state.store(i, est.field.clone(), t)?;
            chain.push(est.field);
        }
        out.aligned.push((k, carried));
        out.chains.push((k, chain));
    }
    Ok(out)
}

/// Runs the configured schedule over a sequence of descriptor frames.
pub fn run(sequence: &Sequence, config: &ScheduleConfig) -> Result<AlignmentOutput> {
    run_with_ground_truth(sequence, config, None)
}

/// Like [`run`], also scoring every execution against ground truth.
pub fn run_with_ground_truth(sequence: &Sequence, config: &ScheduleConfig, gt: Option<&GroundTruth>) -> Result<AlignmentOutput> {
    config.motion.validate()?;
    let ch = sequence.shape().channels;
    if ch < 3 {
        return Err(Error::ChannelCount {
            expected: ">= 3 descriptor channels",
            found: ch,
        });
    }
    let (pos, neg) = rayon::join(
        || run_side(sequence, config, 1, gt),
        || run_side(sequence, config, -1, gt),
    );
    let (pos, neg) = (pos?, neg?);

    let mut output = AlignmentOutput {
        kind: config.kind,
        aligned: BTreeMap::new(),
        chains: BTreeMap::new(),
        final_fields: BTreeMap::new(),
        state: SubAlignmentState::default(),
        records: Vec::new(),
    };
    for side in [pos, neg] {
        output.aligned.extend(side.aligned);
        output.chains.extend(side.chains);
        output.records.extend(side.records);
        output.state.entries.extend(side.state.entries);
    }
    output.final_fields = output.state.entries.iter().map(|(&i, (f, _))| (i, f.clone())).collect();
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::to_descriptor;
    use crate::synth::{generate, MotionModel, SynthSpec};

    fn exec(i: i32, k: i32, t: u32) -> SubAlignmentExec {
        SubAlignmentExec { i, k, t }
    }

    #[test]
    fn iterative_n2_pattern() {
        let p = plan(ScheduleKind::Iterative, 2).unwrap();
        assert_eq!(
            p.execs,
            vec![exec(1, 1, 1), exec(2, 2, 1), exec(1, 2, 2), exec(-1, -1, 1), exec(-2, -2, 1), exec(-1, -2, 2)]
        );
    }

    #[test]
    fn progressive_n3_holds_each_hop_once() {
        let p = plan(ScheduleKind::Progressive, 3).unwrap();
        assert_eq!(p.len(), 6);
        for i in [-3, -2, -1, 1, 2, 3] {
            assert_eq!(p.refinements(i), 1);
        }
    }

    #[test]
    fn n1_iterative_equals_progressive_plan() {
        assert_eq!(
            plan(ScheduleKind::Iterative, 1).unwrap().execs,
            plan(ScheduleKind::Progressive, 1).unwrap().execs
        );
        assert!(plan(ScheduleKind::Iterative, 0).is_err());
    }

    #[test]
    fn kind_parsing() {
        for k in ScheduleKind::ALL {
            assert_eq!(k.to_string().parse::<ScheduleKind>().unwrap(), k);
        }
        assert!("greedy".parse::<ScheduleKind>().is_err());
    }

    fn descriptor_sequence(motion: MotionModel, n: usize, seed: u64, sigma: f64) -> (Sequence, GroundTruth) {
        let spec = SynthSpec::new((64, 64), n, motion, seed, sigma).unwrap();
        let out = generate(&spec).unwrap();
        let desc = out.sequence.try_map(|_, f| to_descriptor(f)).unwrap();
        (
            desc,
            GroundTruth {
                hops: out.gt_hop_fields,
                long: out.gt_long_fields,
            },
        )
    }

    #[test]
    fn iterative_refinement_counts() {
        let (seq, _) = descriptor_sequence(MotionModel::Constant { v: (1.0, 0.5) }, 3, 2, 5.0);
        let out = run(&seq, &ScheduleConfig::new(ScheduleKind::Iterative)).unwrap();
        for i in [-3i32, -2, -1, 1, 2, 3] {
            assert_eq!(out.state.refinements(i), 3 + 1 - i.unsigned_abs());
        }
        assert_eq!(out.records.len(), 12);
        assert!(out.records.iter().all(|r| r.used_prior == (r.exec.t > 1)));
        assert_eq!(out.aligned.len(), 6);
    }

    #[test]
    fn refine_cap_limits_prior_usage() {
        let (seq, _) = descriptor_sequence(MotionModel::Constant { v: (1.0, 0.0) }, 3, 3, 5.0);
        let cfg = ScheduleConfig {
            max_refines_per_index: Some(2),
            ..ScheduleConfig::new(ScheduleKind::Iterative)
        };
        let out = run(&seq, &cfg).unwrap();
        for r in &out.records {
            assert_eq!(r.used_prior, r.exec.t == 2, "{:?}", r.exec);
        }
    }

    #[test]
    fn exec_lines_are_formatted() {
        let (seq, gt) = descriptor_sequence(MotionModel::Constant { v: (2.0, 0.0) }, 2, 4, 0.0);
        let out = run_with_ground_truth(&seq, &ScheduleConfig::new(ScheduleKind::Iterative), Some(&gt)).unwrap();
        let lines: Vec<String> = out.exec_lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[2].starts_with("exec side=+ i=1 k=2 t=2 cost="), "{}", lines[2]);
        assert!(lines[5].starts_with("exec side=- i=1 k=2 t=2 cost="));
        assert!(!lines[0].ends_with("epe=na"));
        let bare = run(&seq, &ScheduleConfig::new(ScheduleKind::Progressive)).unwrap();
        assert!(bare.exec_lines().all(|l| l.ends_with("epe=na")));
    }

    #[test]
    fn translation_is_recovered_through_the_chain() {
        let (seq, gt) = descriptor_sequence(MotionModel::Constant { v: (4.0, 0.0) }, 2, 5, 0.0);
        let out = run(&seq, &ScheduleConfig::new(ScheduleKind::Iterative)).unwrap();
        for k in [-2, 2] {
            let eff = out.effective_field(k).unwrap();
            let e = endpoint_error(&eff, &gt.long[&k], DEFAULT_EPE_CROP).unwrap();
            assert!(e.mean <= 0.5, "k={k}: {e:?}");
        }
    }

    #[test]
    fn rejects_non_descriptor_input() {
        let f = Frame::new(32, 32, 1);
        let seq = Sequence::new(vec![f.clone(), f.clone(), f]).unwrap();
        assert!(matches!(
            run(&seq, &ScheduleConfig::new(ScheduleKind::Iterative)),
            Err(Error::ChannelCount { .. })
        ));
    }

    #[test]
    fn apply_matches_descriptor_warps() {
        let (seq, _) = descriptor_sequence(MotionModel::Constant { v: (1.5, 0.0) }, 2, 6, 5.0);
        let out = run(&seq, &ScheduleConfig::new(ScheduleKind::Iterative)).unwrap();
        let applied = out.apply_to_sequence(&seq).unwrap();
        assert_eq!(applied, out.aligned);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn plan_cardinality(n in 1usize..=8) {
                prop_assert_eq!(plan(ScheduleKind::Iterative, n).unwrap().len(), n * (n + 1));
                prop_assert_eq!(plan(ScheduleKind::Progressive, n).unwrap().len(), 2 * n);
                prop_assert_eq!(plan(ScheduleKind::Independent, n).unwrap().len(), 2 * n);
            }

            #[test]
            fn iterative_plan_structure(n in 1usize..=8) {
                let p = plan(ScheduleKind::Iterative, n).unwrap();
                let n_i = n as i32;
                for e in &p.execs {
                    prop_assert!(1 <= e.i.abs() && e.i.abs() <= e.k.abs() && e.k.abs() <= n_i);
                    prop_assert_eq!(e.i.signum(), e.k.signum());
                    prop_assert_eq!(e.t as i32, e.k.abs() + 1 - e.i.abs());
                }
                for i in 1..=n_i {
                    prop_assert_eq!(p.refinements(i), (n_i + 1 - i) as usize);
                    prop_assert_eq!(p.refinements(-i), (n_i + 1 - i) as usize);
                }
                for side in p.execs.chunks(n * (n + 1) / 2) {
                    let order: Vec<(i32, i32)> = side.iter().map(|e| (e.k.abs(), -e.i.abs())).collect();
                    let mut sorted = order.clone();
                    sorted.sort();
                    prop_assert_eq!(order, sorted);
                }
            }
        }
    }
}
