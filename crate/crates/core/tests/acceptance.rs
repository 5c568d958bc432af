//! Acceptance gate: one line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use tempalign::eval::{psnr, psnr_interior, DEFAULT_EPE_CROP};
use tempalign::frame::{add_gaussian_noise, to_descriptor};
use tempalign::fusion::{accuracy_reweight, arw_fuse, consistency_maps, mean_fuse, FusionParams, STENCIL};
use tempalign::motion::{block_cost, prior_block_vector};
use tempalign::rng::{derive_seed, XorShift64Star};
use tempalign::schedule::{plan, run, AlignmentOutput, ScheduleConfig};
use tempalign::synth::{generate, texture, MotionModel, SynthOutput, SynthSpec};
use tempalign::warp::backward_warp;
use tempalign::{Frame, MotionField, NoiseSpec, ScheduleKind, Sequence};

const MASTER_SEED: u64 = 0x7e3a_11c5;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn descriptors(seq: &Sequence) -> Sequence {
    seq.try_map(|_, f| to_descriptor(f)).unwrap()
}

fn synth(size: usize, n: usize, motion: MotionModel, seed: u64, sigma: f64) -> SynthOutput {
    generate(&SynthSpec::new((size, size), n, motion, seed, sigma).unwrap()).unwrap()
}

fn velocity(magnitude: f64, seed: u64) -> MotionModel {
    let angle = 2.0 * PI * XorShift64Star::new(derive_seed(seed, 99)).next_f64();
    MotionModel::Constant {
        v: (magnitude * angle.cos(), magnitude * angle.sin()),
    }
}

fn criterion_1() -> Outcome {
    for n in 1..=8usize {
        let it = plan(ScheduleKind::Iterative, n).unwrap();
        let pr = plan(ScheduleKind::Progressive, n).unwrap();
        let ind = plan(ScheduleKind::Independent, n).unwrap();
        if it.len() != n * (n + 1) || pr.len() != 2 * n || ind.len() != 2 * n {
            return Err(format!("n={n}: sizes {} {} {}", it.len(), pr.len(), ind.len()));
        }
        for i in 1..=n as i32 {
            for idx in [i, -i] {
                if it.refinements(idx) != n + 1 - i as usize {
                    return Err(format!("n={n}: index {idx} refined {} times", it.refinements(idx)));
                }
            }
        }
    }
    // refinement counters after an actual run
    let out = synth(32, 3, MotionModel::Constant { v: (1.0, 0.0) }, 1, 5.0);
    let res = run(&descriptors(&out.sequence), &ScheduleConfig::new(ScheduleKind::Iterative)).unwrap();
    for i in [-3i32, -2, -1, 1, 2, 3] {
        if res.state.refinements(i) != 4 - i.unsigned_abs() {
            return Err(format!("run: index {i} refined {} times", res.state.refinements(i)));
        }
    }
    Ok("N=1..8 plan sizes N(N+1)/2N/2N, refinements N+1-|i|".into())
}

fn criterion_2() -> Outcome {
    let out = synth(256, 2, MotionModel::Constant { v: (3.4, -1.7) }, 2, 10.0);
    let desc = descriptors(&out.sequence);
    let prog = run(&desc, &ScheduleConfig::new(ScheduleKind::Progressive)).unwrap();
    let iter = run(
        &desc,
        &ScheduleConfig {
            use_prior: false,
            ..ScheduleConfig::new(ScheduleKind::Iterative)
        },
    )
    .unwrap();
    let fields_equal = prog.chains == iter.chains && prog.final_fields == iter.final_fields;
    let frames_equal = prog.aligned == iter.aligned;
    let rgb_equal = prog.apply_to_sequence(&out.sequence).unwrap() == iter.apply_to_sequence(&out.sequence).unwrap();
    check(
        fields_equal && frames_equal && rgb_equal,
        format!("fields equal={fields_equal} aligned equal={frames_equal} rgb equal={rgb_equal} (256x256, N=2)"),
    )
}

/// PSNR of A_2's chain applied to the clean neighbor, against the clean reference.
fn a2_warp_psnr(out: &SynthOutput, res: &AlignmentOutput, crop: usize) -> f64 {
    let warped = res.apply(2, out.clean.get(2)).unwrap();
    psnr_interior(&warped, &out.clean_reference, crop).unwrap()
}

fn criterion_3() -> Outcome {
    let bins = [6.0f64, 8.0, 10.0];
    let seeds = 20u64;
    let mut gaps = Vec::new();
    let mut lines = Vec::new();
    let mut ok = true;
    for &bin in &bins {
        // chain displacement plus the estimator's border-artifact margin
        let crop = (2.0 * bin).ceil() as usize + DEFAULT_EPE_CROP;
        let mut wins = 0;
        let (mut sum_it, mut sum_pr) = (0.0, 0.0);
        for s in 0..seeds {
            let seed = derive_seed(MASTER_SEED, s);
            let out = synth(128, 2, velocity(bin, seed), seed, 10.0);
            let desc = descriptors(&out.sequence);
            let it = run(&desc, &ScheduleConfig::new(ScheduleKind::Iterative)).unwrap();
            let pr = run(&desc, &ScheduleConfig::new(ScheduleKind::Progressive)).unwrap();
            let (pi, pp) = (a2_warp_psnr(&out, &it, crop), a2_warp_psnr(&out, &pr, crop));
            wins += (pi >= pp) as u32;
            sum_it += pi;
            sum_pr += pp;
        }
        let (mi, mp) = (sum_it / seeds as f64, sum_pr / seeds as f64);
        let frac = wins as f64 / seeds as f64;
        ok &= frac >= 0.7 && mi >= mp;
        gaps.push(mi - mp);
        lines.push(format!("bin {bin}: iterative {mi:.3} dB, progressive {mp:.3} dB, wins {wins}/{seeds}"));
    }
    let monotone = gaps.windows(2).all(|g| g[1] >= g[0]);
    ok &= monotone;
    let gap_str: Vec<String> = gaps.iter().map(|g| format!("{g:+.3}")).collect();
    check(ok, format!("{}; gaps [{}] non-decreasing={monotone}", lines.join("; "), gap_str.join(", ")))
}

fn criterion_4() -> Outcome {
    let mut checked = 0usize;
    for s in 0..5u64 {
        let seed = derive_seed(MASTER_SEED ^ 4, s);
        let out = synth(128, 3, velocity(3.0 + s as f64, seed), seed, 10.0);
        let desc = descriptors(&out.sequence);
        let cfg = ScheduleConfig::new(ScheduleKind::Iterative);
        let res = run(&desc, &cfg).unwrap();
        for rec in res.records.iter().filter(|r| r.exec.t > 1) {
            let (i, k) = (rec.exec.i, rec.exec.k);
            let side = k.signum();
            // rebuild the carried source and the prior h_i^{t-1} from the chains
            let mut carried = desc.get(k).clone();
            for f in &res.chains[&k][..(k.abs() - i.abs()) as usize] {
                carried = backward_warp(&carried, f).unwrap();
            }
            let prior = &res.chains[&(k - side)][(k.abs() - 1 - i.abs()) as usize];
            let target = desc.get(i - side);
            for b in &rec.estimate.blocks {
                let v = prior_block_vector(prior, b.origin, cfg.motion.block_size);
                let prior_cost = block_cost(&carried, target, b.origin, v, &cfg.motion).unwrap();
                if b.prior_cost != Some(prior_cost) || b.cost > prior_cost {
                    return Err(format!(
                        "seed {s} exec i={i} k={k}: block {:?} cost {} vs prior {prior_cost}",
                        b.origin, b.cost
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} refined blocks, none worse than their prior"))
}

mod oracle {
    use super::*;

    pub fn accuracy(reference: &Frame, aligned: &Frame, eps: f64) -> Frame {
        let (w, h, ch) = (aligned.width(), aligned.height(), aligned.channels());
        let vec_at = |f: &Frame, x: isize, y: isize| -> Vec<f64> {
            let xx = x.clamp(0, w as isize - 1) as usize;
            let yy = y.clamp(0, h as isize - 1) as usize;
            (0..ch).map(|c| f.get(xx, yy, c) as f64).collect()
        };
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut out = Frame::new(w, h, ch);
        let mut data = vec![0.0f32; w * h * ch];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let v0 = vec_at(reference, x, y);
                let neigh: Vec<Vec<f64>> = STENCIL.iter().map(|&(dx, dy)| vec_at(aligned, x + dx, y + dy)).collect();
                let sims: Vec<f64> = neigh
                    .iter()
                    .map(|a| a.iter().zip(&v0).map(|(p, q)| p * q).sum::<f64>() / ((norm(a) + eps) * (norm(&v0) + eps)))
                    .collect();
                let z: f64 = sims.iter().map(|s| s.exp()).sum();
                for c in 0..ch {
                    let v: f64 = neigh.iter().zip(&sims).map(|(a, s)| s.exp() / z * a[c]).sum();
                    data[c * w * h + y as usize * w + x as usize] = v as f32;
                }
            }
        }
        out = Frame::from_planar(w, h, ch, data).unwrap_or(out);
        out
    }

    pub fn consistency(set: &[Frame], alpha: f64) -> Vec<Frame> {
        let n = set[0].samples().len();
        let avg: Vec<f64> = (0..n)
            .map(|i| set.iter().map(|f| f.samples()[i] as f64).sum::<f64>() / set.len() as f64)
            .collect();
        set.iter()
            .map(|f| {
                let data = (0..n).map(|i| (alpha * (f.samples()[i] as f64 - avg[i]).powi(2)).exp() as f32).collect();
                Frame::from_planar(f.width(), f.height(), f.channels(), data).unwrap()
            })
            .collect()
    }

    pub fn fuse(reference: &Frame, set: &[Frame], eps: f64, alpha: f64) -> Frame {
        let c = consistency(set, alpha);
        let acc: Vec<Frame> = set.iter().map(|a| accuracy(reference, a, eps)).collect();
        let n = reference.samples().len();
        let data = (0..n)
            .map(|i| {
                let mut num = reference.samples()[i] as f64;
                let mut den = 1.0;
                for (a, g) in acc.iter().zip(&c) {
                    num += a.samples()[i] as f64 * g.samples()[i] as f64;
                    den += g.samples()[i] as f64;
                }
                (num / den) as f32
            })
            .collect();
        Frame::from_planar(reference.width(), reference.height(), reference.channels(), data).unwrap()
    }
}

fn max_abs_diff(a: &Frame, b: &Frame) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).abs() as f64)
        .fold(0.0, f64::max)
}

fn criterion_5() -> Outcome {
    let params = FusionParams::default();
    let mut rng = XorShift64Star::new(MASTER_SEED ^ 5);
    let mut worst = 0.0f64;
    for inst in 0..200 {
        let w = 1 + (rng.next_u64() % 32) as usize;
        let h = 1 + (rng.next_u64() % 32) as usize;
        let count = 2 + (rng.next_u64() % 5) as usize;
        let frame = |rng: &mut XorShift64Star| {
            let data = (0..w * h * 3).map(|_| rng.next_f64() as f32).collect();
            Frame::from_planar(w, h, 3, data).unwrap()
        };
        let reference = frame(&mut rng);
        let set: Vec<Frame> = (0..count).map(|_| frame(&mut rng)).collect();

        let (_, fbar) = accuracy_reweight(&reference, &set[0], &params).unwrap();
        worst = worst.max(max_abs_diff(&fbar, &oracle::accuracy(&reference, &set[0], 1e-8)));
        let maps = consistency_maps(&set, &params).unwrap();
        for (m, o) in maps.iter().zip(oracle::consistency(&set, -1.0)) {
            worst = worst.max(max_abs_diff(m.gains(), &o));
        }
        let (fused, _) = arw_fuse(&reference, &set, &params).unwrap();
        worst = worst.max(max_abs_diff(&fused, &oracle::fuse(&reference, &set, 1e-8, -1.0)));
        if worst > 1e-5 {
            return Err(format!("instance {inst} ({w}x{h}, {count} frames): max abs diff {worst:e}"));
        }
    }
    Ok(format!("200 instances, max abs diff {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let params = FusionParams::default();
    let mut rng = XorShift64Star::new(6);
    let reference = Frame::from_planar(5, 5, 3, (0..75).map(|_| rng.next_f64() as f32).collect()).unwrap();
    let (wm, _) = accuracy_reweight(&reference, &Frame::filled(5, 5, 3, 0.3), &params).unwrap();
    let uniform = (0..5)
        .flat_map(|y| (0..5).map(move |x| (x, y)))
        .flat_map(|(x, y)| wm.get(x, y).to_vec())
        .map(|v| (v as f64 - 1.0 / 9.0).abs())
        .fold(0.0, f64::max);

    let hot_ref = Frame::from_fn(3, 3, 3, |_, _, c| (c == 0) as u8 as f32);
    let hot = Frame::from_fn(3, 3, 3, |x, y, c| {
        let center = x == 1 && y == 1;
        ((center && c == 0) || (!center && c == 1)) as u8 as f32
    });
    let (wm, _) = accuracy_reweight(&hot_ref, &hot, &params).unwrap();
    let e = std::f64::consts::E;
    let center_err = (wm.get(1, 1)[4] as f64 - e / (e + 8.0)).abs();

    let maps = consistency_maps(&[Frame::filled(4, 4, 3, 0.0), Frame::filled(4, 4, 3, 1.0)], &params).unwrap();
    let c_err = maps
        .iter()
        .flat_map(|m| m.gains().samples().to_vec())
        .map(|v| (v as f64 - (-0.25f64).exp()).abs())
        .fold(0.0, f64::max);
    check(
        uniform <= 1e-6 && center_err <= 1e-6 && c_err <= 1e-6,
        format!("uniform err {uniform:.1e}, single-hot err {center_err:.1e}, exp(-0.25) err {c_err:.1e}"),
    )
}

fn criterion_7() -> Outcome {
    let clean = texture(MASTER_SEED ^ 7, (256, 256), 0.25).unwrap();
    let noisy: Vec<Frame> = (0..5)
        .map(|j| add_gaussian_noise(&clean, NoiseSpec::new(20.0, derive_seed(MASTER_SEED ^ 7, j)).unwrap()))
        .collect();
    let single = psnr(&noisy[0], &clean).unwrap();
    let mean = psnr(&mean_fuse(&noisy[0], &noisy[1..]).unwrap(), &clean).unwrap();
    let (arw, _) = arw_fuse(&noisy[0], &noisy[1..], &FusionParams::default()).unwrap();
    let arw = psnr(&arw, &clean).unwrap();
    let gain = mean - single;
    check(
        (6.5..=7.5).contains(&gain) && arw >= mean - 0.2,
        format!("single {single:.3} dB, mean {mean:.3} dB (gain {gain:.3}), arw {arw:.3} dB"),
    )
}

fn criterion_8() -> Outcome {
    let mut details = Vec::new();
    let (mut gains_ok, mut min_c_ok) = (true, true);
    let mut mean_c_bad = 0.0;
    let mut mean_c_good = 0.0;
    for s in 0..10u64 {
        let seed = derive_seed(MASTER_SEED ^ 8, s);
        let clean = texture(seed, (128, 128), 0.25).unwrap();
        let noise = |j: u64, f: &Frame| add_gaussian_noise(f, NoiseSpec::new(10.0, derive_seed(seed, j)).unwrap());
        let shifted = backward_warp(&clean, &MotionField::constant(128, 128, 5.0, 0.0)).unwrap();
        let bad = (s % 4) as usize;
        let reference = noise(0, &clean);
        let set: Vec<Frame> = (0..4)
            .map(|j| noise(j as u64 + 1, if j == bad { &shifted } else { &clean }))
            .collect();
        let (arw, diag) = arw_fuse(&reference, &set, &FusionParams::default()).unwrap();
        let mean = mean_fuse(&reference, &set).unwrap();
        let (pa, pm) = (psnr_interior(&arw, &clean, 8).unwrap(), psnr_interior(&mean, &clean, 8).unwrap());
        let min_idx = diag
            .mean_consistency
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        gains_ok &= pa - pm >= 0.5;
        min_c_ok &= min_idx == bad;
        mean_c_bad += diag.mean_consistency[bad] / 10.0;
        mean_c_good += diag.mean_consistency.iter().enumerate().filter(|&(i, _)| i != bad).map(|(_, c)| c).sum::<f64>() / 30.0;
        details.push(format!("{:+.2}", pa - pm));
    }
    check(
        gains_ok && min_c_ok,
        format!(
            "arw - mean [{}] dB (need >= 0.5), corrupted frame has min C in every seed={min_c_ok}, mean C corrupted {mean_c_bad:.4} vs aligned {mean_c_good:.4}",
            details.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let cases: Vec<(MotionModel, &str)> = vec![
        (MotionModel::Constant { v: (5.0, 0.0) }, "10 px"),
        (MotionModel::Constant { v: (3.65, -3.05) }, "9.5 px oblique"),
        (MotionModel::Constant { v: (-1.75, 1.125) }, "4.2 px"),
        (MotionModel::Rotation { center: None, omega_deg: 2.0 }, "4 deg"),
        (MotionModel::Rotation { center: None, omega_deg: -1.5 }, "-3 deg"),
    ];
    let mut worst = f64::INFINITY;
    let mut lines = Vec::new();
    for (s, (motion, label)) in cases.into_iter().enumerate() {
        let out = synth(128, 2, motion, derive_seed(MASTER_SEED ^ 9, s as u64), 0.0);
        for k in [-2, -1, 1, 2] {
            let gt = &out.gt_long_fields[&k];
            let crop = gt.max_abs().ceil() as usize + 2;
            let warped = backward_warp(out.clean.get(k), gt).unwrap();
            let p = psnr_interior(&warped, &out.clean_reference, crop).unwrap();
            worst = worst.min(p);
        }
        lines.push(label.to_string());
    }
    check(worst >= 40.0, format!("min PSNR {worst:.2} dB over {}", lines.join(", ")))
}

fn criterion_10() -> Outcome {
    let base = add_gaussian_noise(&texture(10, (96, 96), 0.25).unwrap(), NoiseSpec::new(15.0, 3).unwrap());
    let seq = Sequence::new(vec![base.clone(); 5]).unwrap();
    let desc = descriptors(&seq);
    for kind in ScheduleKind::ALL {
        let res = run(&desc, &ScheduleConfig::new(kind)).unwrap();
        if !res.chains.values().flatten().all(MotionField::is_zero) {
            return Err(format!("{kind}: non-zero field"));
        }
        if !res.aligned.values().all(|f| f == desc.reference()) {
            return Err(format!("{kind}: aligned descriptor differs from reference"));
        }
        let rgb: BTreeMap<i32, Frame> = res.apply_to_sequence(&seq).unwrap();
        if !rgb.values().all(|f| f == &base) {
            return Err(format!("{kind}: aligned RGB differs from reference"));
        }
    }
    Ok("zero fields and bit-exact aligned frames for all schedules".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("plan cardinality", Duration::from_secs(1), criterion_1),
        ("progressive equals iterative without priors", Duration::from_secs(10), criterion_2),
        ("iterative beats progressive under large motion", Duration::from_secs(300), criterion_3),
        ("prior never hurts", Duration::from_secs(60), criterion_4),
        ("ARW oracle equivalence", Duration::from_secs(30), criterion_5),
        ("ARW closed forms", Duration::from_secs(1), criterion_6),
        ("static denoising gain", Duration::from_secs(10), criterion_7),
        ("ARW robustness to a mis-shifted frame", Duration::from_secs(30), criterion_8),
        ("warp fidelity", Duration::from_secs(5), criterion_9),
        ("static fixed point", Duration::from_secs(5), criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (idx, (name, budget, f)) in criteria.iter().enumerate() {
        let id = idx + 1;
        if !filter.is_empty() && !filter.iter().any(|p| *p == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(d) => (false, d),
        };
        failed += (!pass) as u32;
        writeln!(
            out,
            "criterion {id:>2} [{}] {name}: {detail} ({:.2}s / {}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        )
        .unwrap();
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        writeln!(out, "{failed} criteria failed").unwrap();
        ExitCode::FAILURE
    }
}
