use tempalign::eval::{endpoint_error, psnr, psnr_interior};
use tempalign::frame::{load_sequence, to_descriptor, SequenceKind};
use tempalign::fusion::{arw_fuse, mean_fuse, FusionParams};
use tempalign::schedule::{run, ScheduleConfig};
use tempalign::synth::{generate, write_output, MotionModel, SynthSpec};
use tempalign::{ScheduleKind, Sequence};

fn spec(motion: MotionModel, seed: u64) -> SynthSpec {
    SynthSpec::new((96, 96), 2, motion, seed, 15.0).unwrap()
}

#[test]
fn synth_align_fuse_improves_on_the_noisy_reference() {
    let out = generate(&spec(MotionModel::Constant { v: (2.3, -1.4) }, 21)).unwrap();
    let desc = out.sequence.try_map(|_, f| to_descriptor(f)).unwrap();
    let res = run(&desc, &ScheduleConfig::new(ScheduleKind::Iterative)).unwrap();
    for (k, gt) in &out.gt_long_fields {
        let e = endpoint_error(&res.effective_field(*k).unwrap(), gt, 16).unwrap();
        assert!(e.mean < 0.6, "k={k}: epe {}", e.mean);
    }
    let aligned: Vec<_> = res.apply_to_sequence(&out.sequence).unwrap().into_values().collect();
    let (arw, diag) = arw_fuse(out.sequence.reference(), &aligned, &FusionParams::default()).unwrap();
    let mean = mean_fuse(out.sequence.reference(), &aligned).unwrap();
    assert_eq!(diag.weights.len(), 4);

    let crop = 20;
    let single = psnr_interior(out.sequence.reference(), &out.clean_reference, crop).unwrap();
    let fused = psnr_interior(&arw, &out.clean_reference, crop).unwrap();
    let averaged = psnr_interior(&mean, &out.clean_reference, crop).unwrap();
    assert!(fused > single + 3.0, "arw {fused} vs single {single}");
    assert!(averaged > single + 3.0, "mean {averaged} vs single {single}");
}

#[test]
fn written_sequence_loads_back_as_the_clamped_frames() {
    let s = spec(MotionModel::Rotation { center: None, omega_deg: 1.5 }, 4);
    let out = generate(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_output(&out, &s, dir.path()).unwrap();
    let loaded = load_sequence(dir.path(), SequenceKind::PngSequence).unwrap();
    assert_eq!(loaded.len(), out.sequence.len());
    for k in loaded.offsets() {
        // 8-bit quantization only
        assert!(psnr(loaded.get(k), &out.sequence.get(k).clamped()).unwrap() > 50.0);
    }
}

#[test]
fn time_reversal_mirrors_both_sides() {
    let out = generate(&spec(MotionModel::Drift { v0: (1.5, 0.5), accel: (0.4, -0.2) }, 8)).unwrap();
    let desc = out.sequence.try_map(|_, f| to_descriptor(f)).unwrap();
    let mut reversed = desc.frames().to_vec();
    reversed.reverse();
    let reversed = Sequence::new(reversed).unwrap();
    for kind in ScheduleKind::ALL {
        let cfg = ScheduleConfig::new(kind);
        let a = run(&desc, &cfg).unwrap();
        let b = run(&reversed, &cfg).unwrap();
        for k in [-2, -1, 1, 2] {
            assert_eq!(a.chains[&k], b.chains[&-k], "{kind} k={k}");
            assert_eq!(a.aligned[&k], b.aligned[&-k], "{kind} k={k}");
        }
    }
}
