use mfsr_core::degrade::{degrade_scene, ImagingModel};
use mfsr_core::enhance::Interpolator;
use mfsr_core::metrics::{self, MetricSet};
use mfsr_core::pipeline::{self, PipelineConfig, PreparedScene};
use mfsr_core::raster::{Kernel, ResampleMethod, Shift};
use mfsr_core::refine::RefineParams;
use mfsr_core::synth;

fn polyphase_model() -> ImagingModel {
    ImagingModel {
        blur: Kernel::delta(1),
        r: 2,
        noise_sigma: 0.0,
        shifts: vec![Shift { dx: 0.0, dy: 0.0 }, Shift { dx: 1.0, dy: 0.0 }, Shift { dx: 0.0, dy: 1.0 }, Shift { dx: 1.0, dy: 1.0 }],
    }
}

#[test]
fn all_polyphase_frames_fuse_back_to_the_reference() {
    let hr = synth::scene(48, 48, 3);
    let stack = degrade_scene(&hr, &polyphase_model(), 0).unwrap();
    let cfg = PipelineConfig { skip_refine: true, shifts: stack.true_shifts.clone(), ..PipelineConfig::default() };
    let (x0, fused) = pipeline::run(&stack, None, &RefineParams::default(), &cfg).unwrap();
    assert_eq!(x0.dims(), (48, 48));
    for y in 2..46 {
        for x in 2..46 {
            assert_eq!(fused.counts.get(x, y), 1, "({x}, {y})");
            assert!((x0.get(x, y) - hr.get(x, y)).abs() < 1e-12, "({x}, {y})");
        }
    }
}

#[test]
fn registration_recovers_the_degradation_shifts() {
    let hr = synth::scene(128, 128, 21);
    let stack = degrade_scene(&hr, &ImagingModel::ad_default(6, 21), 21).unwrap();
    let est = pipeline::estimate_shifts(&stack.frames, None, 1, &PipelineConfig::default()).unwrap();
    let truth = stack.true_shifts.as_ref().unwrap();
    assert_eq!(est[0], Shift { dx: 0.0, dy: 0.0 });
    for (e, t) in est.iter().zip(truth) {
        assert!(e.distance(*t) < 0.1, "{e:?} vs {t:?}");
    }
}

#[test]
fn enhanced_pipeline_output_is_four_times_the_frames() {
    let hr = synth::scene(64, 64, 5);
    let stack = degrade_scene(&hr, &ImagingModel::ad_default(4, 5), 5).unwrap();
    let mut bicubic = Interpolator::new(ResampleMethod::Bicubic, 2);
    let p = RefineParams { iterations: 3, ..RefineParams::default() };
    let (out, fused) = pipeline::run(&stack, Some(&mut bicubic), &p, &PipelineConfig::default()).unwrap();
    assert_eq!(out.dims(), (128, 128));
    assert_eq!(fused.enhance_scale, 2);
    assert_eq!(pipeline::to_reference_size(&out, &hr).dims(), (64, 64));
    assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn prepared_scene_matches_the_one_shot_pipeline() {
    let hr = synth::scene(64, 64, 6);
    let stack = degrade_scene(&hr, &ImagingModel::ad_default(4, 6), 6).unwrap();
    let p = RefineParams { iterations: 5, ..RefineParams::default() };
    let cfg = PipelineConfig::default();
    let prepared = PreparedScene::prepare(&stack, None, &cfg).unwrap();
    let (direct, _) = pipeline::run(&stack, None, &p, &cfg).unwrap();
    assert_eq!(prepared.output(&p), direct);
    let want = metrics::psnr_hf(&pipeline::to_reference_size(&direct, &hr), &hr).unwrap();
    assert_eq!(prepared.psnr_hf(&p).unwrap(), want);
}

#[test]
fn fusion_beats_a_single_frame_on_noiseless_polyphase_data() {
    let hr = synth::scene(64, 64, 9);
    let stack = degrade_scene(&hr, &polyphase_model(), 0).unwrap();
    let cfg = PipelineConfig { skip_refine: true, ..PipelineConfig::default() };
    let (fused, _) = pipeline::run(&stack, None, &RefineParams::default(), &cfg).unwrap();
    let single = pipeline::single_frame_baseline(&stack, 2).unwrap();
    let a = MetricSet::compute(&hr, &fused).unwrap();
    let b = MetricSet::compute(&hr, &single).unwrap();
    assert!(a.psnr > b.psnr + 3.0, "{} vs {}", a.psnr, b.psnr);
    assert!(a.ssim > b.ssim);
}
