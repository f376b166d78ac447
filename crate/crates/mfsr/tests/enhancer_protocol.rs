use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use mfsr::external::{check_conformance, ExternalEnhancer};
use mfsr::protocol::{self, Frame};
use mfsr_core::enhance::{enhance_stack, Enhancer, Interpolator};
use mfsr_core::raster::ResampleMethod;
use mfsr_core::{synth, Error, Image};

const ECHO: &str = env!("CARGO_BIN_EXE_enh-echo");

fn echo(flags: &str) -> String {
    format!("{ECHO} {flags}")
}

/// Values exactly representable in f32, so the wire format is lossless.
fn dyadic(w: usize, h: usize, seed: usize) -> Image {
    Image::from_fn(w, h, |x, y| ((x * 37 + y * 11 + seed * 5) % 257) as f64 / 256.0)
}

#[test]
fn raw_session_bytes() {
    let mut child = Command::new(ECHO).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut stdout = child.stdout.take().unwrap();
    stdin.write_all(b"ENH/1 scale=2\n").unwrap();
    let mut reply = [0u8; 19];
    stdout.read_exact(&mut reply).unwrap();
    assert_eq!(&reply, b"OK deterministic=1\n");

    let mut req = b"ENHF".to_vec();
    req.extend_from_slice(&1u32.to_le_bytes());
    req.extend_from_slice(&1u32.to_le_bytes());
    req.extend_from_slice(&0.25f32.to_le_bytes());
    stdin.write_all(&req).unwrap();
    stdin.flush().unwrap();
    let mut resp = vec![0u8; 12 + 16];
    stdout.read_exact(&mut resp).unwrap();
    let mut want = b"ENHF".to_vec();
    want.extend_from_slice(&2u32.to_le_bytes());
    want.extend_from_slice(&2u32.to_le_bytes());
    for _ in 0..4 {
        want.extend_from_slice(&0.25f32.to_le_bytes());
    }
    assert_eq!(resp, want);

    drop(stdin);
    let mut rest = Vec::new();
    stdout.read_to_end(&mut rest).unwrap();
    assert!(rest.is_empty());
    assert!(child.wait().unwrap().success());
}

#[test]
fn echo_matches_builtin_nearest_bit_for_bit() {
    let mut ext = ExternalEnhancer::spawn(&echo(""), 2).unwrap();
    let mut builtin = Interpolator::new(ResampleMethod::Nearest, 2);
    for (k, (w, h)) in [(1, 1), (5, 3), (32, 24)].into_iter().enumerate() {
        let img = dyadic(w, h, k);
        assert_eq!(ext.enhance(&img).unwrap(), builtin.enhance(&img).unwrap());
    }
    ext.finish().unwrap();
}

#[test]
fn eight_bit_frames_round_through_f32() {
    let img = Image::from_fn(6, 4, |x, y| ((x * 40 + y * 23) % 256) as f64 / 255.0);
    let mut ext = ExternalEnhancer::spawn(&echo(""), 2).unwrap();
    let out = ext.enhance(&img).unwrap();
    for y in 0..8 {
        for x in 0..12 {
            assert_eq!(out.get(x, y), f64::from(img.get(x / 2, y / 2) as f32));
        }
    }
    // the 8-bit value survives the round trip
    assert_eq!(out.to_u8()[0], img.to_u8()[0]);
}

#[test]
fn stack_equals_frame_at_a_time() {
    let frames: Vec<Image> = (0..4).map(|k| dyadic(12, 10, k)).collect();
    let mut ext = ExternalEnhancer::spawn(&echo(""), 2).unwrap();
    let stacked = enhance_stack(&mut ext, &frames).unwrap();
    let single: Vec<Image> = frames
        .iter()
        .map(|f| {
            let mut e = ExternalEnhancer::spawn(&echo(""), 2).unwrap();
            let out = e.enhance(f).unwrap();
            e.finish().unwrap();
            out
        })
        .collect();
    assert_eq!(stacked, single);
    assert_eq!(stacked.len(), 4);
    assert!(stacked.iter().all(|f| f.dims() == (24, 20)));
}

#[test]
fn determinism_flag_is_reported() {
    assert!(ExternalEnhancer::spawn(&echo(""), 2).unwrap().deterministic());
    assert!(!ExternalEnhancer::spawn(&echo("--nondeterministic"), 2).unwrap().deterministic());
}

#[test]
fn refusal_is_an_error() {
    let err = ExternalEnhancer::spawn(&echo("--refuse"), 2).err().unwrap();
    assert!(err.to_string().contains("refused by request"), "{err}");
}

#[test]
fn wrong_size_names_the_frame() {
    let mut ext = ExternalEnhancer::spawn(&echo("--wrong-size"), 2).unwrap();
    let frames = vec![dyadic(4, 4, 0), dyadic(4, 4, 1)];
    let err = enhance_stack(&mut ext, &frames).unwrap_err();
    assert!(matches!(err, Error::Frame { index: 0, .. }), "{err:?}");
    assert!(err.to_string().contains("8x8"), "{err}");
}

#[test]
fn out_of_range_values_rejected() {
    let mut ext = ExternalEnhancer::spawn(&echo("--out-of-range"), 2).unwrap();
    let err = ext.enhance(&dyadic(3, 3, 0)).unwrap_err();
    assert!(err.to_string().contains("outside [0, 1]"), "{err}");
}

#[test]
fn hung_plugin_times_out() {
    let mut ext = ExternalEnhancer::spawn_with_timeout(&echo("--hang"), 2, Duration::from_millis(300)).unwrap();
    let err = ext.enhance(&dyadic(3, 3, 0)).unwrap_err();
    assert!(err.to_string().contains("no response"), "{err}");
}

#[test]
fn early_exit_and_bad_status_detected() {
    let mut ext = ExternalEnhancer::spawn(&echo("--exit-early"), 2).unwrap();
    assert!(ext.enhance(&dyadic(3, 3, 0)).is_err());

    let mut ext = ExternalEnhancer::spawn(&echo("--fail-exit"), 2).unwrap();
    ext.enhance(&dyadic(3, 3, 0)).unwrap();
    let err = ext.finish().unwrap_err();
    assert!(err.to_string().contains("exited with"), "{err}");
}

#[test]
fn missing_program_is_an_io_error() {
    let err = ExternalEnhancer::spawn("/nonexistent/enhancer", 2).err().unwrap();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn echo_passes_the_conformance_suite() {
    let c = check_conformance(&echo(""), Duration::from_secs(10)).unwrap();
    assert!(c.deterministic);
    assert_eq!(c.frames_checked, 8);
    assert!(check_conformance(&echo("--wrong-size"), Duration::from_secs(10)).is_err());
    assert!(check_conformance(&echo("--fail-exit"), Duration::from_secs(10)).is_err());
}

#[test]
fn echo_rejects_unknown_handshake() {
    let mut child = Command::new(ECHO).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.as_mut().unwrap().write_all(b"ENH/9 scale=2\n").unwrap();
    let mut out = String::new();
    child.stdout.take().unwrap().read_to_string(&mut out).unwrap();
    assert!(matches!(protocol::parse_reply(&out), Some(protocol::Reply::Err(_))), "{out:?}");
    let _ = child.wait();
}

#[test]
fn frame_encoding_round_trips_through_pipe() {
    let mut child = Command::new(ECHO).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut stdout = std::io::BufReader::new(child.stdout.take().unwrap());
    stdin.write_all(protocol::handshake(2).as_bytes()).unwrap();
    assert_eq!(protocol::read_line(&mut stdout).unwrap().as_deref(), Some("OK deterministic=1\n"));
    let f = Frame { width: 3, height: 1, data: vec![0.0, 0.5, 1.0] };
    protocol::write_frame(&mut stdin, &f).unwrap();
    let back = protocol::read_frame(&mut stdout).unwrap().unwrap();
    assert_eq!((back.width, back.height), (6, 2));
    assert_eq!(back.data, [0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
    drop(stdin);
    assert!(child.wait().unwrap().success());
}

#[test]
fn pipeline_with_echo_matches_builtin_nearest() {
    let hr = synth::scene(64, 64, 8);
    let stack = mfsr_core::degrade::degrade_scene(&hr, &mfsr_core::degrade::ImagingModel::ad_default(4, 8), 8).unwrap();
    let quantized: Vec<Image> = stack.frames.iter().map(|f| Image::from_fn(32, 32, |x, y| (f.get(x, y) * 256.0).floor().min(256.0) / 256.0)).collect();
    let stack = mfsr_core::degrade::SceneStack::new(quantized, None, None).unwrap();
    let p = mfsr_core::refine::RefineParams::default();
    let cfg = mfsr_core::pipeline::PipelineConfig::default();
    let mut ext = ExternalEnhancer::spawn(&echo(""), 2).unwrap();
    let (a, _) = mfsr_core::pipeline::run(&stack, Some(&mut ext), &p, &cfg).unwrap();
    let mut builtin = Interpolator::new(ResampleMethod::Nearest, 2);
    let (b, _) = mfsr_core::pipeline::run(&stack, Some(&mut builtin), &p, &cfg).unwrap();
    assert_eq!(a, b);
}
