//! `ENH/1` test double: nearest-neighbour upscaling in a child process.
//!
//! Flags select misbehaviour for conformance tests: `--nondeterministic`,
//! `--refuse`, `--wrong-size`, `--out-of-range`, `--hang`, `--exit-early`,
//! `--fail-exit`.

use std::io::{self, BufReader, Write};
use std::process::ExitCode;

use mfsr::protocol::{self, Frame, Reply};

fn main() -> ExitCode {
    let flags: Vec<String> = std::env::args().skip(1).collect();
    let has = |f: &str| flags.iter().any(|a| a == f);
    let stdin = io::stdin();
    let mut input = BufReader::new(stdin.lock());
    let mut out = io::stdout().lock();

    let scale = match protocol::read_line(&mut input) {
        Ok(Some(line)) => protocol::parse_handshake(&line),
        _ => return ExitCode::from(3),
    };
    let reply = match scale {
        _ if has("--refuse") => Reply::Err("refused by request".into()),
        None => Reply::Err("unsupported handshake".into()),
        Some(_) => Reply::Ok { deterministic: !has("--nondeterministic") },
    };
    if out.write_all(protocol::format_reply(&reply).as_bytes()).and_then(|()| out.flush()).is_err() {
        return ExitCode::from(3);
    }
    let Some(s) = scale.filter(|_| matches!(reply, Reply::Ok { .. })) else {
        return ExitCode::SUCCESS;
    };

    loop {
        let frame = match protocol::read_frame(&mut input) {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(_) => return ExitCode::from(4),
        };
        if has("--hang") {
            std::thread::sleep(std::time::Duration::from_secs(3600));
        }
        if has("--exit-early") {
            return ExitCode::SUCCESS;
        }
        let s = if has("--wrong-size") { 1 } else { s as u32 };
        let (w, h) = (frame.width * s, frame.height * s);
        let mut data = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                data.push(frame.data[((y / s) * frame.width + x / s) as usize]);
            }
        }
        if has("--out-of-range") {
            if let Some(v) = data.first_mut() {
                *v = 1.5;
            }
        }
        if protocol::write_frame(&mut out, &Frame { width: w, height: h, data }).is_err() {
            return ExitCode::from(3);
        }
    }
    if has("--fail-exit") {
        return ExitCode::from(9);
    }
    ExitCode::SUCCESS
}
