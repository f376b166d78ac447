//! Client side of the `ENH/1` protocol: an enhancer running in a child process.

use std::io::{BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use mfsr_core::enhance::Enhancer;
use mfsr_core::Image;

use crate::error::{Error, Result};
use crate::protocol::{self, Frame, Reply};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

enum Message {
    Line(String),
    Frame(Frame),
    Failed(String),
}

pub struct ExternalEnhancer {
    child: Child,
    stdin: Option<ChildStdin>,
    rx: Receiver<Message>,
    scale: usize,
    deterministic: bool,
    timeout: Duration,
}

/// Splits a command line on whitespace; no quoting.
pub fn split_command(command: &str) -> Result<Vec<String>> {
    let parts: Vec<String> = command.split_whitespace().map(str::to_string).collect();
    if parts.is_empty() {
        return Err(Error::Usage("empty enhancer command".into()));
    }
    Ok(parts)
}

fn reader(stdout: std::process::ChildStdout, tx: mpsc::Sender<Message>) {
    let mut r = BufReader::new(stdout);
    match protocol::read_line(&mut r) {
        Ok(Some(line)) => {
            if tx.send(Message::Line(line)).is_err() {
                return;
            }
        }
        Ok(None) => {
            let _ = tx.send(Message::Failed("enhancer closed its output before the handshake reply".into()));
            return;
        }
        Err(e) => {
            let _ = tx.send(Message::Failed(format!("reading handshake reply: {e}")));
            return;
        }
    }
    loop {
        let msg = match protocol::read_frame(&mut r) {
            Ok(Some(f)) => Message::Frame(f),
            Ok(None) => return,
            Err(e) => Message::Failed(format!("reading frame: {e}")),
        };
        let failed = matches!(msg, Message::Failed(_));
        if tx.send(msg).is_err() || failed {
            return;
        }
    }
}

impl ExternalEnhancer {
    pub fn spawn(command: &str, scale: usize) -> Result<Self> {
        Self::spawn_with_timeout(command, scale, DEFAULT_TIMEOUT)
    }

    pub fn spawn_with_timeout(command: &str, scale: usize, timeout: Duration) -> Result<Self> {
        let parts = split_command(command)?;
        let mut child = Command::new(&parts[0])
            .args(&parts[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::io(&parts[0], e))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || reader(stdout, tx));
        let mut this = ExternalEnhancer {
            stdin: child.stdin.take(),
            child,
            rx,
            scale,
            deterministic: false,
            timeout,
        };
        this.send(protocol::handshake(scale).as_bytes())?;
        let line = match this.receive()? {
            Message::Line(l) => l,
            _ => unreachable!("the first message is a line or a failure"),
        };
        match protocol::parse_reply(&line) {
            Some(Reply::Ok { deterministic }) => this.deterministic = deterministic,
            Some(Reply::Err(msg)) => return Err(Error::Protocol(format!("enhancer refused: {msg}"))),
            None => return Err(Error::Protocol(format!("malformed handshake reply {:?}", line.trim_end()))),
        }
        Ok(this)
    }

    fn send(&mut self, bytes: &[u8]) -> Result<()> {
        let stdin = self.stdin.as_mut().ok_or_else(|| Error::Protocol("session already closed".into()))?;
        stdin
            .write_all(bytes)
            .and_then(|()| stdin.flush())
            .map_err(|e| Error::Protocol(format!("writing to enhancer: {e}")))
    }

    fn receive(&mut self) -> Result<Message> {
        match self.rx.recv_timeout(self.timeout) {
            Ok(Message::Failed(msg)) => Err(Error::Protocol(msg)),
            Ok(m) => Ok(m),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(Error::Protocol(format!("no response within {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => Err(Error::Protocol("enhancer exited mid-session".into())),
        }
    }

    fn request(&mut self, img: &Image) -> Result<Image> {
        let frame = Frame {
            width: img.width() as u32,
            height: img.height() as u32,
            data: img.data().iter().map(|&v| v as f32).collect(),
        };
        let mut buf = Vec::new();
        protocol::write_frame(&mut buf, &frame).expect("writing to memory");
        self.send(&buf)?;
        let out = match self.receive()? {
            Message::Frame(f) => f,
            _ => return Err(Error::Protocol("unexpected text after handshake".into())),
        };
        let want = (frame.width as usize * self.scale, frame.height as usize * self.scale);
        if (out.width as usize, out.height as usize) != want {
            return Err(Error::Protocol(format!("expected a {}x{} response, got {}x{}", want.0, want.1, out.width, out.height)));
        }
        if let Some(v) = out.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Protocol(format!("response value {v} outside [0, 1]")));
        }
        Ok(Image::new(want.0, want.1, out.data.iter().map(|&v| f64::from(v)).collect())?)
    }

    /// Closes the session and checks that the child exits with status 0.
    pub fn finish(mut self) -> Result<()> {
        self.stdin.take();
        let deadline = Instant::now() + self.timeout;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => return Err(Error::Protocol(format!("enhancer exited with {status}"))),
                Ok(None) if Instant::now() >= deadline => {
                    let _ = self.child.kill();
                    return Err(Error::Protocol("enhancer did not exit after stdin closed".into()));
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(Error::Protocol(format!("waiting for enhancer: {e}"))),
            }
        }
    }
}

impl Enhancer for ExternalEnhancer {
    fn scale(&self) -> usize {
        self.scale
    }

    fn enhance(&mut self, frame: &Image) -> mfsr_core::Result<Image> {
        self.request(frame).map_err(|e| match e {
            Error::Core(c) => c,
            other => mfsr_core::Error::Enhancer(other.to_string()),
        })
    }

    fn deterministic(&self) -> bool {
        self.deterministic
    }
}

impl Drop for ExternalEnhancer {
    fn drop(&mut self) {
        if self.stdin.take().is_some() {
            let deadline = Instant::now() + Duration::from_secs(2);
            while matches!(self.child.try_wait(), Ok(None)) {
                if Instant::now() >= deadline {
                    let _ = self.child.kill();
                    break;
                }
                thread::sleep(Duration::from_millis(5));
            }
        }
        let _ = self.child.wait();
    }
}

/// Outcome of [`check_conformance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conformance {
    pub deterministic: bool,
    pub frames_checked: usize,
}

/// Drives an enhancer through a full `ENH/1` session: handshake, frames of
/// several shapes (each checked for size and range, and sent twice to check
/// repeatability when the plugin claims determinism), then a clean exit.
pub fn check_conformance(command: &str, timeout: Duration) -> Result<Conformance> {
    let mut e = ExternalEnhancer::spawn_with_timeout(command, 2, timeout)?;
    let shapes = [(1, 1), (3, 2), (2, 5), (17, 9)];
    let mut checked = 0;
    for (k, &(w, h)) in shapes.iter().enumerate() {
        let img = Image::from_fn(w, h, |x, y| ((x * 7 + y * 13 + k * 5) % 17) as f64 / 16.0);
        let a = e.request(&img)?;
        let b = e.request(&img)?;
        if e.deterministic && a != b {
            return Err(Error::Protocol(format!("{w}x{h} frame: repeated request gave a different response")));
        }
        checked += 2;
    }
    let deterministic = e.deterministic;
    e.finish()?;
    Ok(Conformance { deterministic, frames_checked: checked })
}
