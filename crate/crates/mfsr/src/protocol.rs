//! `ENH/1`: the byte protocol between the pipeline and an external enhancer.
//!
//! ```text
//! parent -> child   "ENH/1 scale=2\n"
//! child  -> parent  "OK deterministic=<0|1>\n" | "ERR <message>\n"
//! then per frame, both directions:
//!   b"ENHF" | u32 LE width | u32 LE height | width*height f32 LE, row-major
//! ```
//!
//! The response to a `w x h` frame is `scale*w x scale*h`. The parent closes
//! the child's stdin to end the session and the child exits with status 0.

use std::io::{self, BufRead, Read, Write};

pub const VERSION: &str = "ENH/1";
pub const MAGIC: &[u8; 4] = b"ENHF";
/// Frames above this many pixels are rejected before allocation.
pub const MAX_PIXELS: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Ok { deterministic: bool },
    Err(String),
}

pub fn handshake(scale: usize) -> String {
    format!("{VERSION} scale={scale}\n")
}

/// Parses the parent's handshake line, returning the requested scale.
pub fn parse_handshake(line: &str) -> Option<usize> {
    let rest = line.strip_suffix('\n')?.strip_prefix(VERSION)?.strip_prefix(" scale=")?;
    rest.parse().ok().filter(|&s| s >= 1)
}

pub fn format_reply(reply: &Reply) -> String {
    match reply {
        Reply::Ok { deterministic } => format!("OK deterministic={}\n", u8::from(*deterministic)),
        Reply::Err(msg) => format!("ERR {}\n", msg.replace('\n', " ")),
    }
}

pub fn parse_reply(line: &str) -> Option<Reply> {
    let line = line.strip_suffix('\n')?;
    if let Some(msg) = line.strip_prefix("ERR ") {
        return Some(Reply::Err(msg.to_string()));
    }
    match line.strip_prefix("OK deterministic=")? {
        "0" => Some(Reply::Ok { deterministic: false }),
        "1" => Some(Reply::Ok { deterministic: true }),
        _ => None,
    }
}

/// Reads one `\n`-terminated line; `None` at end of stream.
pub fn read_line(r: &mut impl BufRead) -> io::Result<Option<String>> {
    let mut buf = Vec::new();
    if r.read_until(b'\n', &mut buf)? == 0 {
        return Ok(None);
    }
    String::from_utf8(buf).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    let mut buf = Vec::with_capacity(12 + 4 * frame.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&frame.width.to_le_bytes());
    buf.extend_from_slice(&frame.height.to_le_bytes());
    for v in &frame.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

/// Reads one frame; `None` on a clean end of stream before the magic.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Frame>> {
    let mut head = [0u8; 12];
    let mut got = 0;
    while got < head.len() {
        match r.read(&mut head[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    if &head[..4] != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad frame magic"));
    }
    let width = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    let height = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes"));
    let n = u64::from(width) * u64::from(height);
    if n > MAX_PIXELS {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame {width}x{height} too large")));
    }
    let mut bytes = vec![0u8; 4 * n as usize];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(Some(Frame { width, height, data }))
}
