//! Binary frame log.
//!
//! ```text
//! header:  b"VBUS" | version: u16
//! record:  len: u32 | kind: u8 | sequence: u64 | publish_time: f64 | payload
//! ```
//!
//! `len` counts the bytes after itself. All integers and floats are
//! little-endian.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::frame::{decode_payload, encode_payload, DecodeError, Frame, FrameKind};

pub const LOG_MAGIC: &[u8; 4] = b"VBUS";
pub const LOG_VERSION: u16 = 1;
const RECORD_HEADER: usize = 1 + 8 + 8;

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a frame log (bad magic)")]
    BadMagic,
    #[error("unsupported log version {0}")]
    Version(u16),
    #[error("record {index}: {source}")]
    Decode { index: usize, source: DecodeError },
    #[error("record {index}: length {len} shorter than the record header")]
    ShortRecord { index: usize, len: u32 },
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut body = Vec::with_capacity(64);
    body.push(frame.kind().code());
    body.extend_from_slice(&frame.sequence.to_le_bytes());
    body.extend_from_slice(&frame.publish_time.to_le_bytes());
    encode_payload(&frame.payload, &mut body);
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn write_log<W: Write>(mut w: W, frames: &[Frame]) -> io::Result<()> {
    w.write_all(LOG_MAGIC)?;
    w.write_all(&LOG_VERSION.to_le_bytes())?;
    for f in frames {
        w.write_all(&encode_frame(f))?;
    }
    w.flush()
}

pub fn read_log<R: Read>(mut r: R) -> Result<Vec<Frame>, LogError> {
    let mut header = [0u8; 6];
    r.read_exact(&mut header)?;
    if &header[..4] != LOG_MAGIC {
        return Err(LogError::BadMagic);
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != LOG_VERSION {
        return Err(LogError::Version(version));
    }
    let mut frames = Vec::new();
    loop {
        let index = frames.len();
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_le_bytes(len);
        if (len as usize) < RECORD_HEADER {
            return Err(LogError::ShortRecord { index, len });
        }
        let mut body = vec![0u8; len as usize];
        r.read_exact(&mut body)?;
        let kind = FrameKind::from_code(body[0])
            .ok_or(LogError::Decode { index, source: DecodeError::UnknownKind(body[0]) })?;
        let sequence = u64::from_le_bytes(body[1..9].try_into().expect("8 bytes"));
        let publish_time = f64::from_le_bytes(body[9..17].try_into().expect("8 bytes"));
        let payload = decode_payload(kind, &body[RECORD_HEADER..])
            .map_err(|source| LogError::Decode { index, source })?;
        frames.push(Frame { payload, publish_time, sequence });
    }
    Ok(frames)
}
