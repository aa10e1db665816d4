//! Position stream framing: a 4-byte big-endian length followed by that many
//! bytes of gzip-compressed JSON.

use std::io::{Read, Write};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde_json::Value;
use tokio::io::{AsyncRead, AsyncReadExt};

/// Frames above this size are treated as corrupt.
pub const MAX_FRAME_BYTES: u32 = 16 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(u32),
    #[error("corrupt frame: {0}")]
    Corrupt(String),
    #[error("connection: {0}")]
    Io(#[from] std::io::Error),
}

pub fn encode_frame(doc: &Value) -> Vec<u8> {
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    serde_json::to_writer(&mut gz, doc).expect("write to memory");
    let body = gz.finish().expect("write to memory");
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn decode_body(body: &[u8]) -> Result<Value, FrameError> {
    let mut text = String::new();
    GzDecoder::new(body)
        .read_to_string(&mut text)
        .map_err(|e| FrameError::Corrupt(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| FrameError::Corrupt(e.to_string()))
}

/// Reads one frame body. `Ok(None)` on a clean end of stream.
pub async fn read_frame<R: AsyncRead + Unpin>(reader: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut len = [0u8; 4];
    match reader.read_exact(&mut len).await {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(FrameError::TooLarge(len));
    }
    let mut body = vec![0u8; len as usize];
    reader.read_exact(&mut body).await?;
    Ok(Some(body))
}

/// Writes frames to a blocking writer, for tools and tests.
pub fn write_frames<'a>(out: &mut impl Write, docs: impl IntoIterator<Item = &'a Value>) -> std::io::Result<()> {
    for d in docs {
        out.write_all(&encode_frame(d))?;
    }
    Ok(())
}
