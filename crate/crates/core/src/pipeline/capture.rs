//! Capture files: recorded source output for offline replay.
//!
//! A capture is either a single JSON document (one record) or
//! newline-delimited JSON where each line is a serialized [`FlowRecord`] or a
//! bare payload.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::record::FlowRecord;

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error("cannot read capture {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed capture at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn as_record(v: Value, source: &str, seq: u64) -> Result<FlowRecord, String> {
    let shaped = v
        .as_object()
        .is_some_and(|o| o.contains_key("payload") && o.contains_key("provenance"));
    if shaped {
        serde_json::from_value(v).map_err(|e| e.to_string())
    } else {
        Ok(FlowRecord::new(source, seq, v))
    }
}

pub fn parse_capture(text: &str, source: &str) -> Result<Vec<FlowRecord>, CaptureError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    if let Ok(whole) = serde_json::from_str::<Value>(text) {
        return as_record(whole, source, 1)
            .map(|r| vec![r])
            .map_err(|reason| CaptureError::Malformed { line: 1, reason });
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| CaptureError::Malformed { line: i + 1, reason };
        let v: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        out.push(as_record(v, source, out.len() as u64 + 1).map_err(malformed)?);
    }
    Ok(out)
}

pub fn read_capture(path: &Path) -> Result<Vec<FlowRecord>, CaptureError> {
    let text = std::fs::read_to_string(path).map_err(|e| CaptureError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "capture".into());
    parse_capture(&text, &source)
}

/// Appends records as NDJSON.
pub fn write_capture<'a>(
    out: &mut impl Write,
    records: impl IntoIterator<Item = &'a FlowRecord>,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn single_document_and_ndjson() {
        let one = parse_capture(crate::fixtures::SCHEDULE_SAMPLE, "chroma").unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].payload.is_array());

        let text = "{\"a\":1}\n\n{\"a\":2}\n";
        let many = parse_capture(text, "s").unwrap();
        assert_eq!(many.len(), 2);
        assert_eq!(many[1].provenance.sequence, vec![2]);
        assert!(parse_capture("", "s").unwrap().is_empty());
    }

    #[test]
    fn round_trip_records() {
        let mut r = FlowRecord::new("src", 7, json!({"x": [1, 2]}));
        r.attributes.insert("k".into(), "v".into());
        let mut buf = Vec::new();
        write_capture(&mut buf, [&r, &r]).unwrap();
        let back = parse_capture(std::str::from_utf8(&buf).unwrap(), "other").unwrap();
        assert_eq!(back, vec![r.clone(), r]);
    }

    #[test]
    fn malformed_line_is_reported() {
        let err = parse_capture("{\"a\":1}\n{broken\n", "s").unwrap_err();
        assert!(matches!(err, CaptureError::Malformed { line: 2, .. }), "{err}");
    }
}
