//! Segment table TSV: `embedding_id rec start end`, one row per window.

use std::fmt::Write as _;
use std::path::Path;

use super::SegmentRef;
use crate::error::{FormatError, Result};

pub const SEGMENT_TABLE_HEADER: &str = "#embedding_id\trecording_id\tstart_frame\tend_frame";

pub fn format_segment_table(segments: &[SegmentRef]) -> String {
    let mut out = String::with_capacity(40 * segments.len() + 64);
    out.push_str(SEGMENT_TABLE_HEADER);
    out.push('\n');
    for s in segments {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.embedding_id, s.recording_id, s.start_frame, s.end_frame);
    }
    out
}

/// Ids must run 0, 1, 2, ... in file order.
pub fn parse_segment_table(text: &str) -> Result<Vec<SegmentRef>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| FormatError::Line {
            line: n,
            reason: reason.to_owned(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, rec, start, end] = fields[..] else {
            return Err(err("expected 4 fields"));
        };
        let id: usize = id.parse().map_err(|_| err("bad embedding id"))?;
        if id != out.len() {
            return Err(err("embedding ids must be consecutive from 0"));
        }
        if rec.is_empty() {
            return Err(err("empty recording id"));
        }
        let start: usize = start.parse().map_err(|_| err("bad start frame"))?;
        let end: usize = end.parse().map_err(|_| err("bad end frame"))?;
        if start >= end {
            return Err(err("start must be before end"));
        }
        out.push(SegmentRef {
            recording_id: rec.to_owned(),
            start_frame: start,
            end_frame: end,
            embedding_id: id,
        });
    }
    Ok(out)
}

pub fn write_segment_table(segments: &[SegmentRef], path: &Path) -> Result<()> {
    std::fs::write(path, format_segment_table(segments))?;
    Ok(())
}

pub fn read_segment_table(path: &Path) -> Result<Vec<SegmentRef>> {
    Ok(parse_segment_table(&std::fs::read_to_string(path)?)?)
}
