//! Hit list TSV: `query_id rec start end score truth_label`.

use std::fmt::Write as _;
use std::path::Path;

use super::{Hit, SegmentRef, Truth};
use crate::error::{FormatError, Result};

pub const HIT_LIST_HEADER: &str = "#query_id\trecording_id\tstart_frame\tend_frame\tscore\ttruth_label";

#[derive(Debug, Clone, PartialEq)]
pub struct HitRecord {
    pub query_id: String,
    pub hit: Hit,
}

pub fn format_hit_list(records: &[HitRecord]) -> String {
    let mut out = String::with_capacity(64 * records.len() + 80);
    out.push_str(HIT_LIST_HEADER);
    out.push('\n');
    for r in records {
        let s = &r.hit.segment;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.query_id,
            s.recording_id,
            s.start_frame,
            s.end_frame,
            r.hit.score,
            r.hit.truth.as_str()
        );
    }
    out
}

fn line_err(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        reason: reason.into(),
    }
}

/// Parses a hit list. Lines starting with `#` and blank lines are skipped.
/// The `embedding_id` of parsed segments is set to 0.
pub fn parse_hit_list(text: &str) -> Result<Vec<HitRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [query_id, rec, start, end, score, truth] = fields[..] else {
            return Err(line_err(n, format!("expected 6 fields, found {}", fields.len())));
        };
        if query_id.is_empty() || rec.is_empty() {
            return Err(line_err(n, "empty id"));
        }
        let start: usize = start.parse().map_err(|_| line_err(n, "bad start frame"))?;
        let end: usize = end.parse().map_err(|_| line_err(n, "bad end frame"))?;
        if start >= end {
            return Err(line_err(n, "start must be before end"));
        }
        let score: f64 = score.parse().map_err(|_| line_err(n, "bad score"))?;
        if !(0.0..=2.0).contains(&score) {
            return Err(line_err(n, format!("score {score} outside [0, 2]")));
        }
        let truth: Truth = truth.parse().map_err(|_| line_err(n, "bad truth label"))?;
        out.push(HitRecord {
            query_id: query_id.to_owned(),
            hit: Hit {
                segment: SegmentRef {
                    recording_id: rec.to_owned(),
                    start_frame: start,
                    end_frame: end,
                    embedding_id: 0,
                },
                score,
                truth,
            },
        });
    }
    Ok(out)
}

pub fn write_hit_list(records: &[HitRecord], path: &Path) -> Result<()> {
    std::fs::write(path, format_hit_list(records))?;
    Ok(())
}

pub fn read_hit_list(path: &Path) -> Result<Vec<HitRecord>> {
    Ok(parse_hit_list(&std::fs::read_to_string(path)?)?)
}
