//! Tab-separated alignment files: `recording_id<TAB>start<TAB>end<TAB>label`,
//! end-exclusive frame indices, `#` lines ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Alignment, Recording};
use crate::error::{Error, FormatError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentRecord {
    pub recording_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub label: String,
}

pub fn parse_alignments(text: &str) -> Result<Vec<AlignmentRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| FormatError::Line {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [rec, start, end, label] = fields[..] else {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        let start: usize = start.parse().map_err(|_| err(format!("bad start frame {start:?}")))?;
        let end: usize = end.parse().map_err(|_| err(format!("bad end frame {end:?}")))?;
        if start >= end {
            return Err(err(format!("empty interval {start}..{end}")));
        }
        if rec.is_empty() || label.is_empty() {
            return Err(err("empty recording id or label".into()));
        }
        out.push(AlignmentRecord {
            recording_id: rec.to_owned(),
            start_frame: start,
            end_frame: end,
            label: label.to_owned(),
        });
    }
    Ok(out)
}

pub fn read_alignments(source: &Path) -> Result<Vec<AlignmentRecord>> {
    let text = fs::read_to_string(source)?;
    Ok(parse_alignments(&text)?)
}

/// Writes every alignment of every recording, in recording order.
pub fn write_alignments(recordings: &[Recording], destination: &Path) -> Result<()> {
    let mut out = String::from("# recording_id\tstart_frame\tend_frame\tlabel\n");
    for rec in recordings {
        for a in &rec.alignments {
            if a.label.contains(['\t', '\n']) || rec.id.contains(['\t', '\n']) {
                return Err(Error::InvalidInput(format!("tab or newline in {:?}/{:?}", rec.id, a.label)));
            }
            writeln!(out, "{}\t{}\t{}\t{}", rec.id, a.start_frame, a.end_frame, a.label).unwrap();
        }
    }
    fs::write(destination, out)?;
    Ok(())
}

/// Attaches alignment records to the recordings they name. Records naming an
/// unknown recording are an error.
pub fn attach_alignments(recordings: &mut [Recording], records: &[AlignmentRecord]) -> Result<()> {
    let index: HashMap<&str, usize> = recordings
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let mut grouped: Vec<Vec<Alignment>> = vec![Vec::new(); recordings.len()];
    for r in records {
        let i = *index
            .get(r.recording_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("alignment names unknown recording {:?}", r.recording_id)))?;
        grouped[i].push(Alignment {
            start_frame: r.start_frame,
            end_frame: r.end_frame,
            label: r.label.clone(),
        });
    }
    for (rec, alignments) in recordings.iter_mut().zip(grouped) {
        let checked = Recording::new(rec.id.clone(), rec.features.clone(), alignments)?;
        rec.alignments = checked.alignments;
    }
    Ok(())
}
