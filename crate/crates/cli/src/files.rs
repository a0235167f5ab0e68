//! Query list TSV and corpus loading.

use std::fmt::Write as _;
use std::path::Path;

use qbe_core::data::{attach_alignments, extract_labeled_segments, read_alignments, read_feature_archive, Recording, WordSegment};
use qbe_core::{Error, FormatError};

use crate::error::{CliError, CliResult};

pub const TRAIN_PREFIX: &str = "train/";
pub const SEARCH_PREFIX: &str = "search/";
pub const QUERY_PREFIX: &str = "query/";

/// One query example to run: its recording id and word label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryEntry {
    pub query_id: String,
    pub label: String,
}

pub fn format_query_list(entries: &[QueryEntry]) -> String {
    let mut out = String::from("#query_id\tlabel\n");
    for e in entries {
        let _ = writeln!(out, "{}\t{}", e.query_id, e.label);
    }
    out
}

pub fn parse_query_list(text: &str) -> Result<Vec<QueryEntry>, FormatError> {
    let mut out: Vec<QueryEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| FormatError::Line {
            line: i + 1,
            reason: reason.into(),
        };
        let mut fields = line.split('\t');
        let (Some(id), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err("expected 2 fields"));
        };
        if id.is_empty() || label.is_empty() {
            return Err(err("empty field"));
        }
        if out.iter().any(|e| e.query_id == id) {
            return Err(err("duplicate query id"));
        }
        out.push(QueryEntry {
            query_id: id.to_owned(),
            label: label.to_owned(),
        });
    }
    Ok(out)
}

pub(crate) fn with_path<T>(path: &Path, r: qbe_core::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_query_list(path: &Path) -> CliResult<Vec<QueryEntry>> {
    let text = with_path(path, std::fs::read_to_string(path).map_err(Error::from))?;
    with_path(path, parse_query_list(&text).map_err(Error::from))
}

/// The synthetic corpus split back into its three parts by id prefix.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub train: Vec<WordSegment>,
    pub search: Vec<Recording>,
    pub queries: Vec<WordSegment>,
}

pub fn split_corpus(recordings: Vec<Recording>) -> CliResult<Corpus> {
    let mut train = Vec::new();
    let mut search = Vec::new();
    let mut queries = Vec::new();
    for rec in recordings {
        if rec.id.starts_with(TRAIN_PREFIX) {
            train.push(rec);
        } else if rec.id.starts_with(SEARCH_PREFIX) {
            search.push(rec);
        } else if rec.id.starts_with(QUERY_PREFIX) {
            queries.push(rec);
        } else {
            return Err(Error::InvalidInput(format!("recording {} has no train/, search/ or query/ prefix", rec.id)).into());
        }
    }
    Ok(Corpus {
        train: extract_labeled_segments(&train)?,
        search,
        queries: extract_labeled_segments(&queries)?,
    })
}

pub fn load_corpus(archive: &Path, alignments: &Path) -> CliResult<Corpus> {
    let mut recs = with_path(archive, read_feature_archive(archive))?;
    let ali = with_path(alignments, read_alignments(alignments))?;
    with_path(alignments, attach_alignments(&mut recs, &ali))?;
    split_corpus(recs)
}
