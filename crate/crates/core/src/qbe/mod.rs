//! Window extraction, collection embedding, search and truth matching.

mod hits;
mod segments;
#[cfg(test)]
mod tests;

pub use hits::{format_hit_list, parse_hit_list, read_hit_list, write_hit_list, HitRecord, HIT_LIST_HEADER};
pub use segments::{format_segment_table, parse_segment_table, read_segment_table, write_segment_table, SEGMENT_TABLE_HEADER};

use crate::data::{FeatureSequence, Recording, WordSegment};
use crate::dtw::{reference_vector, reference_vectors_for_windows, FrameMetric, TemplateSet};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::eval::{QueryResult, ScoredHit};
use crate::lsh::{IndexConfig, Scoring, SearchIndex};
use crate::nawe::{embed_windows, encode, Dropout, EncoderParams};

/// Frame shift used to convert frame counts to audio duration.
pub const FRAME_SECONDS: f64 = 0.01;
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub len_step: usize,
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            min_len: 40,
            max_len: 100,
            len_step: 10,
            stride: 5,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_len == 0 || self.min_len > self.max_len || self.len_step == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(format!("invalid window config {self:?}")));
        }
        Ok(())
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> {
        (self.min_len..=self.max_len).step_by(self.len_step.max(1))
    }
}

/// A window of the search collection and the id of its embedding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentRef {
    pub recording_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub embedding_id: usize,
}

impl SegmentRef {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame == self.start_frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truth {
    #[default]
    Unset,
    Correct,
    FalseAlarm,
}

impl Truth {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unset => "unset",
            Self::Correct => "correct",
            Self::FalseAlarm => "false_alarm",
        }
    }
}

impl std::str::FromStr for Truth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unset" => Ok(Self::Unset),
            "correct" => Ok(Self::Correct),
            "false_alarm" => Ok(Self::FalseAlarm),
            other => Err(Error::InvalidInput(format!("unknown truth label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub segment: SegmentRef,
    /// Cosine distance; lower is better.
    pub score: f64,
    pub truth: Truth,
}

/// Windows of one recording, ordered by start then length. `embedding_id`
/// counts from zero within the recording.
pub fn extract_windows(recording: &Recording, cfg: &WindowConfig) -> Vec<SegmentRef> {
    let t = recording.num_frames();
    let lengths: Vec<usize> = cfg.lengths().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + cfg.min_len <= t {
        for &len in &lengths {
            if start + len <= t {
                out.push(SegmentRef {
                    recording_id: recording.id.clone(),
                    start_frame: start,
                    end_frame: start + len,
                    embedding_id: out.len(),
                });
            }
        }
        start += cfg.stride;
    }
    out
}

/// Maps a variable-length segment to a fixed vector.
#[derive(Debug, Clone)]
pub enum Embedder {
    Neural(EncoderParams),
    Template { templates: TemplateSet, metric: FrameMetric },
}

impl Embedder {
    pub fn input_dim(&self) -> usize {
        match self {
            Self::Neural(p) => p.input_dim(),
            Self::Template { templates, .. } => templates.dim(),
        }
    }

    pub fn embed(&self, seq: &FeatureSequence) -> Result<Embedding> {
        match self {
            Self::Neural(p) => encode(p, seq, Dropout::Off),
            Self::Template { templates, metric } => reference_vector(seq, templates, *metric),
        }
    }

    pub fn embed_windows(&self, seq: &FeatureSequence, windows: &[(usize, usize)]) -> Result<Vec<Embedding>> {
        match self {
            Self::Neural(p) => embed_windows(p, seq, windows),
            Self::Template { templates, metric } => reference_vectors_for_windows(seq, windows, templates, *metric),
        }
    }
}

/// One embedding per window, in recording order, then start, then length.
pub fn embed_collection(
    recordings: &[Recording],
    embedder: &Embedder,
    cfg: &WindowConfig,
) -> Result<(Vec<Embedding>, Vec<SegmentRef>)> {
    cfg.validate()?;
    let mut embeddings = Vec::new();
    let mut segments = Vec::new();
    for rec in recordings {
        let windows = extract_windows(rec, cfg);
        if windows.is_empty() {
            continue;
        }
        let spans: Vec<(usize, usize)> = windows.iter().map(|w| (w.start_frame, w.end_frame)).collect();
        let embs = embedder.embed_windows(&rec.features, &spans)?;
        for mut w in windows {
            w.embedding_id = segments.len();
            segments.push(w);
        }
        embeddings.extend(embs);
    }
    Ok((embeddings, segments))
}

/// Query-time settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub beamwidth: usize,
    pub top_k: usize,
    pub overlap_threshold: f64,
    pub scoring: Scoring,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            beamwidth: IndexConfig::default().beamwidth,
            top_k: 100,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            scoring: Scoring::Exact,
        }
    }
}

/// An embedder together with the indexed collection it produced.
#[derive(Debug, Clone)]
pub struct SearchSystem {
    pub embedder: Embedder,
    pub index: SearchIndex,
    pub segments: Vec<SegmentRef>,
}

impl SearchSystem {
    pub fn build(
        recordings: &[Recording],
        embedder: Embedder,
        windows: &WindowConfig,
        index_cfg: &IndexConfig,
    ) -> Result<Self> {
        let (embeddings, segments) = embed_collection(recordings, &embedder, windows)?;
        let index = SearchIndex::build(&embeddings, index_cfg)?;
        Self::new(embedder, index, segments)
    }

    pub fn new(embedder: Embedder, index: SearchIndex, segments: Vec<SegmentRef>) -> Result<Self> {
        if segments.len() != index.len() {
            return Err(Error::InvalidInput(format!(
                "{} segments for {} indexed items",
                segments.len(),
                index.len()
            )));
        }
        if segments.iter().enumerate().any(|(i, s)| s.embedding_id != i) {
            return Err(Error::InvalidInput("segment embedding ids must be 0..N in order".into()));
        }
        Ok(Self {
            embedder,
            index,
            segments,
        })
    }
}

/// Embeds the query, ranks index candidates, suppresses overlapping windows
/// and keeps the best `top_k`.
pub fn search(query: &FeatureSequence, system: &SearchSystem, params: &SearchParams) -> Result<Vec<Hit>> {
    let q = system.embedder.embed(query)?;
    search_embedding(&q, system, params)
}

pub fn search_embedding(q: &Embedding, system: &SearchSystem, params: &SearchParams) -> Result<Vec<Hit>> {
    if params.top_k == 0 {
        return Err(Error::InvalidInput("top_k must be at least 1".into()));
    }
    let ranked = system.index.query(q, params.beamwidth, usize::MAX, params.scoring)?;
    let hits: Vec<Hit> = ranked
        .into_iter()
        .map(|(id, score)| Hit {
            segment: system.segments[id as usize].clone(),
            score,
            truth: Truth::Unset,
        })
        .collect();
    let mut kept = suppress_overlaps(hits, params.overlap_threshold);
    kept.truncate(params.top_k);
    Ok(kept)
}

/// Intersection over the shorter length; 0 for different recordings.
pub fn overlap_ratio(a: &SegmentRef, b: &SegmentRef) -> f64 {
    if a.recording_id != b.recording_id {
        return 0.0;
    }
    let inter = a.end_frame.min(b.end_frame).saturating_sub(a.start_frame.max(b.start_frame));
    let shorter = a.len().min(b.len()).max(1);
    inter as f64 / shorter as f64
}

/// Greedy non-maximum suppression over hits sorted by ascending score.
pub fn suppress_overlaps(hits: Vec<Hit>, overlap_threshold: f64) -> Vec<Hit> {
    let mut kept: Vec<Hit> = Vec::new();
    let mut by_recording: std::collections::HashMap<String, Vec<usize>> = std::collections::HashMap::new();
    for hit in hits {
        let same = by_recording.entry(hit.segment.recording_id.clone()).or_default();
        if same.iter().all(|&k| overlap_ratio(&kept[k].segment, &hit.segment) <= overlap_threshold) {
            same.push(kept.len());
            kept.push(hit);
        }
    }
    kept
}

/// A truth occurrence of a word type in the search collection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TruthInterval {
    pub recording_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// All aligned occurrences of `label` across `recordings`.
pub fn truth_for_label(recordings: &[Recording], label: &str) -> Vec<TruthInterval> {
    recordings
        .iter()
        .flat_map(|r| {
            r.alignments.iter().filter(|a| a.label == label).map(|a| TruthInterval {
                recording_id: r.id.clone(),
                start_frame: a.start_frame,
                end_frame: a.end_frame,
            })
        })
        .collect()
}

/// Labels hits in order: a hit is correct when its midpoint falls in an
/// unclaimed truth interval, which it then claims. Returns `n_true`.
pub fn match_hits_to_truth(hits: &mut [Hit], truth: &[TruthInterval]) -> usize {
    let mut claimed = vec![false; truth.len()];
    for hit in hits.iter_mut() {
        let s = &hit.segment;
        let mid2 = s.start_frame + s.end_frame;
        let found = truth.iter().enumerate().position(|(i, t)| {
            !claimed[i] && t.recording_id == s.recording_id && 2 * t.start_frame <= mid2 && mid2 < 2 * t.end_frame
        });
        hit.truth = match found {
            Some(i) => {
                claimed[i] = true;
                Truth::Correct
            }
            None => Truth::FalseAlarm,
        };
    }
    truth.len()
}

/// Hours of audio in the search collection.
pub fn search_hours(recordings: &[Recording]) -> f64 {
    recordings.iter().map(|r| r.num_frames()).sum::<usize>() as f64 * FRAME_SECONDS / 3600.0
}

/// Packs labeled hits for the metric functions.
pub fn query_result(query: &WordSegment, hits: &[Hit], n_true: usize, hours: f64) -> Result<QueryResult> {
    let scored = hits
        .iter()
        .map(|h| ScoredHit {
            score: h.score,
            correct: h.truth == Truth::Correct,
        })
        .collect();
    QueryResult::new(query.label.clone(), query.recording_id.clone(), scored, n_true, hours)
}
