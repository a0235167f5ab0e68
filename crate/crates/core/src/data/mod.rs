//! Feature sequences, labeled segments, recordings and their file formats.

mod alignment;
mod archive;
mod synth;

pub use alignment::{attach_alignments, parse_alignments, read_alignments, write_alignments, AlignmentRecord};
pub use archive::{decode_feature_archive, encode_feature_archive, read_feature_archive, write_feature_archive};
pub use synth::{synthesize_corpus, SynthConfig, SynthCorpus};

use crate::error::{Error, Result};

/// Default number of coefficients per frame (13 cepstra with deltas and
/// double deltas).
pub const DEFAULT_FEATURE_DIM: usize = 39;

/// A `T × F` matrix of acoustic frames, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    frames: Vec<f32>,
    dim: usize,
}

impl FeatureSequence {
    /// Builds a sequence from frame-major values. Rejects empty input, a
    /// ragged length and non-finite entries.
    pub fn new(frames: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 || frames.is_empty() {
            return Err(Error::EmptySequence);
        }
        if frames.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values do not split into frames of {dim}",
                frames.len()
            )));
        }
        if let Some(pos) = frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "frame {} coefficient {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { frames, dim })
    }

    /// Builds a sequence from rows of equal length.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut frames = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            frames.extend_from_slice(row);
        }
        Self::new(frames, dim)
    }

    pub fn len(&self) -> usize {
        self.frames.len() / self.dim
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.frames[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.frames.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.frames
    }

    /// Copies frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidInput(format!(
                "slice {start}..{end} outside 0..{}",
                self.len()
            )));
        }
        Ok(Self {
            frames: self.frames[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
        })
    }
}

/// One labeled word occurrence cut out of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSegment {
    pub recording_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub label: String,
    pub features: FeatureSequence,
}

impl WordSegment {
    pub fn new(
        recording_id: impl Into<String>,
        start_frame: usize,
        end_frame: usize,
        label: impl Into<String>,
        features: FeatureSequence,
    ) -> Result<Self> {
        if start_frame >= end_frame || features.len() != end_frame - start_frame {
            return Err(Error::InvalidInput(format!(
                "segment {start_frame}..{end_frame} does not match {} frames",
                features.len()
            )));
        }
        Ok(Self {
            recording_id: recording_id.into(),
            start_frame,
            end_frame,
            label: label.into(),
            features,
        })
    }
}

/// A word interval inside a recording, end-exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Alignment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub label: String,
}

/// A search-collection recording with its word alignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub features: FeatureSequence,
    pub alignments: Vec<Alignment>,
}

impl Recording {
    /// Validates the alignments against the feature length and sorts them by
    /// start frame.
    pub fn new(
        id: impl Into<String>,
        features: FeatureSequence,
        mut alignments: Vec<Alignment>,
    ) -> Result<Self> {
        let id = id.into();
        alignments.sort();
        let t = features.len();
        for (i, a) in alignments.iter().enumerate() {
            if a.start_frame >= a.end_frame || a.end_frame > t {
                return Err(Error::InvalidInput(format!(
                    "recording {id}: alignment {}..{} outside 0..{t}",
                    a.start_frame, a.end_frame
                )));
            }
            if i > 0 && alignments[i - 1].end_frame > a.start_frame {
                return Err(Error::InvalidInput(format!(
                    "recording {id}: alignments overlap at frame {}",
                    a.start_frame
                )));
            }
        }
        Ok(Self {
            id,
            features,
            alignments,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.features.len()
    }
}

/// One `WordSegment` per alignment entry, in recording then alignment order.
pub fn extract_labeled_segments(recordings: &[Recording]) -> Result<Vec<WordSegment>> {
    let mut out = Vec::new();
    for rec in recordings {
        for a in &rec.alignments {
            let features = rec.features.slice(a.start_frame, a.end_frame)?;
            out.push(WordSegment::new(
                rec.id.clone(),
                a.start_frame,
                a.end_frame,
                a.label.clone(),
                features,
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: usize, f: usize) -> FeatureSequence {
        FeatureSequence::new((0..t * f).map(|v| v as f32).collect(), f).unwrap()
    }

    fn align(s: usize, e: usize, l: &str) -> Alignment {
        Alignment {
            start_frame: s,
            end_frame: e,
            label: l.into(),
        }
    }

    #[test]
    fn feature_sequence_rejects_bad_input() {
        assert!(matches!(FeatureSequence::new(vec![], 3), Err(Error::EmptySequence)));
        assert!(FeatureSequence::new(vec![1.0; 5], 2).is_err());
        assert!(matches!(
            FeatureSequence::new(vec![1.0, f32::NAN], 2),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn two_alignments_give_two_segments() {
        let rec = Recording::new("r", seq(20, 2), vec![align(12, 18, "b"), align(0, 4, "a")]).unwrap();
        let segs = extract_labeled_segments(&[rec]).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].label, "a");
        assert_eq!(segs[1].label, "b");
    }

    #[test]
    fn no_alignments_no_segments() {
        let rec = Recording::new("r", seq(5, 2), vec![]).unwrap();
        assert!(extract_labeled_segments(&[rec]).unwrap().is_empty());
    }

    #[test]
    fn segment_is_exact_slice() {
        let full = seq(12, 3);
        let rec = Recording::new("r", full.clone(), vec![align(5, 10, "w")]).unwrap();
        let segs = extract_labeled_segments(&[rec]).unwrap();
        assert_eq!(segs[0].features.len(), 5);
        assert_eq!(segs[0].features.as_slice(), &full.as_slice()[15..30]);
    }

    #[test]
    fn overlapping_or_out_of_range_alignments_rejected() {
        assert!(Recording::new("r", seq(10, 1), vec![align(0, 5, "a"), align(4, 8, "b")]).is_err());
        assert!(Recording::new("r", seq(10, 1), vec![align(8, 11, "a")]).is_err());
        assert!(Recording::new("r", seq(10, 1), vec![align(3, 3, "a")]).is_err());
    }
}
