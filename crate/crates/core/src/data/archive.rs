//! Binary feature archive.
//!
//! Little-endian layout:
//!
//! ```text
//! "QBE1"                      4 bytes
//! u32 R                       recording count
//! R times:
//!   u32 n, n bytes            UTF-8 recording id
//!   u32 T, u32 F              frame count, coefficients per frame
//!   T*F f32                   frame-major values
//! ```
//!
//! Alignments are not part of the archive; they live in the text alignment
//! file and are attached after reading.

use std::fs;
use std::path::Path;

use super::{FeatureSequence, Recording};
use crate::error::{Error, FormatError, Result};
use crate::io::Reader;

pub const ARCHIVE_MAGIC: [u8; 4] = *b"QBE1";

pub fn encode_feature_archive(recordings: &[Recording]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&ARCHIVE_MAGIC);
    out.extend_from_slice(&u32_len(recordings.len(), "recording count")?.to_le_bytes());
    for rec in recordings {
        let f = &rec.features;
        if let Some(pos) = f.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("recording {} value {pos}", rec.id)));
        }
        out.extend_from_slice(&u32_len(rec.id.len(), "id length")?.to_le_bytes());
        out.extend_from_slice(rec.id.as_bytes());
        out.extend_from_slice(&u32_len(f.len(), "frame count")?.to_le_bytes());
        out.extend_from_slice(&u32_len(f.dim(), "feature dimension")?.to_le_bytes());
        for v in f.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Encodes and writes the archive. Nothing is written if any recording holds
/// a non-finite value.
pub fn write_feature_archive(recordings: &[Recording], destination: &Path) -> Result<()> {
    let bytes = encode_feature_archive(recordings)?;
    fs::write(destination, bytes)?;
    Ok(())
}

pub fn decode_feature_archive(bytes: &[u8]) -> Result<Vec<Recording>, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(ARCHIVE_MAGIC)?;
    let count = r.u32("recording count")?;
    let mut recordings = Vec::new();
    for i in 0..count {
        let id_len = r.u32(&format!("recording {i} id length"))? as usize;
        let id = std::str::from_utf8(r.take(id_len, &format!("recording {i} id"))?)
            .map_err(|_| FormatError::Invalid {
                context: format!("recording {i} id"),
                reason: "not UTF-8".into(),
            })?
            .to_owned();
        let t = r.u32(&format!("recording {id} frame count"))? as usize;
        let f = r.u32(&format!("recording {id} feature dimension"))? as usize;
        if t == 0 || f == 0 {
            return Err(FormatError::Invalid {
                context: format!("recording {id}"),
                reason: format!("empty matrix {t}x{f}"),
            });
        }
        let n = t
            .checked_mul(f)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| FormatError::Truncated {
                context: format!("recording {id} matrix"),
            })?;
        let raw = r.take(n, &format!("recording {id} matrix"))?;
        let mut values = Vec::with_capacity(t * f);
        for chunk in raw.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
            if !v.is_finite() {
                return Err(FormatError::NonFinite {
                    context: format!("recording {id} frame {}", values.len() / f),
                });
            }
            values.push(v);
        }
        let features = FeatureSequence::new(values, f).expect("validated above");
        recordings.push(Recording {
            id,
            features,
            alignments: Vec::new(),
        });
    }
    r.finish()?;
    Ok(recordings)
}

pub fn read_feature_archive(source: &Path) -> Result<Vec<Recording>> {
    let bytes = fs::read(source)?;
    Ok(decode_feature_archive(&bytes)?)
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidInput(format!("{what} {n} exceeds u32")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Alignment;
    use proptest::prelude::*;

    fn rec(id: &str, t: usize, f: usize, base: f32) -> Recording {
        let vals = (0..t * f).map(|i| base + i as f32 * 0.25).collect();
        Recording::new(id, FeatureSequence::new(vals, f).unwrap(), vec![]).unwrap()
    }

    #[test]
    fn three_recordings_round_trip() {
        let recs = vec![rec("a", 3, 2, 0.0), rec("bé", 1, 39, -4.0), rec("c", 7, 1, 1e-3)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.qbe");
        write_feature_archive(&recs, &path).unwrap();
        assert_eq!(read_feature_archive(&path).unwrap(), recs);
    }

    #[test]
    fn empty_archive() {
        let bytes = encode_feature_archive(&[]).unwrap();
        assert_eq!(bytes, b"QBE1\0\0\0\0");
        assert!(decode_feature_archive(&bytes).unwrap().is_empty());
    }

    #[test]
    fn non_finite_rejected_before_writing() {
        let mut r = rec("a", 2, 2, 0.0);
        // Bypass the constructor to simulate a corrupted in-memory value.
        r.features.frames[1] = f32::INFINITY;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.qbe");
        assert!(matches!(write_feature_archive(&[r], &path), Err(Error::NonFinite(_))));
        assert!(!path.exists());
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_feature_archive(&[rec("a", 1, 1, 0.0)]).unwrap();
        bytes[3] = b'2';
        assert!(matches!(decode_feature_archive(&bytes), Err(FormatError::BadMagic { .. })));
    }

    #[test]
    fn truncated_matrix_names_recording() {
        let bytes = encode_feature_archive(&[rec("first", 2, 2, 0.0), rec("second", 4, 3, 0.0)]).unwrap();
        let err = decode_feature_archive(&bytes[..bytes.len() - 5]).unwrap_err();
        match err {
            FormatError::Truncated { context } => assert!(context.contains("second"), "{context}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_payload_is_distinct_error() {
        let mut bytes = encode_feature_archive(&[rec("a", 1, 2, 0.0)]).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_feature_archive(&bytes), Err(FormatError::NonFinite { .. })));
    }

    #[test]
    fn alignments_are_not_serialized() {
        let mut r = rec("a", 4, 1, 0.0);
        r.alignments.push(Alignment {
            start_frame: 0,
            end_frame: 2,
            label: "w".into(),
        });
        let back = decode_feature_archive(&encode_feature_archive(&[r]).unwrap()).unwrap();
        assert!(back[0].alignments.is_empty());
    }

    proptest! {
        #[test]
        fn round_trip_identity(
            shapes in prop::collection::vec((1usize..6, 1usize..5, -1e6f32..1e6), 0..5)
        ) {
            let recs: Vec<_> = shapes
                .iter()
                .enumerate()
                .map(|(i, &(t, f, b))| rec(&format!("r{i}"), t, f, b))
                .collect();
            let bytes = encode_feature_archive(&recs).unwrap();
            prop_assert_eq!(decode_feature_archive(&bytes).unwrap(), recs);
        }

        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode_feature_archive(&bytes);
        }
    }
}
