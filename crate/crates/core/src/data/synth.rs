//! Synthetic corpus generator.
//!
//! Each word type gets a smooth random prototype trajectory. Instances are the
//! prototype linearly resampled by a random time-warp factor plus i.i.d.
//! Gaussian noise. Search recordings concatenate shuffled instances separated
//! by Gaussian filler frames. Everything is a pure function of the config.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Alignment, FeatureSequence, Recording, WordSegment, DEFAULT_FEATURE_DIM};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Frames between interpolation anchors of a prototype.
const ANCHOR_SPACING: usize = 6;
/// Lower bound on the filler noise scale.
const FILLER_SIGMA_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_types: usize,
    /// Training segments per word type.
    pub examples_per_type: usize,
    /// Occurrences per word type placed in the search recordings.
    pub search_examples_per_type: usize,
    /// Isolated query segments per word type.
    pub queries_per_type: usize,
    /// Words per search recording (the last one may hold fewer).
    pub words_per_recording: usize,
    pub proto_len_min: usize,
    pub proto_len_max: usize,
    pub warp_factor_max: f64,
    pub noise_sigma: f64,
    pub filler_len_min: usize,
    pub filler_len_max: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_types: 20,
            examples_per_type: 10,
            search_examples_per_type: 20,
            queries_per_type: 3,
            words_per_recording: 10,
            proto_len_min: 45,
            proto_len_max: 75,
            warp_factor_max: 0.2,
            noise_sigma: 0.5,
            filler_len_min: 20,
            filler_len_max: 60,
            feature_dim: DEFAULT_FEATURE_DIM,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_types", self.n_types),
            ("examples_per_type", self.examples_per_type),
            ("search_examples_per_type", self.search_examples_per_type),
            ("queries_per_type", self.queries_per_type),
            ("words_per_recording", self.words_per_recording),
            ("proto_len_min", self.proto_len_min),
            ("filler_len_min", self.filler_len_min),
            ("feature_dim", self.feature_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.proto_len_min > self.proto_len_max {
            return Err(Error::InvalidConfig("proto_len_min > proto_len_max".into()));
        }
        if self.filler_len_min > self.filler_len_max {
            return Err(Error::InvalidConfig("filler_len_min > filler_len_max".into()));
        }
        if !(self.warp_factor_max >= 0.0 && self.warp_factor_max.is_finite()) {
            return Err(Error::InvalidConfig("warp_factor_max must be finite and >= 0".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<WordSegment>,
    pub recordings: Vec<Recording>,
    pub queries: Vec<WordSegment>,
    /// The word instances placed in `recordings`, in placement order.
    pub search_instances: Vec<WordSegment>,
}

pub fn type_label(i: usize) -> String {
    format!("word{i:03}")
}

type Rows = Vec<Vec<f64>>;

fn prototype(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Rows {
    let len = rng.random_range(cfg.proto_len_min..=cfg.proto_len_max);
    let n_anchors = len.div_ceil(ANCHOR_SPACING) + 1;
    let anchors: Rows = (0..n_anchors)
        .map(|_| (0..cfg.feature_dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    if len == 1 {
        return vec![anchors[0].clone()];
    }
    let span = (n_anchors - 1) as f64;
    (0..len)
        .map(|t| {
            let pos = t as f64 * span / (len - 1) as f64;
            interpolate(&anchors, pos)
        })
        .collect()
}

fn interpolate(rows: &Rows, pos: f64) -> Vec<f64> {
    let lo = (pos.floor() as usize).min(rows.len() - 1);
    let hi = (lo + 1).min(rows.len() - 1);
    let frac = pos - lo as f64;
    rows[lo]
        .iter()
        .zip(&rows[hi])
        .map(|(a, b)| a * (1.0 - frac) + b * frac)
        .collect()
}

/// Linear resampling of `proto` to `round(len * factor)` frames.
fn warp(proto: &Rows, factor: f64) -> Rows {
    let len = proto.len();
    let new_len = ((len as f64 * factor).round() as usize).max(1);
    if new_len == 1 || len == 1 {
        return vec![proto[0].clone(); new_len];
    }
    (0..new_len)
        .map(|j| interpolate(proto, (j * (len - 1)) as f64 / (new_len - 1) as f64))
        .collect()
}

fn instance(rng: &mut ChaCha8Rng, proto: &Rows, cfg: &SynthConfig) -> FeatureSequence {
    let factor = if cfg.warp_factor_max > 0.0 {
        let bound = (1.0 + cfg.warp_factor_max).ln();
        rng.random_range(-bound..=bound).exp()
    } else {
        1.0
    };
    let rows = warp(proto, factor);
    let mut values = Vec::with_capacity(rows.len() * cfg.feature_dim);
    for row in &rows {
        for &v in row {
            let noise: f64 = if cfg.noise_sigma > 0.0 {
                cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            values.push((v + noise) as f32);
        }
    }
    FeatureSequence::new(values, cfg.feature_dim).expect("finite synthetic frames")
}

fn filler(rng: &mut ChaCha8Rng, cfg: &SynthConfig, out: &mut Vec<f32>) {
    let sigma = cfg.noise_sigma.max(FILLER_SIGMA_FLOOR);
    let len = rng.random_range(cfg.filler_len_min..=cfg.filler_len_max);
    for _ in 0..len * cfg.feature_dim {
        out.push((sigma * rng.sample::<f64, _>(StandardNormal)) as f32);
    }
}

fn isolated(prefix: &str, rng: &mut ChaCha8Rng, protos: &[Rows], per_type: usize, cfg: &SynthConfig) -> Vec<WordSegment> {
    let mut out = Vec::with_capacity(protos.len() * per_type);
    for (ty, proto) in protos.iter().enumerate() {
        for _ in 0..per_type {
            let features = instance(rng, proto, cfg);
            let id = format!("{prefix}/{:05}", out.len());
            let end = features.len();
            out.push(WordSegment::new(id, 0, end, type_label(ty), features).expect("consistent segment"));
        }
    }
    out
}

pub fn synthesize_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut proto_rng = stream(cfg.seed, "synth.prototypes");
    let protos: Vec<Rows> = (0..cfg.n_types).map(|_| prototype(&mut proto_rng, cfg)).collect();

    let train = isolated("train", &mut stream(cfg.seed, "synth.train"), &protos, cfg.examples_per_type, cfg);
    let queries = isolated("query", &mut stream(cfg.seed, "synth.queries"), &protos, cfg.queries_per_type, cfg);

    let mut rng = stream(cfg.seed, "synth.search");
    let mut order: Vec<usize> = (0..cfg.n_types)
        .flat_map(|ty| std::iter::repeat_n(ty, cfg.search_examples_per_type))
        .collect();
    order.shuffle(&mut rng);

    let mut recordings = Vec::new();
    let mut search_instances = Vec::with_capacity(order.len());
    for chunk in order.chunks(cfg.words_per_recording) {
        let id = format!("search/{:05}", recordings.len());
        let mut values = Vec::new();
        let mut alignments = Vec::with_capacity(chunk.len());
        filler(&mut rng, cfg, &mut values);
        for &ty in chunk {
            let word = instance(&mut rng, &protos[ty], cfg);
            let start = values.len() / cfg.feature_dim;
            values.extend_from_slice(word.as_slice());
            let end = start + word.len();
            alignments.push(Alignment {
                start_frame: start,
                end_frame: end,
                label: type_label(ty),
            });
            search_instances.push(WordSegment::new(id.clone(), start, end, type_label(ty), word)?);
            filler(&mut rng, cfg, &mut values);
        }
        let features = FeatureSequence::new(values, cfg.feature_dim)?;
        recordings.push(Recording::new(id, features, alignments)?);
    }

    Ok(SynthCorpus {
        train,
        recordings,
        queries,
        search_instances,
    })
}
