use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::RngCore;

use super::adam::{adam_step, AdamState};
use super::encoder::{encode, Dropout};
use super::loss::{cosine_distance, loss_gradients, Triplet};
use super::params::EncoderParams;
use super::TrainConfig;
use crate::data::{FeatureSequence, WordSegment};
use crate::error::{Error, Result};
use crate::eval::same_different_ap;
use crate::rng::stream;

/// Indices of `k` distinct segments whose label differs from `anchor_label`,
/// drawn uniformly without replacement.
pub fn sample_negative_indices(train: &[WordSegment], anchor_label: &str, k: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    let eligible: Vec<usize> = train
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label != anchor_label)
        .map(|(i, _)| i)
        .collect();
    if eligible.len() < k {
        return Err(Error::InsufficientCandidates {
            needed: k,
            available: eligible.len(),
        });
    }
    Ok(sample(rng, eligible.len(), k).into_iter().map(|j| eligible[j]).collect())
}

pub fn sample_negatives<'a>(train: &'a [WordSegment], anchor_label: &str, k: usize, rng: &mut dyn RngCore) -> Result<Vec<&'a WordSegment>> {
    Ok(sample_negative_indices(train, anchor_label, k, rng)?
        .into_iter()
        .map(|i| &train[i])
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_ap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub history: Vec<EpochRecord>,
    pub steps: u64,
}

/// All unordered same-label pairs `(i, j)`, `i < j`, in index order.
pub fn same_label_pairs(segments: &[WordSegment]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            if segments[i].label == segments[j].label {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Same/different average precision of `params` over every pair in `segments`.
pub fn same_different_ap_of(params: &EncoderParams, segments: &[WordSegment]) -> Result<f64> {
    let embs = segments
        .iter()
        .map(|s| encode(params, &s.features, Dropout::Off))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for i in 0..embs.len() {
        for j in i + 1..embs.len() {
            pairs.push((cosine_distance(&embs[i], &embs[j])?, segments[i].label == segments[j].label));
        }
    }
    same_different_ap(&pairs)
}

/// Triplet training with Adam.
///
/// Each epoch shuffles the same-label pairs, splits them into batches and
/// takes one Adam step per batch, drawing fresh negatives for every anchor.
/// Shuffles, negatives and dropout masks all come from one stream derived
/// from `cfg.seed`, so runs are reproducible.
pub fn train(segments: &[WordSegment], cfg: &TrainConfig, dev: Option<&[WordSegment]>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut labels = BTreeMap::new();
    for s in segments {
        *labels.entry(s.label.as_str()).or_insert(0usize) += 1;
    }
    if labels.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 2 word types, found {}",
            labels.len()
        )));
    }
    let dim = segments[0].features.dim();
    let mut params = EncoderParams::init(cfg.layers, cfg.hidden, dim, cfg.seed)?;
    let pool: Vec<FeatureSequence> = segments.iter().map(|s| s.features.clone()).collect();
    let mut pairs = same_label_pairs(segments);
    if pairs.is_empty() && cfg.epochs > 0 {
        return Err(Error::InvalidInput("no word type has two training examples".into()));
    }
    let mut adam = AdamState::new(&params);
    let mut rng = stream(cfg.seed, "nawe.train");
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in pairs.chunks(cfg.batch_size) {
            let batch = chunk
                .iter()
                .map(|&(a, s)| {
                    Ok(Triplet {
                        anchor: a,
                        same: s,
                        negatives: sample_negative_indices(segments, &segments[a].label, cfg.negatives, &mut rng)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let (grads, loss) = loss_gradients(&params, &pool, &batch, cfg, &mut rng)?;
            adam_step(&mut params, &grads, &mut adam, cfg)?;
            if !params.is_finite() {
                return Err(Error::NumericOverflow(format!("parameters diverged in epoch {}", epoch + 1)));
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let dev_ap = dev.map(|d| same_different_ap_of(&params, d)).transpose()?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            mean_loss: loss_sum / pairs.len() as f64,
            dev_ap,
        });
    }
    Ok(TrainOutcome {
        params,
        history,
        steps: adam.step_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_corpus, SynthConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg(label: &str, v: f32) -> WordSegment {
        WordSegment::new("r", 0, 2, label, FeatureSequence::new(vec![v, v + 1.0], 1).unwrap()).unwrap()
    }

    #[test]
    fn negatives_have_other_labels() {
        let train: Vec<_> = (0..12).map(|i| seg(["a", "b", "c"][i % 3], i as f32)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let negs = sample_negative_indices(&train, "a", 5, &mut rng).unwrap();
        assert_eq!(negs.len(), 5);
        assert!(negs.iter().all(|&i| train[i].label != "a"));
        let mut uniq = negs.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 5);
    }

    #[test]
    fn negatives_exhaust_eligible_set() {
        let train: Vec<_> = (0..6).map(|i| seg(if i < 2 { "a" } else { "b" }, i as f32)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut negs = sample_negative_indices(&train, "a", 4, &mut rng).unwrap();
        negs.sort();
        assert_eq!(negs, vec![2, 3, 4, 5]);
        assert!(matches!(
            sample_negatives(&train, "a", 5, &mut rng),
            Err(Error::InsufficientCandidates { needed: 5, available: 4 })
        ));
    }

    #[test]
    fn negatives_deterministic_given_rng() {
        let train: Vec<_> = (0..30).map(|i| seg(["a", "b", "c"][i % 3], i as f32)).collect();
        let draw = || sample_negative_indices(&train, "b", 7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(draw(), draw());
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            layers: 1,
            hidden: 4,
            negatives: 3,
            batch_size: 8,
            epochs: 2,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    fn tiny_corpus() -> Vec<WordSegment> {
        synthesize_corpus(&SynthConfig {
            n_types: 4,
            examples_per_type: 4,
            search_examples_per_type: 1,
            queries_per_type: 1,
            proto_len_min: 6,
            proto_len_max: 10,
            feature_dim: 3,
            ..SynthConfig::default()
        })
        .unwrap()
        .train
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = TrainConfig { epochs: 0, ..tiny_cfg() };
        let out = train(&tiny_corpus(), &cfg, None).unwrap();
        assert_eq!(out.params, EncoderParams::init(1, 4, 3, 5).unwrap());
        assert!(out.history.is_empty());
    }

    #[test]
    fn step_count_and_determinism() {
        let data = tiny_corpus();
        let cfg = TrainConfig { layers: 2, ..tiny_cfg() };
        let a = train(&data, &cfg, Some(&data)).unwrap();
        let b = train(&data, &cfg, Some(&data)).unwrap();
        // 4 types × C(4,2) = 24 pairs, batches of 8.
        assert_eq!(a.steps, 2 * 3);
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
        assert!(a.history[1].dev_ap.is_some());
    }

    #[test]
    fn single_type_rejected() {
        let data: Vec<_> = (0..4).map(|i| seg("a", i as f32)).collect();
        assert!(train(&data, &tiny_cfg(), None).is_err());
    }
}
