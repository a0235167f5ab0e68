//! Neural acoustic word embeddings: a stacked bidirectional LSTM trained with
//! a triplet cos-hinge loss over sampled negatives.

mod adam;
mod encoder;
mod loss;
mod lstm;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use encoder::{embed_windows, encode, Dropout};
pub use loss::{cosine_distance, loss_gradients, triplet_loss, NegativeRule, Triplet, MIN_NORM};
pub use params::{Direction, EncoderParams, MODEL_MAGIC};
pub use train::{
    same_different_ap_of, same_label_pairs, sample_negative_indices, sample_negatives, train, EpochRecord, TrainOutcome,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layers: usize,
    pub hidden: usize,
    pub margin: f64,
    pub negatives: usize,
    pub negative_rule: NegativeRule,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout_p: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden: 256,
            margin: 0.5,
            negatives: 10,
            negative_rule: NegativeRule::Min,
            batch_size: 32,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            dropout_p: 0.3,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_owned()));
        if self.layers == 0 || self.hidden == 0 {
            return bad("layers and hidden must be at least 1");
        }
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return bad("margin must lie in (0, 2)");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}
