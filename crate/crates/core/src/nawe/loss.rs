//! Cosine distance, the triplet cos-hinge loss and its exact gradient.

use rand::RngCore;

use super::encoder::{self, Dropout, ForwardCache};
use super::params::EncoderParams;
use super::TrainConfig;
use crate::data::FeatureSequence;
use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Norms at or below this are rejected by [`cosine_distance`].
pub const MIN_NORM: f64 = 1e-8;

/// `1 − cos(x1, x2)`, clamped to `[0, 2]`.
pub fn cosine_distance(x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x1.len(),
            actual: x2.len(),
        });
    }
    let (n1, n2) = (norm(x1), norm(x2));
    if !(n1 > MIN_NORM && n2 > MIN_NORM) {
        return Err(Error::NumericDomain(format!(
            "cosine distance of vectors with norms {n1:e} and {n2:e}"
        )));
    }
    Ok((1.0 - dot(x1, x2) / (n1 * n2)).clamp(0.0, 2.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Adds `scale · ∂d_cos(x1, x2)/∂x1` into `out`.
fn add_cosine_grad(x1: &[f64], x2: &[f64], scale: f64, out: &mut [f64]) {
    let (n1, n2) = (norm(x1), norm(x2));
    let cos = dot(x1, x2) / (n1 * n2);
    for ((o, a), b) in out.iter_mut().zip(x1).zip(x2) {
        *o -= scale * (b / (n1 * n2) - cos * a / (n1 * n1));
    }
}

/// Which sampled negative enters the hinge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeRule {
    /// The closest negative: the one that most violates the margin.
    #[default]
    Min,
    /// The farthest negative, as the loss is literally typeset.
    Max,
}

impl std::str::FromStr for NegativeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            other => Err(Error::InvalidConfig(format!("unknown negative rule {other:?}"))),
        }
    }
}

struct Hinge {
    loss: f64,
    hardest: usize,
}

fn hinge(xa: &[f64], xs: &[f64], negatives: &[&[f64]], margin: f64, rule: NegativeRule) -> Result<Hinge> {
    if negatives.is_empty() {
        return Err(Error::InvalidInput("triplet loss needs at least one negative".into()));
    }
    let d_same = cosine_distance(xa, xs)?;
    let mut hardest = 0;
    let mut d_hard = f64::NAN;
    for (i, xd) in negatives.iter().enumerate() {
        let d = cosine_distance(xa, xd)?;
        let better = match rule {
            NegativeRule::Min => d < d_hard,
            NegativeRule::Max => d > d_hard,
        };
        if i == 0 || better {
            hardest = i;
            d_hard = d;
        }
    }
    Ok(Hinge {
        loss: (margin + d_same - d_hard).max(0.0),
        hardest,
    })
}

/// `max{0, m + d_cos(x_a, x_s) − d_cos(x_a, x_d*)}` with `x_d*` picked from
/// `negatives` by `rule`.
pub fn triplet_loss(xa: &Embedding, xs: &Embedding, negatives: &[Embedding], margin: f64, rule: NegativeRule) -> Result<f64> {
    let negs: Vec<&[f64]> = negatives.iter().map(|x| x.as_slice()).collect();
    hinge(xa, xs, &negs, margin, rule).map(|h| h.loss)
}

/// Anchor, same-word and negative segments as indices into a segment pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub same: usize,
    pub negatives: Vec<usize>,
}

/// Exact gradient of the mean triplet loss over `batch`.
///
/// Each distinct pool segment is embedded once; its dropout mask comes from
/// `rng` in order of first appearance in the batch and is reused by the
/// backward pass. The hardest-negative choice is held fixed at its forward
/// value, and the hinge subgradient at exactly zero loss is zero.
pub fn loss_gradients(
    params: &EncoderParams,
    pool: &[FeatureSequence],
    batch: &[Triplet],
    cfg: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<(EncoderParams, f64)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut slot = vec![usize::MAX; pool.len()];
    let mut order = Vec::new();
    for tr in batch {
        for &i in std::iter::once(&tr.anchor).chain(std::iter::once(&tr.same)).chain(&tr.negatives) {
            if i >= pool.len() {
                return Err(Error::InvalidInput(format!("segment index {i} outside pool of {}", pool.len())));
            }
            if slot[i] == usize::MAX {
                slot[i] = order.len();
                order.push(i);
            }
        }
    }

    let mut forwards: Vec<(Embedding, ForwardCache)> = Vec::with_capacity(order.len());
    for &i in &order {
        let dropout = if cfg.dropout_p > 0.0 {
            Dropout::On {
                p: cfg.dropout_p,
                rng: &mut *rng,
            }
        } else {
            Dropout::Off
        };
        forwards.push(encoder::forward(params, &pool[i], dropout)?);
    }

    let d = params.embedding_dim();
    let mut upstream = vec![vec![0.0; d]; order.len()];
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for tr in batch {
        let (a, s) = (slot[tr.anchor], slot[tr.same]);
        let negs: Vec<&[f64]> = tr.negatives.iter().map(|&i| forwards[slot[i]].0.as_slice()).collect();
        let xa = forwards[a].0.as_slice();
        let xs = forwards[s].0.as_slice();
        let h = hinge(xa, xs, &negs, cfg.margin, cfg.negative_rule)?;
        total += h.loss;
        if h.loss <= 0.0 {
            continue;
        }
        let n = slot[tr.negatives[h.hardest]];
        let xd = forwards[n].0.as_slice();
        // l = m + d(a, s) − d(a, n)
        add_cosine_grad(xa, xs, scale, &mut upstream[a]);
        add_cosine_grad(xs, xa, scale, &mut upstream[s]);
        add_cosine_grad(xa, xd, -scale, &mut upstream[a]);
        add_cosine_grad(xd, xa, -scale, &mut upstream[n]);
    }

    let mut grads = params.zeros_like();
    for ((_, cache), up) in forwards.iter().zip(&upstream) {
        if up.iter().all(|&v| v == 0.0) {
            continue;
        }
        encoder::backward(params, cache, up, &mut grads);
    }
    let mean = total * scale;
    if !mean.is_finite() || !grads.is_finite() {
        return Err(Error::NumericOverflow("non-finite loss or gradient".into()));
    }
    Ok((grads, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec())
    }

    #[test]
    fn cosine_basics() {
        let x = [1.0, 2.0, -0.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(cosine_distance(&x, &x).unwrap() < 1e-15);
        assert!((cosine_distance(&x, &neg).unwrap() - 2.0).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::NumericDomain(_))));
        assert!(cosine_distance(&[1e-9, 0.0], &[1.0, 0.0]).is_err());
    }

    /// Unit vectors at a chosen cosine distance from `(1, 0)`.
    fn at_distance(d: f64) -> Embedding {
        let c = 1.0 - d;
        emb(&[c, (1.0 - c * c).sqrt()])
    }

    #[test]
    fn hinge_inactive() {
        let a = emb(&[1.0, 0.0]);
        let negs = vec![at_distance(0.55), at_distance(0.8)];
        assert_eq!(triplet_loss(&a, &a, &negs, 0.5, NegativeRule::Min).unwrap(), 0.0);
    }

    #[test]
    fn worked_min_and_max_rules() {
        let a = emb(&[1.0, 0.0]);
        let s = at_distance(0.1);
        let negs = vec![at_distance(0.3), at_distance(0.9)];
        let min = triplet_loss(&a, &s, &negs, 0.5, NegativeRule::Min).unwrap();
        let max = triplet_loss(&a, &s, &negs, 0.5, NegativeRule::Max).unwrap();
        assert!((min - 0.3).abs() < 1e-12, "{min}");
        assert_eq!(max, 0.0);
        assert!(triplet_loss(&a, &s, &[], 0.5, NegativeRule::Min).is_err());
    }

    fn arb_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0f64..2.0, 3).prop_filter("non-zero", |v| norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(x in arb_vec(), y in arb_vec(), a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
            let xs: Vec<f64> = x.iter().map(|v| v * a).collect();
            let ys: Vec<f64> = y.iter().map(|v| v * b).collect();
            let d = cosine_distance(&x, &y).unwrap();
            prop_assert!((cosine_distance(&xs, &ys).unwrap() - d).abs() < 1e-12);
        }

        #[test]
        fn loss_nonnegative_and_zero_past_margin(
            a in arb_vec(), s in arb_vec(), negs in prop::collection::vec(arb_vec(), 1..5), m in 0.01f64..1.9, max: bool,
        ) {
            let rule = if max { NegativeRule::Max } else { NegativeRule::Min };
            let negs: Vec<_> = negs.into_iter().map(Embedding::new).collect();
            let (a, s) = (Embedding::new(a), Embedding::new(s));
            let l = triplet_loss(&a, &s, &negs, m, rule).unwrap();
            prop_assert!(l >= 0.0);
            let d_same = cosine_distance(&a, &s).unwrap();
            let d_min = negs.iter().map(|n| cosine_distance(&a, n).unwrap()).fold(f64::INFINITY, f64::min);
            if d_min >= m + d_same {
                prop_assert_eq!(triplet_loss(&a, &s, &negs, m, NegativeRule::Min).unwrap(), 0.0);
            }
        }
    }
}
