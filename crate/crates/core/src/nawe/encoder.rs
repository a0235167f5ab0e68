//! Stacked bidirectional encoder: `x = [h_T(forward); h_1(backward)]` of the
//! top layer.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::lstm::{self, StepBuf, Trace};
use super::params::{Direction, EncoderParams};
use crate::data::FeatureSequence;
use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Inverted dropout on the outputs between stacked layers.
pub enum Dropout<'a> {
    Off,
    On { p: f64, rng: &'a mut dyn RngCore },
}

struct LayerTrace {
    fwd: Trace,
    bwd: Trace,
    /// Mask applied to this layer's `T × 2H` output before the next layer.
    mask: Option<Vec<f64>>,
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct ForwardCache {
    len: usize,
    layers: Vec<LayerTrace>,
}

fn check_input(params: &EncoderParams, seq: &FeatureSequence) -> Result<()> {
    if seq.dim() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            actual: seq.dim(),
        });
    }
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

fn to_f64(seq: &FeatureSequence) -> Vec<f64> {
    seq.as_slice().iter().map(|&v| f64::from(v)).collect()
}

pub(crate) fn forward(params: &EncoderParams, seq: &FeatureSequence, mut dropout: Dropout<'_>) -> Result<(Embedding, ForwardCache)> {
    check_input(params, seq)?;
    let len = seq.len();
    let hd = params.hidden();
    let mut input = to_f64(seq);
    let mut layers = Vec::with_capacity(params.layers());
    for l in 0..params.layers() {
        let fwd = lstm::forward(params.cell(l, Direction::Forward), &input, len, false);
        let bwd = lstm::forward(params.cell(l, Direction::Backward), &input, len, true);
        let mut mask = None;
        if l + 1 < params.layers() {
            let mut out = Vec::with_capacity(len * 2 * hd);
            for t in 0..len {
                out.extend_from_slice(fwd.h_at(t));
                out.extend_from_slice(bwd.h_at(t));
            }
            if let Dropout::On { p, rng } = &mut dropout {
                if *p > 0.0 {
                    let keep = 1.0 / (1.0 - *p);
                    let m: Vec<f64> = (0..out.len())
                        .map(|_| if rng.random::<f64>() < *p { 0.0 } else { keep })
                        .collect();
                    out.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                    mask = Some(m);
                }
            }
            input = out;
        }
        layers.push(LayerTrace { fwd, bwd, mask });
    }
    let top = layers.last().expect("at least one layer");
    let mut x = Vec::with_capacity(2 * hd);
    x.extend_from_slice(top.fwd.h_at(len - 1));
    x.extend_from_slice(top.bwd.h_at(0));
    Ok((Embedding::new(x), ForwardCache { len, layers }))
}

/// Embeds one sequence. Deterministic when dropout is off.
pub fn encode(params: &EncoderParams, seq: &FeatureSequence, dropout: Dropout<'_>) -> Result<Embedding> {
    forward(params, seq, dropout).map(|(x, _)| x)
}

/// Adds the gradient of a scalar with upstream gradient `d_embedding` into
/// `grads`.
pub(crate) fn backward(params: &EncoderParams, cache: &ForwardCache, d_embedding: &[f64], grads: &mut EncoderParams) {
    let len = cache.len;
    let hd = params.hidden();
    let mut dh_f = vec![0.0; len * hd];
    let mut dh_b = vec![0.0; len * hd];
    dh_f[(len - 1) * hd..].copy_from_slice(&d_embedding[..hd]);
    dh_b[..hd].copy_from_slice(&d_embedding[hd..]);
    for l in (0..params.layers()).rev() {
        let inp = params.layer_input(l);
        let mut dx = vec![0.0; len * inp];
        let lt = &cache.layers[l];
        for (dir, trace, dh) in [(Direction::Forward, &lt.fwd, &dh_f), (Direction::Backward, &lt.bwd, &dh_b)] {
            let (w, b) = params.cell_ranges(l, dir);
            let g = grads.as_mut_slice();
            let (gw, gb) = g[w.start..b.end].split_at_mut(w.len());
            lstm::backward(params.cell(l, dir), trace, dh, gw, gb, &mut dx);
        }
        if l == 0 {
            break;
        }
        if let Some(mask) = &cache.layers[l - 1].mask {
            dx.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
        }
        for t in 0..len {
            dh_f[t * hd..(t + 1) * hd].copy_from_slice(&dx[t * 2 * hd..t * 2 * hd + hd]);
            dh_b[t * hd..(t + 1) * hd].copy_from_slice(&dx[t * 2 * hd + hd..(t + 1) * 2 * hd]);
        }
    }
}

/// Embeds windows `start..end` of one sequence with dropout off.
///
/// For single-layer encoders, windows sharing a start share one forward
/// recurrence and windows sharing an end share one backward recurrence; the
/// output is bit-identical to calling [`encode`] on each slice. Deeper
/// encoders fall back to per-window encoding.
pub fn embed_windows(params: &EncoderParams, seq: &FeatureSequence, windows: &[(usize, usize)]) -> Result<Vec<Embedding>> {
    if seq.dim() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            actual: seq.dim(),
        });
    }
    for &(s, e) in windows {
        if s >= e || e > seq.len() {
            return Err(Error::InvalidInput(format!("window {s}..{e} outside 0..{}", seq.len())));
        }
    }
    if params.layers() > 1 {
        return windows
            .iter()
            .map(|&(s, e)| encode(params, &seq.slice(s, e)?, Dropout::Off))
            .collect();
    }
    let hd = params.hidden();
    let inp = params.input_dim();
    let x = to_f64(seq);
    let mut out = vec![vec![0.0; 2 * hd]; windows.len()];

    let mut by_start: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    let mut by_end: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, &(s, e)) in windows.iter().enumerate() {
        by_start.entry(s).or_default().push((e, k));
        by_end.entry(e).or_default().push((s, k));
    }

    let fwd = params.cell(0, Direction::Forward);
    let bwd = params.cell(0, Direction::Backward);
    let mut buf = StepBuf::new(inp, hd);
    let mut c_prev = vec![0.0; hd];

    for (&start, ends) in &by_start {
        let last = ends.iter().map(|&(e, _)| e).max().expect("non-empty group");
        let mut hs = Vec::with_capacity((last - start) * hd);
        buf.h.fill(0.0);
        c_prev.fill(0.0);
        for t in start..last {
            buf.xh[..inp].copy_from_slice(&x[t * inp..(t + 1) * inp]);
            buf.xh[inp..].copy_from_slice(&buf.h);
            lstm::step(fwd, &c_prev, &mut buf);
            c_prev.copy_from_slice(&buf.c);
            hs.extend_from_slice(&buf.h);
        }
        for &(e, k) in ends {
            let t = e - 1 - start;
            out[k][..hd].copy_from_slice(&hs[t * hd..(t + 1) * hd]);
        }
    }
    for (&end, starts) in &by_end {
        let first = starts.iter().map(|&(s, _)| s).min().expect("non-empty group");
        // hs[j] is the state after consuming frames end-1 down to end-1-j.
        let mut hs = Vec::with_capacity((end - first) * hd);
        buf.h.fill(0.0);
        c_prev.fill(0.0);
        for t in (first..end).rev() {
            buf.xh[..inp].copy_from_slice(&x[t * inp..(t + 1) * inp]);
            buf.xh[inp..].copy_from_slice(&buf.h);
            lstm::step(bwd, &c_prev, &mut buf);
            c_prev.copy_from_slice(&buf.c);
            hs.extend_from_slice(&buf.h);
        }
        for &(s, k) in starts {
            let j = end - 1 - s;
            out[k][hd..].copy_from_slice(&hs[j * hd..(j + 1) * hd]);
        }
    }
    Ok(out.into_iter().map(Embedding::new).collect())
}
