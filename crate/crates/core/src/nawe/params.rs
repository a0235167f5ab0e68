//! Encoder parameters and the binary model file.
//!
//! All parameters live in one flat `f64` buffer. For each layer `0..L`, the
//! forward direction precedes the backward direction; each direction stores
//! its weight matrix (`4H × (in + H)`, row-major, gate rows input, forget,
//! cell, output, columns `[x; h_prev]`) followed by its bias (`4H`). `in` is
//! `F` for layer 0 and `2H` above. The model file is:
//!
//! ```text
//! "QBEM", u32 L, u32 H, u32 F, then every parameter as f64 LE in the order above
//! ```

use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::Rng;

use super::lstm::Cell;
use crate::error::{Error, FormatError, Result};
use crate::io::Reader;
use crate::rng::stream;

pub const MODEL_MAGIC: [u8; 4] = *b"QBEM";
const INIT_SCALE: f64 = 0.05;
const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    layers: usize,
    hidden: usize,
    input_dim: usize,
    data: Vec<f64>,
}

fn layer_input(layer: usize, hidden: usize, input_dim: usize) -> usize {
    if layer == 0 {
        input_dim
    } else {
        2 * hidden
    }
}

fn cell_size(input: usize, hidden: usize) -> usize {
    4 * hidden * (input + hidden) + 4 * hidden
}

fn param_count(layers: usize, hidden: usize, input_dim: usize) -> Option<usize> {
    let mut total = 0usize;
    for l in 0..layers {
        let inp = layer_input(l, hidden, input_dim);
        let per = (inp.checked_add(hidden)?)
            .checked_mul(hidden.checked_mul(4)?)?
            .checked_add(4 * hidden)?;
        total = total.checked_add(per.checked_mul(2)?)?;
    }
    Some(total)
}

impl EncoderParams {
    pub fn zeros(layers: usize, hidden: usize, input_dim: usize) -> Result<Self> {
        if layers == 0 || hidden == 0 || input_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "encoder shape L={layers} H={hidden} F={input_dim} must be positive"
            )));
        }
        let n = param_count(layers, hidden, input_dim)
            .ok_or_else(|| Error::InvalidConfig("encoder too large".into()))?;
        Ok(Self {
            layers,
            hidden,
            input_dim,
            data: vec![0.0; n],
        })
    }

    /// Uniform weights in `[-0.05, 0.05]`, forget-gate biases 1.
    pub fn init(layers: usize, hidden: usize, input_dim: usize, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(layers, hidden, input_dim)?;
        let mut rng = stream(seed, "nawe.init");
        for v in &mut p.data {
            *v = rng.random_range(-INIT_SCALE..=INIT_SCALE);
        }
        for l in 0..layers {
            for dir in [Direction::Forward, Direction::Backward] {
                let (_, b) = p.cell_ranges(l, dir);
                p.data[b.start + hidden..b.start + 2 * hidden].fill(FORGET_BIAS);
            }
        }
        Ok(p)
    }

    /// Zero-filled buffer of the same shape, used for gradients.
    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![0.0; self.data.len()],
            ..*self
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn embedding_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        (self.layers, self.hidden, self.input_dim) == (other.layers, other.hidden, other.input_dim)
    }

    pub(crate) fn layer_input(&self, layer: usize) -> usize {
        layer_input(layer, self.hidden, self.input_dim)
    }

    /// Weight and bias ranges of one layer direction within the flat buffer.
    pub(crate) fn cell_ranges(&self, layer: usize, dir: Direction) -> (Range<usize>, Range<usize>) {
        let mut off = 0;
        for l in 0..layer {
            off += 2 * cell_size(self.layer_input(l), self.hidden);
        }
        let inp = self.layer_input(layer);
        if dir == Direction::Backward {
            off += cell_size(inp, self.hidden);
        }
        let w_len = 4 * self.hidden * (inp + self.hidden);
        (off..off + w_len, off + w_len..off + w_len + 4 * self.hidden)
    }

    pub(crate) fn cell(&self, layer: usize, dir: Direction) -> Cell<'_> {
        let (w, b) = self.cell_ranges(layer, dir);
        Cell {
            w: &self.data[w],
            b: &self.data[b],
            input: self.layer_input(layer),
            hidden: self.hidden,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn encode_model(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.data.len());
        out.extend_from_slice(&MODEL_MAGIC);
        for v in [self.layers, self.hidden, self.input_dim] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode_model(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        let layers = r.u32("layer count")? as usize;
        let hidden = r.u32("hidden size")? as usize;
        let input_dim = r.u32("input dimension")? as usize;
        let invalid = |reason: String| FormatError::Invalid {
            context: "model header".into(),
            reason,
        };
        if layers == 0 || hidden == 0 || input_dim == 0 {
            return Err(invalid(format!("shape L={layers} H={hidden} F={input_dim}")));
        }
        let n = param_count(layers, hidden, input_dim).ok_or_else(|| invalid("shape overflows".into()))?;
        if n.checked_mul(8).is_none_or(|bytes| r.remaining() < bytes) {
            return Err(FormatError::Truncated {
                context: format!("model parameters ({n} expected)"),
            });
        }
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let v = r.f64("model parameters")?;
            if !v.is_finite() {
                return Err(FormatError::NonFinite {
                    context: format!("model parameter {i}"),
                });
            }
            data.push(v);
        }
        r.finish()?;
        Ok(Self {
            layers,
            hidden,
            input_dim,
            data,
        })
    }

    pub fn write_model(&self, path: &Path) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        fs::write(path, self.encode_model())?;
        Ok(())
    }

    pub fn read_model(path: &Path) -> Result<Self> {
        Ok(Self::decode_model(&fs::read(path)?)?)
    }
}
