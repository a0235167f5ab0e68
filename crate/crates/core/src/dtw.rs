//! Dynamic time warping and the template reference-vector embedding.
//!
//! The distance is the summed frame cost of the cheapest monotonic alignment
//! (steps (1,0), (0,1), (1,1), both endpoints matched) divided by the number
//! of aligned frame pairs on that path. Among equally cheap paths the shortest
//! one is used.

use std::collections::BTreeMap;

use rand::seq::index::sample;

use crate::data::{FeatureSequence, WordSegment};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Added to each frame norm in the cosine frame distance.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameMetric {
    #[default]
    Cosine,
    SquaredEuclidean,
}

impl std::str::FromStr for FrameMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "squared-euclidean" | "sqeuclidean" => Ok(Self::SquaredEuclidean),
            other => Err(Error::InvalidConfig(format!("unknown frame metric {other:?}"))),
        }
    }
}

fn frame_norm(f: &[f32]) -> f64 {
    f.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
}

/// Per-sequence cache of frame norms (unused for squared Euclidean).
struct Prepared<'a> {
    seq: &'a FeatureSequence,
    norms: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(seq: &'a FeatureSequence, metric: FrameMetric) -> Self {
        let norms = match metric {
            FrameMetric::Cosine => seq.frames().map(frame_norm).collect(),
            FrameMetric::SquaredEuclidean => Vec::new(),
        };
        Self { seq, norms }
    }
}

fn frame_distance(metric: FrameMetric, a: &Prepared<'_>, i: usize, b: &Prepared<'_>, j: usize) -> f64 {
    let (x, y) = (a.seq.frame(i), b.seq.frame(j));
    match metric {
        FrameMetric::SquaredEuclidean => x
            .iter()
            .zip(y)
            .map(|(&p, &q)| {
                let d = f64::from(p) - f64::from(q);
                d * d
            })
            .sum(),
        FrameMetric::Cosine => {
            let dot: f64 = x.iter().zip(y).map(|(&p, &q)| f64::from(p) * f64::from(q)).sum();
            1.0 - dot / ((a.norms[i] + NORM_EPS) * (b.norms[j] + NORM_EPS))
        }
    }
}

/// Accumulated (cost, path length) of the best path into a lattice cell.
#[derive(Clone, Copy, PartialEq, Debug)]
struct Cell {
    cost: f64,
    len: u32,
}

impl Cell {
    const INF: Cell = Cell {
        cost: f64::INFINITY,
        len: u32::MAX,
    };

    fn better(self, other: Cell) -> Cell {
        if other.cost < self.cost || (other.cost == self.cost && other.len < self.len) {
            other
        } else {
            self
        }
    }
}

/// Row-by-row lattice over `rows × cols`. Row `r` depends only on rows before
/// it, so one sweep yields the distance for every prefix of `rows`.
struct Lattice {
    prev: Vec<Cell>,
    cur: Vec<Cell>,
    row: usize,
}

impl Lattice {
    fn new(cols: usize) -> Self {
        Self {
            prev: vec![Cell::INF; cols],
            cur: vec![Cell::INF; cols],
            row: 0,
        }
    }

    /// Pushes one row of frame costs and returns the normalized distance of
    /// the prefix ending at this row.
    fn push_row(&mut self, costs: impl Iterator<Item = f64>) -> f64 {
        for (j, d) in costs.enumerate() {
            let best = if self.row == 0 && j == 0 {
                Cell { cost: 0.0, len: 0 }
            } else {
                let mut b = Cell::INF;
                if self.row > 0 {
                    b = b.better(self.prev[j]);
                    if j > 0 {
                        b = b.better(self.prev[j - 1]);
                    }
                }
                if j > 0 {
                    b = b.better(self.cur[j - 1]);
                }
                b
            };
            self.cur[j] = Cell {
                cost: best.cost + d,
                len: best.len + 1,
            };
        }
        std::mem::swap(&mut self.prev, &mut self.cur);
        self.row += 1;
        let last = self.prev[self.prev.len() - 1];
        last.cost / f64::from(last.len)
    }
}

fn check_dims(a: &FeatureSequence, b: &FeatureSequence) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

pub fn dtw_distance(a: &FeatureSequence, b: &FeatureSequence, metric: FrameMetric) -> Result<f64> {
    check_dims(a, b)?;
    let (pa, pb) = (Prepared::new(a, metric), Prepared::new(b, metric));
    let mut lattice = Lattice::new(b.len());
    let mut dist = f64::NAN;
    for i in 0..a.len() {
        dist = lattice.push_row((0..b.len()).map(|j| frame_distance(metric, &pa, i, &pb, j)));
    }
    Ok(dist)
}

/// Ordered template segments; the reference vector has one component each.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: Vec<WordSegment>,
}

impl TemplateSet {
    pub fn new(templates: Vec<WordSegment>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::InvalidInput("template set is empty".into()));
        }
        let dim = templates[0].features.dim();
        if let Some(t) = templates.iter().find(|t| t.features.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: t.features.dim(),
            });
        }
        Ok(Self { templates })
    }

    /// `m` segments drawn uniformly without replacement, in draw order. Labels
    /// are not consulted.
    pub fn sample(segments: &[WordSegment], m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > segments.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot draw {m} templates from {} segments",
                segments.len()
            )));
        }
        let mut rng = stream(seed, "dtw.templates");
        let picked = sample(&mut rng, segments.len(), m);
        Self::new(picked.into_iter().map(|i| segments[i].clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.templates[0].features.dim()
    }

    pub fn templates(&self) -> &[WordSegment] {
        &self.templates
    }
}

pub fn reference_vector(segment: &FeatureSequence, templates: &TemplateSet, metric: FrameMetric) -> Result<Embedding> {
    templates
        .templates
        .iter()
        .map(|t| dtw_distance(segment, &t.features, metric))
        .collect::<Result<Vec<_>>>()
        .map(Embedding::new)
}

/// Reference vectors for many windows `start..end` of one sequence.
///
/// Windows sharing a start frame share one lattice sweep per template; the
/// results are identical to calling [`reference_vector`] on each slice.
pub fn reference_vectors_for_windows(
    features: &FeatureSequence,
    windows: &[(usize, usize)],
    templates: &TemplateSet,
    metric: FrameMetric,
) -> Result<Vec<Embedding>> {
    if features.dim() != templates.dim() {
        return Err(Error::DimensionMismatch {
            expected: templates.dim(),
            actual: features.dim(),
        });
    }
    let mut by_start: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, &(s, e)) in windows.iter().enumerate() {
        if s >= e || e > features.len() {
            return Err(Error::InvalidInput(format!("window {s}..{e} outside 0..{}", features.len())));
        }
        by_start.entry(s).or_default().push((e - s, k));
    }
    let m = templates.len();
    let mut out = vec![vec![0.0; m]; windows.len()];
    let pf = Prepared::new(features, metric);
    for (ti, tmpl) in templates.templates.iter().enumerate() {
        let pt = Prepared::new(&tmpl.features, metric);
        let cols = tmpl.features.len();
        // Frame costs between the full sequence and this template.
        let costs: Vec<f64> = (0..features.len())
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| frame_distance(metric, &pf, i, &pt, j))
            .collect();
        for (&start, lens) in &by_start {
            let max_len = lens.iter().map(|&(l, _)| l).max().unwrap_or(0);
            let mut lattice = Lattice::new(cols);
            let mut row_dist = Vec::with_capacity(max_len);
            for r in start..start + max_len {
                row_dist.push(lattice.push_row(costs[r * cols..(r + 1) * cols].iter().copied()));
            }
            for &(len, k) in lens {
                out[k][ti] = row_dist[len - 1];
            }
        }
    }
    Ok(out.into_iter().map(Embedding::new).collect())
}
