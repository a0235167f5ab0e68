//! Spoken-term retrieval metrics: P@10, figure of merit, oracle term-weighted
//! value, same/different average precision, and median/best-example
//! aggregation.

mod report;

pub use report::{evaluate_queries, write_report, MetricRow, MetricsReport, Summary};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Default false-alarm weight for OTWV.
pub const DEFAULT_OTWV_BETA: f64 = 999.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredHit {
    /// Cosine distance; lower is better.
    pub score: f64,
    pub correct: bool,
}

/// Labeled hits of one query example.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query_type: String,
    pub example_id: String,
    pub hits: Vec<ScoredHit>,
    pub n_true: usize,
    pub search_hours: f64,
}

impl QueryResult {
    pub fn new(
        query_type: impl Into<String>,
        example_id: impl Into<String>,
        hits: Vec<ScoredHit>,
        n_true: usize,
        search_hours: f64,
    ) -> Result<Self> {
        if !(search_hours > 0.0 && search_hours.is_finite()) {
            return Err(Error::InvalidInput(format!("search_hours {search_hours} must be positive")));
        }
        if hits.iter().any(|h| h.score.is_nan()) || hits.windows(2).any(|w| w[0].score > w[1].score) {
            return Err(Error::InvalidInput("hits must be sorted by ascending score".into()));
        }
        Ok(Self {
            query_type: query_type.into(),
            example_id: example_id.into(),
            hits,
            n_true,
            search_hours,
        })
    }

    fn require_truth(&self) -> Result<()> {
        if self.n_true == 0 {
            return Err(Error::InvalidInput(format!("query {} has no true occurrences", self.example_id)));
        }
        Ok(())
    }
}

/// Correct hits among the first ten, over ten.
pub fn precision_at_10(r: &QueryResult) -> f64 {
    r.hits.iter().take(10).filter(|h| h.correct).count() as f64 / 10.0
}

/// Recall averaged over 1..=10 false alarms per search hour, in percent.
pub fn figure_of_merit(r: &QueryResult) -> Result<f64> {
    r.require_truth()?;
    let mut total = 0.0;
    for rate in 1..=10u32 {
        let allowed = (f64::from(rate) * r.search_hours).floor() as usize;
        let mut fas = 0;
        let mut correct = 0;
        for h in &r.hits {
            if h.correct {
                correct += 1;
            } else {
                fas += 1;
                if fas > allowed {
                    break;
                }
            }
        }
        total += correct as f64 / r.n_true as f64;
    }
    Ok(100.0 * total / 10.0)
}

/// Number of non-target trials: one per second of search audio, minus the
/// true occurrences, at least one.
pub fn non_target_trials(search_hours: f64, n_true: usize) -> f64 {
    let trials = (3600.0 * search_hours).floor() as i64 - n_true as i64;
    trials.max(1) as f64
}

/// Best term-weighted value over all score thresholds, including accepting
/// nothing.
pub fn otwv(r: &QueryResult, beta: f64) -> Result<f64> {
    r.require_truth()?;
    let trials = non_target_trials(r.search_hours, r.n_true);
    let mut best = 0.0f64;
    let (mut correct, mut fas) = (0usize, 0usize);
    for (i, h) in r.hits.iter().enumerate() {
        if h.correct {
            correct += 1;
        } else {
            fas += 1;
        }
        let group_end = r.hits.get(i + 1).is_none_or(|next| next.score != h.score);
        if group_end {
            let twv = correct as f64 / r.n_true as f64 - beta * fas as f64 / trials;
            best = best.max(twv);
        }
    }
    Ok(best)
}

/// Average precision of same-word pairs ranked by ascending distance, ties in
/// input order.
pub fn same_different_ap(pairs: &[(f64, bool)]) -> Result<f64> {
    if pairs.iter().any(|(d, _)| d.is_nan()) {
        return Err(Error::InvalidInput("NaN distance".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0));
    // Compensated sum of the precision terms, carrying each division's
    // rounding residual, so small cases come out correctly rounded.
    let mut same_seen = 0usize;
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for (rank, &i) in order.iter().enumerate() {
        if pairs[i].1 {
            same_seen += 1;
            let (k, r) = (same_seen as f64, (rank + 1) as f64);
            let q = k / r;
            comp += (-q).mul_add(r, k) / r;
            let t = sum + q;
            comp += if sum.abs() >= q.abs() { (sum - t) + q } else { (q - t) + sum };
            sum = t;
        }
    }
    if same_seen == 0 {
        return Err(Error::InvalidInput("no same-word pairs".into()));
    }
    Ok((sum + comp) / same_seen as f64)
}

/// Median of a non-empty slice; even counts average the middle two.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// `(mean over types of the per-type median, mean over types of the per-type
/// maximum)`, unweighted across types.
pub fn aggregate(per_type: &BTreeMap<String, Vec<f64>>) -> Result<(f64, f64)> {
    if per_type.is_empty() {
        return Err(Error::InvalidInput("no query types to aggregate".into()));
    }
    let (mut med_sum, mut max_sum) = (0.0, 0.0);
    for (ty, scores) in per_type {
        let med = median(scores).ok_or_else(|| Error::InvalidInput(format!("query type {ty} has no examples")))?;
        med_sum += med;
        max_sum += scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let n = per_type.len() as f64;
    Ok((med_sum / n, max_sum / n))
}
