//! Per-type metric aggregation and the TSV metrics report.
//!
//! Report values are percentages for all three metrics. Rows are
//! `query_type<TAB>metric<TAB>median<TAB>max`; the final row is
//! `summary<TAB>FOM_median<TAB>OTWV_median<TAB>P@10_median<TAB>FOM_best<TAB>OTWV_best<TAB>P@10_best`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{aggregate, figure_of_merit, median, otwv, precision_at_10, QueryResult};
use crate::error::Result;

pub const METRIC_NAMES: [&str; 3] = ["FOM", "OTWV", "P@10"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub query_type: String,
    pub metric: &'static str,
    pub median: f64,
    pub max: f64,
}

/// Averages across query types: median example and best example per metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub fom: (f64, f64),
    pub otwv: (f64, f64),
    pub p10: (f64, f64),
}

impl Summary {
    /// `[FOM, OTWV, P@10]` medians followed by bests.
    pub fn values(&self) -> [f64; 6] {
        [self.fom.0, self.otwv.0, self.p10.0, self.fom.1, self.otwv.1, self.p10.1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub summary: Summary,
}

/// Scores every query example independently and aggregates per type.
pub fn evaluate_queries(results: &[QueryResult], otwv_beta: f64) -> Result<MetricsReport> {
    let mut per_metric: [BTreeMap<String, Vec<f64>>; 3] = Default::default();
    for r in results {
        let scores = [figure_of_merit(r)?, 100.0 * otwv(r, otwv_beta)?, 100.0 * precision_at_10(r)];
        for (m, s) in per_metric.iter_mut().zip(scores) {
            m.entry(r.query_type.clone()).or_default().push(s);
        }
    }
    let mut rows = Vec::new();
    for ty in per_metric[0].keys() {
        for (name, m) in METRIC_NAMES.iter().zip(&per_metric) {
            let v = &m[ty];
            rows.push(MetricRow {
                query_type: ty.clone(),
                metric: name,
                median: median(v).expect("non-empty"),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    let [fom, tw, p10] = &per_metric;
    let summary = Summary {
        fom: aggregate(fom)?,
        otwv: aggregate(tw)?,
        p10: aggregate(p10)?,
    };
    Ok(MetricsReport { rows, summary })
}

pub fn write_report(report: &MetricsReport) -> String {
    let mut out = String::from("# query_type\tmetric\tmedian\tmax\n");
    for r in &report.rows {
        writeln!(out, "{}\t{}\t{:.4}\t{:.4}", r.query_type, r.metric, r.median, r.max).unwrap();
    }
    out.push_str("#summary\tFOM_median\tOTWV_median\tP@10_median\tFOM_best\tOTWV_best\tP@10_best\n");
    out.push_str("summary");
    for v in report.summary.values() {
        write!(out, "\t{v:.4}").unwrap();
    }
    out.push('\n');
    out
}
