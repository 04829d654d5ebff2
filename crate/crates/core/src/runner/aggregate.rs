//! Cross-seed aggregation of metrics rows into median/min/max summaries —
//! the error-bar convention of the figures: center at the median, bars at
//! the minimum and maximum.

use crate::error::{Error, Result};
use crate::io::MetricsRow;
use crate::stats;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub iteration: String,
    pub policy: String,
    pub label_source: String,
    pub group: String,
    pub metric: String,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub const SUMMARY_HEADER: &str =
    "scenario,iteration,policy,label_source,group,metric,median,min,max,n";

const METRICS: [&str; 6] = [
    "tpr",
    "fpr",
    "fnr",
    "precision",
    "log2_fpr_ratio",
    "log2_fnr_ratio",
];

fn metric_value(row: &MetricsRow, metric: &str) -> Option<f64> {
    match metric {
        "tpr" => row.tpr,
        "fpr" => row.fpr,
        "fnr" => row.fnr,
        "precision" => row.precision,
        "log2_fpr_ratio" => row.log2_fpr_ratio,
        "log2_fnr_ratio" => row.log2_fnr_ratio,
        _ => None,
    }
}

/// Collapses rows across seeds (and trials) into one summary row per
/// (scenario, iteration, policy, label_source, group, metric). Undefined
/// values are skipped; a key with no defined values emits nothing.
pub fn aggregate_reports(rows: &[MetricsRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::SchemaMismatch("no rows to aggregate".to_string()));
    }
    let mut buckets: BTreeMap<(String, String, String, String, String), Vec<&MetricsRow>> =
        BTreeMap::new();
    for row in rows {
        buckets
            .entry((
                row.scenario.clone(),
                row.iteration.clone(),
                row.policy.clone(),
                row.label_source.clone(),
                row.group.clone(),
            ))
            .or_default()
            .push(row);
    }
    let mut out = Vec::new();
    for ((scenario, iteration, policy, label_source, group), members) in buckets {
        for metric in METRICS {
            let values: Vec<f64> = members
                .iter()
                .filter_map(|r| metric_value(r, metric))
                .collect();
            if values.is_empty() {
                continue;
            }
            let median = stats::median(&values);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.push(SummaryRow {
                scenario: scenario.clone(),
                iteration: iteration.clone(),
                policy: policy.clone(),
                label_source: label_source.clone(),
                group: group.clone(),
                metric: metric.to_string(),
                median,
                min,
                max,
                n: values.len(),
            });
        }
    }
    Ok(out)
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.iteration,
            r.policy,
            r.label_source,
            r.group,
            r.metric,
            r.median,
            r.min,
            r.max,
            r.n
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, iteration: &str, group: &str, tpr: f64) -> MetricsRow {
        MetricsRow {
            scenario: "scenario2".to_string(),
            iteration: iteration.to_string(),
            seed,
            policy: "global".to_string(),
            label_source: "true_labels".to_string(),
            group: group.to_string(),
            tp: 1,
            fp: 1,
            tn: 1,
            fn_: 1,
            tpr: Some(tpr),
            fpr: Some(0.5),
            fnr: Some(1.0 - tpr),
            precision: None,
            log2_fpr_ratio: None,
            log2_fnr_ratio: None,
        }
    }

    #[test]
    fn single_seed_collapses_to_itself() {
        let rows = vec![row(0, "0", "global", 0.4)];
        let summary = aggregate_reports(&rows).unwrap();
        let tpr = summary.iter().find(|s| s.metric == "tpr").unwrap();
        assert_eq!(tpr.median, 0.4);
        assert_eq!(tpr.min, 0.4);
        assert_eq!(tpr.max, 0.4);
        assert_eq!(tpr.n, 1);
    }

    #[test]
    fn three_seeds_median_min_max() {
        let rows = vec![
            row(0, "0", "global", 1.0),
            row(1, "0", "global", 2.0),
            row(2, "0", "global", 3.0),
        ];
        let summary = aggregate_reports(&rows).unwrap();
        let tpr = summary.iter().find(|s| s.metric == "tpr").unwrap();
        assert_eq!(tpr.median, 2.0);
        assert_eq!(tpr.min, 1.0);
        assert_eq!(tpr.max, 3.0);
    }

    #[test]
    fn matches_independent_sort_median_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
        let rows: Vec<MetricsRow> = values
            .iter()
            .enumerate()
            .map(|(s, &v)| row(s as u64, "2", "A", v))
            .collect();
        let summary = aggregate_reports(&rows).unwrap();
        let tpr = summary.iter().find(|s| s.metric == "tpr").unwrap();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = (sorted[4] + sorted[5]) / 2.0;
        assert_eq!(tpr.median, oracle);
        assert_eq!(tpr.min, sorted[0]);
        assert_eq!(tpr.max, sorted[9]);
    }

    #[test]
    fn undefined_metrics_are_skipped_not_zeroed() {
        let rows = vec![row(0, "0", "global", 0.5)];
        let summary = aggregate_reports(&rows).unwrap();
        assert!(summary.iter().all(|s| s.metric != "precision"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            aggregate_reports(&[]),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
