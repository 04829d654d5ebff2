//! File formats: dataset CSV, metrics-row CSV, feedback ledger CSV, and
//! model JSON. All writes are atomic (write to a temp name, then rename).

use crate::error::{Error, Result};
use crate::fairmetrics::MetricsReport;
use crate::learners::Model;
use crate::scenarios::FeedbackLedger;
use crate::synthdata::{Dataset, Group, Instance};
use std::fmt::Write as _;
use std::path::Path;

/// Writes bytes to `path` via a sibling temp file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("bad output path {path:?}")))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Header: `id,month,group,true_label,observed_label,f0..f{d-1}`.
pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    out.push_str("id,month,group,true_label,observed_label");
    for j in 0..ds.d {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for inst in &ds.instances {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            inst.id,
            inst.month,
            inst.group,
            inst.true_label as u8,
            inst.observed_label as u8
        );
        for x in &inst.features {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// Parses a dataset CSV produced by [`dataset_to_csv`]. Provenance is not
/// part of the wire format; the result carries data only.
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::SchemaMismatch("empty dataset file".to_string()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 6 || cols[..5] != ["id", "month", "group", "true_label", "observed_label"] {
        return Err(Error::SchemaMismatch(format!(
            "unexpected dataset header {header:?}"
        )));
    }
    let d = cols.len() - 5;
    let mut instances = Vec::new();
    let mut months = 0u32;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 + d {
            return Err(Error::SchemaMismatch(format!(
                "row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                5 + d
            )));
        }
        let parse_err = |what: &str| {
            Error::SchemaMismatch(format!("row {}: bad {what}", lineno + 2))
        };
        let id: u64 = fields[0].parse().map_err(|_| parse_err("id"))?;
        let month: u32 = fields[1].parse().map_err(|_| parse_err("month"))?;
        let group = Group::parse(fields[2])?;
        let true_label = fields[3] == "1";
        let observed_label = fields[4] == "1";
        let mut features = Vec::with_capacity(d);
        for f in &fields[5..] {
            features.push(f.parse::<f64>().map_err(|_| parse_err("feature"))?);
        }
        months = months.max(month + 1);
        instances.push(Instance {
            id,
            month,
            group,
            true_label,
            observed_label,
            features,
        });
    }
    if instances.is_empty() {
        return Err(Error::SchemaMismatch("dataset has no rows".to_string()));
    }
    let prevalence =
        instances.iter().filter(|i| i.true_label).count() as f64 / instances.len() as f64;
    Ok(Dataset {
        instances,
        d,
        months,
        base_prevalence: prevalence,
        provenance: Vec::new(),
    })
}

pub const METRICS_HEADER: &str = "scenario,iteration,seed,policy,label_source,group,tp,fp,tn,fn,\
                                  tpr,fpr,fnr,precision,log2_fpr_ratio,log2_fnr_ratio";

/// One exported metrics row; `group` is "A", "B", or "global".
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario: String,
    pub iteration: String,
    pub seed: u64,
    pub policy: String,
    pub label_source: String,
    pub group: String,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub precision: Option<f64>,
    pub log2_fpr_ratio: Option<f64>,
    pub log2_fnr_ratio: Option<f64>,
}

fn opt_fmt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

fn opt_parse(s: &str) -> Result<Option<f64>> {
    if s == "NA" {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::SchemaMismatch(format!("bad numeric field {s:?}")))
    }
}

impl MetricsRow {
    /// Expands a report into three rows: group A, group B, global. The
    /// log2 ratio columns repeat the report-level values on every row.
    pub fn from_report(
        scenario: &str,
        iteration: &str,
        seed: u64,
        policy: &str,
        report: &MetricsReport,
    ) -> Vec<MetricsRow> {
        let mk = |group: &str, counts: crate::fairmetrics::Counts, tpr, fpr, fnr, precision| {
            MetricsRow {
                scenario: scenario.to_string(),
                iteration: iteration.to_string(),
                seed,
                policy: policy.to_string(),
                label_source: report.evaluated_against.to_string(),
                group: group.to_string(),
                tp: counts.tp,
                fp: counts.fp,
                tn: counts.tn,
                fn_: counts.fn_,
                tpr,
                fpr,
                fnr,
                precision,
                log2_fpr_ratio: report.log2_fpr_ratio,
                log2_fnr_ratio: report.log2_fnr_ratio,
            }
        };
        let a = report.confusion.group_a;
        let b = report.confusion.group_b;
        let g = report.confusion.global;
        vec![
            mk(
                "A",
                a,
                report.group_a.tpr,
                report.group_a.fpr,
                report.group_a.fnr,
                report.group_a.precision,
            ),
            mk(
                "B",
                b,
                report.group_b.tpr,
                report.group_b.fpr,
                report.group_b.fnr,
                report.group_b.precision,
            ),
            mk(
                "global",
                g,
                g.tpr(),
                g.fpr(),
                g.fnr(),
                g.precision(),
            ),
        ]
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.iteration,
            self.seed,
            self.policy,
            self.label_source,
            self.group,
            self.tp,
            self.fp,
            self.tn,
            self.fn_,
            opt_fmt(self.tpr),
            opt_fmt(self.fpr),
            opt_fmt(self.fnr),
            opt_fmt(self.precision),
            opt_fmt(self.log2_fpr_ratio),
            opt_fmt(self.log2_fnr_ratio),
        )
    }

    pub fn parse(line: &str) -> Result<MetricsRow> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 16 {
            return Err(Error::SchemaMismatch(format!(
                "metrics row has {} fields, expected 16",
                f.len()
            )));
        }
        let int = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::SchemaMismatch(format!("bad count {s:?}")))
        };
        Ok(MetricsRow {
            scenario: f[0].to_string(),
            iteration: f[1].to_string(),
            seed: int(f[2])?,
            policy: f[3].to_string(),
            label_source: f[4].to_string(),
            group: f[5].to_string(),
            tp: int(f[6])?,
            fp: int(f[7])?,
            tn: int(f[8])?,
            fn_: int(f[9])?,
            tpr: opt_parse(f[10])?,
            fpr: opt_parse(f[11])?,
            fnr: opt_parse(f[12])?,
            precision: opt_parse(f[13])?,
            log2_fpr_ratio: opt_parse(f[14])?,
            log2_fnr_ratio: opt_parse(f[15])?,
        })
    }
}

pub fn rows_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

pub fn rows_from_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::SchemaMismatch("empty metrics file".to_string()))?;
    if header != METRICS_HEADER {
        return Err(Error::SchemaMismatch(format!(
            "unexpected metrics header {header:?}"
        )));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(MetricsRow::parse)
        .collect()
}

/// Feedback ledger rows: `iteration,id,action`.
pub fn ledger_to_csv(ledger: &FeedbackLedger) -> String {
    let mut out = String::from("iteration,id,action\n");
    for entry in &ledger.entries {
        for id in &entry.outcome.relabeled_positive {
            let _ = writeln!(out, "{},{},relabeled_positive", entry.iteration, id);
        }
        for id in &entry.outcome.revealed {
            let _ = writeln!(out, "{},{},revealed", entry.iteration, id);
        }
    }
    out
}

/// Self-describing model serialization (algorithm tag, layout, parameters).
pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let text = serde_json::to_string_pretty(model)
        .map_err(|e| Error::InvalidParameter(format!("model serialization failed: {e}")))?;
    write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::SchemaMismatch(format!("model deserialization failed: {e}")))
}
