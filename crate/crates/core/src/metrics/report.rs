use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 7] = ["dataset_id", "model", "metric", "k", "seed", "replication", "value"];

/// Outcome of one measurement cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MetricValue {
    Value(f64),
    /// The metric does not apply to this model (e.g. representation AUC of a heuristic).
    NotApplicable,
    /// The cell failed; carries a stable error code.
    Failed(String),
}

impl MetricValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, MetricValue::Failed(_))
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Value(v) => write!(f, "{v}"),
            MetricValue::NotApplicable => f.write_str("NA"),
            MetricValue::Failed(code) => write!(f, "ERR:{code}"),
        }
    }
}

impl std::str::FromStr for MetricValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "NA" {
            Ok(MetricValue::NotApplicable)
        } else if let Some(code) = s.strip_prefix("ERR:") {
            Ok(MetricValue::Failed(code.to_owned()))
        } else {
            s.parse()
                .map(MetricValue::Value)
                .map_err(|_| Error::Format(format!("bad metric value `{s}`")))
        }
    }
}

/// One row of `report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub dataset_id: String,
    pub model: String,
    pub metric: String,
    pub k: usize,
    pub seed: u64,
    pub replication: usize,
    pub value: MetricValue,
}

impl MetricReport {
    fn record(&self) -> [String; 7] {
        [
            self.dataset_id.clone(),
            self.model.clone(),
            self.metric.clone(),
            self.k.to_string(),
            self.seed.to_string(),
            self.replication.to_string(),
            self.value.to_string(),
        ]
    }
}

pub fn write_report_to<W: Write>(rows: &[MetricReport], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    writer.write_record(REPORT_HEADER).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row.record()).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_report(rows: &[MetricReport], path: &Path) -> Result<()> {
    write_report_to(rows, crate::io::create(path)?)
}

pub fn read_report(path: &Path) -> Result<Vec<MetricReport>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.iter().ne(REPORT_HEADER) {
        return Err(Error::Format(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let parse_err = |what: &str| Error::Parse {
            path: path.to_owned(),
            line: line + 2,
            message: format!("bad {what}"),
        };
        rows.push(MetricReport {
            dataset_id: record[0].to_owned(),
            model: record[1].to_owned(),
            metric: record[2].to_owned(),
            k: record[3].parse().map_err(|_| parse_err("k"))?,
            seed: record[4].parse().map_err(|_| parse_err("seed"))?,
            replication: record[5].parse().map_err(|_| parse_err("replication"))?,
            value: record[6].parse()?,
        });
    }
    Ok(rows)
}
