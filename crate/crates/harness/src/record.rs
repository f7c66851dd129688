//! Result rows, the JSON record and output-directory persistence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use metroforge::metrics::Stage;
use metroforge::optimizer::SearchResult;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::HarnessError;

/// One CSV row: a protocol evaluated at its best interrogation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub protocol: String,
    pub cfi_phi: f64,
    pub cfi_omega: f64,
    pub qfi: Option<f64>,
    pub t_star_s: f64,
    pub objective: f64,
    pub snr_bound: f64,
    pub seed: u64,
}

/// One stage of a noise decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub protocol: String,
    pub stage: Stage,
    pub value: f64,
    pub region: f64,
}

/// Search output kept for reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub protocol: String,
    pub result: SearchResult,
}

/// A register size whose evaluation failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    #[serde(default)]
    pub decomposition: Vec<DecompositionRow>,
    #[serde(default)]
    pub searches: Vec<SearchEntry>,
    #[serde(default)]
    pub failures: Vec<FailureRow>,
}

impl ResultRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        ResultRecord {
            experiment: config.experiment.clone(),
            config_hash: config.hash(),
            seed: config.seed,
            rows: Vec::new(),
            decomposition: Vec::new(),
            searches: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn row(&self, experiment: &str, n: usize, protocol: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.experiment == experiment && r.n == n && r.protocol == protocol)
    }

    pub fn merge(&mut self, other: ResultRecord) {
        self.rows.extend(other.rows);
        self.decomposition.extend(other.decomposition);
        self.searches.extend(other.searches);
        self.failures.extend(other.failures);
    }
}

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const CONFIG_ECHO: &str = "config.toml";
pub const DECOMPOSITION_CSV: &str = "decomposition.csv";
pub const RUN_META: &str = "run-meta.json";

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))
}

pub const CSV_HEADER: [&str; 10] = ["experiment", "N", "protocol", "cfi_phi", "cfi_omega", "qfi", "t_star_s", "objective", "snr_bound", "seed"];
pub const DECOMPOSITION_HEADER: [&str; 6] = ["experiment", "N", "protocol", "stage", "value", "region"];

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String, HarnessError> {
    Ok(String::from_utf8(csv_bytes(rows, &CSV_HEADER)?).expect("csv output is utf-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(|e| HarnessError::Runtime(format!("csv: {e}")))
}

/// Paths written by [`persist`].
#[derive(Clone, Debug)]
pub struct Written {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Writes results.csv, results.json, the echoed config and (when present)
/// decomposition.csv into `dir`. Wall-clock metadata goes to a separate
/// run-meta.json so results.json depends only on the config and seed.
pub fn persist(dir: &Path, config: &ExperimentConfig, record: &ResultRecord) -> Result<Written, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), HarnessError> {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        files.push(p);
        Ok(())
    };
    put(CONFIG_ECHO, config.canonical().into_bytes())?;
    put(RESULTS_CSV, rows_to_csv(&record.rows)?.into_bytes())?;
    if !record.decomposition.is_empty() {
        put(DECOMPOSITION_CSV, csv_bytes(&record.decomposition, &DECOMPOSITION_HEADER)?)?;
    }
    let mut json = serde_json::to_vec_pretty(record).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    json.push(b'\n');
    put(RESULTS_JSON, json)?;
    let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({
        "finished_unix_s": now,
        "config_hash": record.config_hash,
        "version": env!("CARGO_PKG_VERSION"),
    });
    put(RUN_META, serde_json::to_vec_pretty(&meta).expect("json"))?;
    Ok(Written { dir: dir.to_path_buf(), files })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(qfi: Option<f64>) -> ResultRow {
        ResultRow {
            experiment: "x".into(),
            n: 3,
            protocol: "ghz-h".into(),
            cfi_phi: 0.1 + 0.2,
            cfi_omega: 1.234_567_890_123e-11,
            qfi,
            t_star_s: 2.0e-5,
            objective: 1.0 / 3.0,
            snr_bound: 7.0,
            seed: u64::MAX,
        }
    }

    #[test]
    fn csv_header_and_round_trip() {
        let rows = vec![row(Some(8.5)), row(None)];
        let text = rows_to_csv(&rows).unwrap();
        assert!(text.starts_with("experiment,N,protocol,cfi_phi,cfi_omega,qfi,t_star_s,objective,snr_bound,seed\n"));
        assert_eq!(rows_from_csv(&text).unwrap(), rows);
        assert_eq!(rows_to_csv(&[]).unwrap().lines().count(), 1);
    }
}
