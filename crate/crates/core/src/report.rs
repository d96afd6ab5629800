//! CSV/JSON emission and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebraic::TrialSummary;
use crate::calderon::{DtNSpectrum, SpectrumComparison};
use crate::fredholm::{Certification, FredholmReport};
use crate::wspace::MembershipVerdict;
use crate::{Error, Result};

pub const TOOL_VERSION: &str = concat!("edgelab ", env!("CARGO_PKG_VERSION"));

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_trace(trace: &[(usize, f64)]) -> String {
    trace
        .iter()
        .map(|(l, v)| format!("{l}:{}", fmt_f64(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

pub trait CsvRecord {
    fn header() -> Vec<&'static str>;
    fn row(&self) -> Vec<String>;
}

pub fn emit_csv<R: CsvRecord>(records: &[R], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records".into()));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)?;
    w.write_record(R::header())?;
    for r in records {
        w.write_record(r.row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(record: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(record)?;
    s.push('\n');
    Ok(s)
}

pub fn emit_json<T: Serialize + ?Sized>(record: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(record)?)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// RFC 3339 time from `SOURCE_DATE_EPOCH` when set, else the current time.
pub fn timestamp() -> String {
    let epoch = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok());
    let t = match epoch.and_then(|e| chrono::DateTime::from_timestamp(e, 0)) {
        Some(t) => t,
        None => chrono::Utc::now(),
    };
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub timestamp: String,
    pub command: String,
    pub config: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            timestamp: timestamp(),
            command: command.to_string(),
            config,
            input_digests: BTreeMap::new(),
            seed,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.input_digests
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Hash of everything but the timestamp.
    pub fn digest(&self) -> Result<String> {
        let mut m = self.clone();
        m.timestamp.clear();
        Ok(sha256_hex(serde_json::to_string(&m)?.as_bytes()))
    }

    pub fn side_file(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_for(&self, output: &Path) -> Result<PathBuf> {
        let path = Self::side_file(output);
        emit_json(self, &path)?;
        Ok(path)
    }
}

impl CsvRecord for FredholmReport {
    fn header() -> Vec<&'static str> {
        vec![
            "gamma",
            "kernel_dim",
            "cokernel_dim",
            "smin_trace",
            "case_label",
            "mapping_spaces",
        ]
    }
    fn row(&self) -> Vec<String> {
        vec![
            fmt_f64(self.gamma),
            self.kernel_dim.to_string(),
            self.cokernel_dim.to_string(),
            fmt_trace(&self.smin_trace),
            self.case_label.to_string(),
            self.mapping_spaces.clone(),
        ]
    }
}

impl CsvRecord for Certification {
    fn header() -> Vec<&'static str> {
        vec![
            "gamma",
            "xi_norm",
            "sigma0",
            "mode",
            "certified",
            "smin_trace",
            "mapping_spaces",
        ]
    }
    fn row(&self) -> Vec<String> {
        vec![
            fmt_f64(self.gamma),
            fmt_f64(self.xi_norm),
            fmt_f64(self.sigma0),
            self.mode.to_string(),
            self.certified.to_string(),
            fmt_trace(&self.smin_trace),
            self.mapping_spaces.clone(),
        ]
    }
}

impl CsvRecord for MembershipVerdict {
    fn header() -> Vec<&'static str> {
        vec!["verdict", "norm_trace", "fitted_rate"]
    }
    fn row(&self) -> Vec<String> {
        vec![
            self.verdict.to_string(),
            fmt_trace(&self.norm_trace),
            self.fitted_rate.map(fmt_f64).unwrap_or_default(),
        ]
    }
}

/// One `(n, λ_n)` row of a DtN spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub n: usize,
    pub lambda_n: f64,
}

impl CsvRecord for ModeRow {
    fn header() -> Vec<&'static str> {
        vec!["n", "lambda_n"]
    }
    fn row(&self) -> Vec<String> {
        vec![self.n.to_string(), fmt_f64(self.lambda_n)]
    }
}

pub fn mode_rows(s: &DtNSpectrum) -> Vec<ModeRow> {
    s.modes
        .iter()
        .map(|&(n, lambda_n)| ModeRow { n, lambda_n })
        .collect()
}

impl CsvRecord for SpectrumComparison {
    fn header() -> Vec<&'static str> {
        vec!["max_abs_dev", "distinguishable"]
    }
    fn row(&self) -> Vec<String> {
        vec![fmt_f64(self.max_abs_dev), self.distinguishable.to_string()]
    }
}

impl CsvRecord for TrialSummary {
    fn header() -> Vec<&'static str> {
        vec![
            "trials",
            "passed",
            "failed",
            "max_deviation",
            "scaled_rejected",
            "seed",
        ]
    }
    fn row(&self) -> Vec<String> {
        vec![
            self.trials.to_string(),
            self.passed.to_string(),
            self.failed.to_string(),
            fmt_f64(self.max_deviation),
            self.scaled_rejected.to_string(),
            self.seed.to_string(),
        ]
    }
}
