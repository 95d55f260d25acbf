//! Report headers, error mapping and output.

use std::fmt::Write as _;
use std::path::Path;

use lfbgw::{Error, Model};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{EXIT_DOMAIN, EXIT_INPUT, EXIT_INTERNAL};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) | Error::Validation(_) => EXIT_INPUT,
            Error::NotConverged { .. } | Error::FixedPointMismatch { .. } => EXIT_INTERNAL,
            _ => EXIT_DOMAIN,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub root: f64,
    pub series_eps: f64,
    pub series_k_max: usize,
    pub fixed_point: f64,
}

/// Reproducibility header carried by every report.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub model_sha256: String,
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
}

impl Header {
    pub fn csv_comment(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} {} {}", self.tool, self.version, self.command);
        let _ = writeln!(out, "# model_sha256={}", self.model_sha256);
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "# seed={s}");
            }
            None => out.push_str("# seed=none\n"),
        }
        let t = &self.tolerances;
        let _ = writeln!(
            out,
            "# tol_root={} series_eps={} series_k_max={} tol_fixed_point={}",
            fmt_f64(t.root),
            fmt_f64(t.series_eps),
            t.series_k_max,
            fmt_f64(t.fixed_point)
        );
        out
    }
}

/// Digest of the canonical JSON form, so formatting of the input file does
/// not matter.
pub fn model_digest(model: &Model) -> String {
    let digest = Sha256::digest(lfbgw::model_to_json(model).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct WithHeader<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

pub fn json_report<T: Serialize>(header: &Header, body: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&WithHeader { header, body })
        .map_err(|e| CliError::internal(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// CSV with a fixed column order; cells are written verbatim.
pub fn csv_table(header: &Header, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.csv_comment();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}
