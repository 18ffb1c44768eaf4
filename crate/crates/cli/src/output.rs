use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use frameflow_core::VERSION;
use serde::Serialize;

use crate::config::Format;
use crate::error::{CliError, Result};

pub const TOOLKIT: &str = "frameflow";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Refuted,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Refuted => 4,
            Status::Inconclusive => 5,
        }
    }
}

/// A finished run: the JSON payload, an optional table and the verdict.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub json: String,
    pub csv: Option<String>,
    pub status: Status,
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    toolkit: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
    result: &'a R,
}

/// Pretty JSON with the toolkit name, version and configuration echo.
/// Contains nothing that varies between identical runs.
pub fn envelope<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> String {
    let env = Envelope {
        toolkit: TOOLKIT,
        version: VERSION,
        command,
        config,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("report types serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write `<command>.json` / `<command>.csv` plus a `<command>.meta.json`
/// with the wall-clock timestamp, or print the report when `dir` is absent.
pub fn emit(report: &Report, format: Format, dir: Option<&Path>) -> Result<()> {
    let want_json = format != Format::Csv;
    let want_csv = format != Format::Json;
    let Some(dir) = dir else {
        let body = match (&report.csv, want_json) {
            (Some(csv), false) => csv,
            _ => &report.json,
        };
        let mut out = std::io::stdout().lock();
        return out.write_all(body.as_bytes()).map_err(|source| CliError::Io {
            path: "stdout".into(),
            source,
        });
    };
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    if want_json {
        write_file(&dir.join(format!("{}.json", report.command)), &report.json)?;
    }
    if want_csv {
        if let Some(csv) = &report.csv {
            write_file(&dir.join(format!("{}.csv", report.command)), csv)?;
        }
    }
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "toolkit": TOOLKIT,
        "version": VERSION,
        "command": report.command,
        "created_unix": created,
        "exit_code": report.status.exit_code(),
    });
    write_file(
        &dir.join(format!("{}.meta.json", report.command)),
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("metadata serializes")),
    )
}
