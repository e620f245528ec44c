use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use carnot_core::verifiers::fmt_f64;

use crate::run::RunReport;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Json,
    Csv,
    Summary,
}

impl Format {
    pub fn parse_list(s: &str) -> Result<Vec<Format>, CliError> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            out.push(match part {
                "json" => Format::Json,
                "csv" => Format::Csv,
                "summary" | "summary-text" | "text" => Format::Summary,
                other => return Err(CliError::Usage(format!("unknown format `{other}`"))),
            });
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(CliError::Usage("no output format given".into()));
        }
        Ok(out)
    }
}

pub fn to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One line per verifier block plus an overall verdict.
pub fn to_summary(report: &RunReport) -> String {
    let mut s = format!(
        "scenario {} (seed {}, {} {})\n",
        report.scenario.name, report.seed, report.toolkit, report.version
    );
    for r in &report.results {
        s.push_str(&format!("{} [{}] {}: {}\n", r.status.label(), r.index, r.kind, r.headline));
    }
    s.push_str(&format!("overall: {}\n", report.status.label()));
    s
}

/// Flat table `index,kind,status,key,value` of every scalar in the
/// block details, keys as dotted paths.
pub fn to_results_csv(report: &RunReport) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row = |w: &mut csv::Writer<Vec<u8>>, cells: &[&str]| {
        w.write_record(cells).map_err(|e| CliError::Usage(e.to_string()))
    };
    row(&mut w, &["index", "kind", "status", "key", "value"])?;
    for r in &report.results {
        let mut flat = Vec::new();
        flatten("", &r.detail, &mut flat);
        for (k, v) in flat {
            row(&mut w, &[&r.index.to_string(), &r.kind, r.status.label(), &k, &v])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Number(n) => out.push((prefix.into(), n.as_f64().map(fmt_f64).unwrap_or_else(|| n.to_string()))),
        Value::Bool(b) => out.push((prefix.into(), b.to_string())),
        Value::String(s) => out.push((prefix.into(), s.clone())),
        Value::Null => out.push((prefix.into(), "null".into())),
    }
}

fn write(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Write the requested artifacts under `dir` with file stem `stem`:
/// `<stem>.json`, `<stem>.summary.txt`, `<stem>.results.csv` and one
/// `<stem>.<index>.<kind>.csv` per scan table.
pub fn emit_report(report: &RunReport, formats: &[Format], dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Json => write(dir.join(format!("{stem}.json")), to_json(report).as_bytes(), &mut written)?,
            Format::Summary => write(
                dir.join(format!("{stem}.summary.txt")),
                to_summary(report).as_bytes(),
                &mut written,
            )?,
            Format::Csv => {
                write(
                    dir.join(format!("{stem}.results.csv")),
                    to_results_csv(report)?.as_bytes(),
                    &mut written,
                )?;
                for r in &report.results {
                    for (t, table) in r.tables.iter().enumerate() {
                        let suffix = if r.tables.len() > 1 { format!(".{t}") } else { String::new() };
                        let path = dir.join(format!("{stem}.{}.{}{suffix}.csv", r.index, r.kind));
                        let mut buf = Vec::new();
                        table.write_csv(&mut buf).map_err(|e| CliError::Usage(e.to_string()))?;
                        write(path, &buf, &mut written)?;
                    }
                }
            }
        }
    }
    Ok(written)
}
