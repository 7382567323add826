//! CSV and JSON-lines output, plus a `record.json` manifest that carries the
//! config, digest and timing so a run directory can be read back.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{digest, Format, Kind};
use crate::error::{CliError, CliResult};
use crate::record::{Cell, RunRecord, Summary, Table};

pub const MANIFEST: &str = "record.json";

/// 17 significant digits, enough to round-trip any double.
fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "\"nan\"".into()
    } else if v > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

fn json_cell(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Num(v) => number(*v),
        Cell::Bool(v) => v.to_string(),
        Cell::Text(s) => serde_json::to_string(s).expect("strings serialize"),
    }
}

/// One JSON object per row, keys in column order, LF-terminated.
pub fn to_jsonl(t: &Table) -> String {
    let mut out = String::new();
    for row in &t.rows {
        out.push('{');
        for (k, (col, cell)) in t.columns.iter().zip(row).enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&serde_json::to_string(col).expect("strings serialize"));
            out.push(':');
            out.push_str(&json_cell(cell));
        }
        out.push_str("}\n");
    }
    out
}

pub fn to_csv(t: &Table) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Compute(format!("csv encoding of table {}: {e}", t.name));
    w.write_record(&t.columns).map_err(fail)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|c| match c {
            Cell::Num(v) if v.is_finite() => format!("{v:.16e}"),
            other => other.to_string(),
        }))
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Compute(format!("csv encoding of table {}: {e}", t.name)))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn parse_cell(v: &Value) -> Option<Cell> {
    Some(match v {
        Value::Bool(b) => Cell::Bool(*b),
        Value::Number(n) if n.is_i64() => Cell::Int(n.as_i64()?),
        Value::Number(n) => Cell::Num(n.as_f64()?),
        Value::String(s) => match s.as_str() {
            "nan" => Cell::Num(f64::NAN),
            "inf" => Cell::Num(f64::INFINITY),
            "-inf" => Cell::Num(f64::NEG_INFINITY),
            _ => Cell::Text(s.clone()),
        },
        _ => return None,
    })
}

/// Inverse of [`to_jsonl`] given the table's columns.
pub fn parse_jsonl(name: &str, columns: &[String], text: &str) -> CliResult<Table> {
    let mut t = Table::new(name, columns.iter().cloned());
    for (k, line) in text.lines().enumerate() {
        let bad = |m: String| CliError::Compute(format!("{name} line {}: {m}", k + 1));
        let obj: serde_json::Map<String, Value> = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if obj.len() != columns.len() {
            return Err(bad(format!("expected {} fields, found {}", columns.len(), obj.len())));
        }
        let row = columns
            .iter()
            .map(|c| {
                let v = obj.get(c).ok_or_else(|| bad(format!("missing field {c:?}")))?;
                parse_cell(v).ok_or_else(|| bad(format!("field {c:?} has an unsupported value")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        t.rows.push(row);
    }
    Ok(t)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn render(t: &Table, format: Format) -> CliResult<String> {
    match format {
        Format::Csv => to_csv(t),
        Format::Jsonl => Ok(to_jsonl(t)),
    }
}

/// Writes the summary, every trace table and the manifest into `dir`.
pub fn export(record: &RunRecord, dir: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    let summary = record.summary.to_table();
    let mut entries = Vec::new();
    for t in std::iter::once(&summary).chain(&record.tables) {
        let file = format!("{}.{}", t.name, format.extension());
        let path = dir.join(&file);
        write(&path, &render(t, format)?)?;
        entries.push(json!({ "name": t.name, "file": file, "columns": t.columns }));
        written.push(path);
    }
    let manifest = json!({
        "kind": record.kind.name(),
        "digest": record.digest,
        "seed": record.seed,
        "config": record.config,
        "format": format.extension(),
        "tables": entries,
        "warnings": record.warnings,
        "version": record.version,
        "wall_clock_seconds": record.wall_clock_seconds,
    });
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("json values serialize") + "\n";
    write(&path, &text)?;
    written.push(path);
    Ok(written)
}

/// Reads a JSON-lines run directory back into a record.
pub fn import(dir: &Path) -> CliResult<RunRecord> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let bad = |m: &str| CliError::Compute(format!("{}: {m}", path.display()));
    let m: Value = serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?;
    if m["format"] != "jsonl" {
        return Err(bad("only json-lines runs can be read back"));
    }
    let kind = Kind::ALL
        .into_iter()
        .find(|k| m["kind"] == k.name())
        .ok_or_else(|| bad("unknown scenario kind"))?;
    let mut summary = None;
    let mut tables = Vec::new();
    for e in m["tables"].as_array().ok_or_else(|| bad("missing table list"))? {
        let name = e["name"].as_str().ok_or_else(|| bad("table without a name"))?;
        let file = e["file"].as_str().ok_or_else(|| bad("table without a file"))?;
        let columns: Vec<String> = serde_json::from_value(e["columns"].clone()).map_err(|e| bad(&e.to_string()))?;
        let tpath = dir.join(file);
        let body = fs::read_to_string(&tpath).map_err(|e| CliError::io(&tpath, e))?;
        let t = parse_jsonl(name, &columns, &body)?;
        if name == "summary" {
            summary = Some(Summary::from_table(&t).ok_or_else(|| bad("malformed summary table"))?);
        } else {
            tables.push(t);
        }
    }
    let config = m["config"].clone();
    let stored = m["digest"].as_str().ok_or_else(|| bad("missing digest"))?.to_string();
    if digest(&config) != stored {
        return Err(bad("digest does not match the stored config"));
    }
    Ok(RunRecord {
        kind,
        digest: stored,
        seed: m["seed"].as_u64(),
        config,
        summary: summary.ok_or_else(|| bad("missing summary table"))?,
        tables,
        warnings: serde_json::from_value(m["warnings"].clone()).unwrap_or_default(),
        version: m["version"].as_str().unwrap_or_default().to_string(),
        wall_clock_seconds: m["wall_clock_seconds"].as_f64().unwrap_or(0.0),
    })
}
