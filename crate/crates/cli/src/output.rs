//! Deterministic result files: CSV with `#`-prefixed metadata comments, or a
//! JSON mirror of the same table.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// (key, value) metadata emitted as comment lines / JSON fields.
    pub metadata: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn config_hash(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn standard_metadata(table: &mut Table, config_text: &str, seed: Option<u64>) {
    table.meta("version", env!("CARGO_PKG_VERSION"));
    table.meta("config_sha256", config_hash(config_text));
    if let Some(s) = seed {
        table.meta("seed", s);
    }
}

fn to_csv(table: &Table) -> String {
    let mut out = String::new();
    for (k, v) in &table.metadata {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn to_json(table: &Table) -> String {
    let meta: serde_json::Map<String, serde_json::Value> = table
        .metadata
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: serde_json::Map<String, serde_json::Value> = table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.clone(), serde_json::Value::String(v.clone())))
                .collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    let doc = serde_json::json!({
        "metadata": serde_json::Value::Object(meta),
        "columns": table.columns,
        "rows": rows,
    });
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

/// Write the table as `<out_dir>/<stem>.<ext>`; returns the path.
pub fn write_table(table: &Table, out_dir: &Path, stem: &str, format: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let (ext, body) = match format {
        "json" => ("json", to_json(table)),
        _ => ("csv", to_csv(table)),
    };
    let path = out_dir.join(format!("{stem}.{ext}"));
    fs::write(&path, body)?;
    Ok(path)
}

/// Minimal CSV reader for `compare`: skips `#` comments, returns
/// (columns, numeric rows).
pub fn read_csv(path: &Path) -> std::io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "empty file"))?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for line in lines {
        let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad number: {e}"))
        })?);
    }
    Ok((columns, rows))
}
