use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::CliError;

/// 17 significant digits; empty for a missing value.
pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

/// CSV assembled in memory so that nothing is written when a command fails.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

/// Writes the CSV (or prints it) and the JSON sidecar next to it.
pub fn emit(out: Option<&Path>, body: &str, meta: &Value) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, body).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
            let mut json = serde_json::to_string_pretty(meta).expect("metadata serializes");
            json.push('\n');
            let side = sidecar_path(path);
            fs::write(&side, json).map_err(|e| CliError::Output(format!("{}: {e}", side.display())))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}
