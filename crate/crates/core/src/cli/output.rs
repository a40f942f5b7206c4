//! Rendering of result documents. JSON objects use sorted keys and the
//! shortest round-trip float form, so equal inputs give identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde_json::{json, Value};

use super::config::{Format, ResolvedParams};
use crate::equilibrium::Assumption2Report;
use crate::error::Result;
use crate::network::Network;

pub fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn params_json(resolved: &ResolvedParams) -> Value {
    let p = &resolved.params;
    json!({
        "lambda": p.lambda,
        "lambda_fraction": resolved.lambda_fraction,
        "r": p.r,
        "sigma2": p.sigma2,
        "v": p.v,
    })
}

pub fn network_json(net: &Network) -> Value {
    json!({
        "n": net.size(),
        "directed": net.is_directed(),
        "edges": net.edge_count(),
        "spectral_radius": net.spectral_radius(),
    })
}

pub fn assumption2_json(report: &Assumption2Report) -> Value {
    serde_json::to_value(report).unwrap_or(Value::Null)
}

/// A table with `#`-prefixed metadata lines.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

pub enum Document {
    Json(Value),
    Table(Table),
    /// A structured result that also has a tabular view.
    Both { json: Value, table: Table },
}

impl Document {
    pub fn render(&self, format: Format) -> String {
        match (self, format) {
            (Document::Json(v), _) | (Document::Both { json: v, .. }, Format::Json) => {
                let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
                s.push('\n');
                s
            }
            (Document::Table(t), _) | (Document::Both { table: t, .. }, Format::Csv) => t.to_csv(),
        }
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
