//! Output envelopes shared by every subcommand.
//!
//! JSON outputs wrap their payload in a [`RunReport`]. CSV outputs start with
//! `#` comment lines that carry the same metadata, so each file can be traced
//! to the spec that produced it.

use serde::Serialize;
use serde_json::Value;

pub const TOOL: &str = "met-dgldpc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Bumped whenever a JSON or CSV layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub spec_digest: String,
    pub subcommand: String,
    pub parameters: Value,
    pub results: T,
    pub duration_seconds: f64,
}

impl<T: Serialize> RunReport<T> {
    pub fn new(spec_digest: &str, subcommand: &str, parameters: Value, results: T) -> Self {
        RunReport {
            tool: TOOL,
            version: VERSION,
            schema_version: SCHEMA_VERSION,
            spec_digest: spec_digest.to_string(),
            subcommand: subcommand.to_string(),
            parameters,
            results,
            duration_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// A CSV table with a metadata preamble.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, key: &str, value: impl ToString) {
        self.comments.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Adds the standard preamble: tool, schema, subcommand, digest, parameters.
    pub fn with_preamble(
        mut self,
        spec_digest: &str,
        subcommand: &str,
        parameters: &Value,
    ) -> Self {
        let mut front = vec![
            ("tool".to_string(), format!("{TOOL} {VERSION}")),
            ("schema_version".to_string(), SCHEMA_VERSION.to_string()),
            ("subcommand".to_string(), subcommand.to_string()),
            ("spec_digest".to_string(), spec_digest.to_string()),
            ("parameters".to_string(), parameters.to_string()),
        ];
        front.append(&mut self.comments);
        self.comments = front;
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.comments {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        "nan".into()
    }
}
