//! Run reports: a JSON document plus the table printed for humans.

use serde::Serialize;
use serde_json::Value;

pub const REPORT_SCHEMA: &str = "ineqmn.report/1";

/// A rectangular table of preformatted cells.
///
/// The cells are stored in the report verbatim so that every number shown on
/// the terminal can be found in the JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Left-aligned first column, right-aligned numbers.
    pub fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.columns[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| -> String {
            cells
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{:<w$}", s, w = widths[c])
                    } else {
                        format!("{:>w$}", s, w = widths[c])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.columns);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

/// Formats a number for tables: four significant decimals, scientific
/// notation outside `[1e-4, 1e6)`.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NA".into() } else if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !(1e-4..1e6).contains(&a) {
        format!("{:.4e}", v)
    } else if a >= 100.0 {
        format!("{:.2}", v)
    } else {
        format!("{:.4}", v)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub seconds: f64,
}

/// Everything needed to reproduce a run. `timing` is the only field that
/// differs between identical invocations.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: String,
    pub seed: u64,
    pub model: Value,
    pub settings: Value,
    pub result: Value,
    pub table: Table,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// The report as JSON with the timing field removed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serialises");
        if let Value::Object(map) = &mut v {
            map.remove("timing");
        }
        serde_json::to_string_pretty(&v).expect("report serialises")
    }
}
