//! Result rows and their CSV encoding.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str = "experiment,quantity,param,value,band,bound,pass";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub quantity: String,
    pub param: Option<f64>,
    pub value: f64,
    pub band: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn has_non_finite(&self) -> bool {
        self.rows.iter().any(|r| !r.value.is_finite())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.experiment,
                r.quantity,
                optional(r.param),
                number(r.value),
                optional(r.band),
                optional(r.bound),
                r.pass
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::invalid("output", e.to_string()))
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::invalid("csv", "missing or unexpected header"));
        }
        let field = |s: &str, line: usize| -> Result<Option<f64>> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| Error::invalid("csv", format!("line {line}: bad number `{s}`")))
        };
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let n = i + 2;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(Error::invalid("csv", format!("line {n}: expected 7 columns")));
            }
            rows.push(Row {
                experiment: cols[0].to_string(),
                quantity: cols[1].to_string(),
                param: field(cols[2], n)?,
                value: field(cols[3], n)?.ok_or_else(|| Error::invalid("csv", format!("line {n}: empty value")))?,
                band: field(cols[4], n)?,
                bound: field(cols[5], n)?,
                pass: match cols[6] {
                    "true" => true,
                    "false" => false,
                    other => return Err(Error::invalid("csv", format!("line {n}: bad pass flag `{other}`"))),
                },
            });
        }
        Ok(Self { rows })
    }
}

/// Whitespace-separated `param value [bound]` columns of one quantity, sorted
/// by parameter. Rows without a parameter are numbered in file order.
pub fn emit_plot_data(table: &ResultTable, quantity: &str) -> Result<String> {
    let mut rows: Vec<(f64, &Row)> = table
        .rows
        .iter()
        .filter(|r| r.quantity == quantity)
        .enumerate()
        .map(|(i, r)| (r.param.unwrap_or(i as f64), r))
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid("quantity", format!("no rows named `{quantity}`")));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let with_bound = rows.iter().all(|(_, r)| r.bound.is_some());
    let mut out = String::new();
    for (x, r) in rows {
        match (with_bound, r.bound) {
            (true, Some(b)) => writeln!(out, "{} {} {}", number(x), number(r.value), number(b)),
            _ => writeln!(out, "{} {}", number(x), number(r.value)),
        }
        .expect("writing to a string");
    }
    Ok(out)
}
