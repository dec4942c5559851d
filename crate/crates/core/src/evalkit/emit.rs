use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CategoryAccuracy, CellMedians, EvalError, MetricsReport, PromptMatrix, VenueAccuracy};

/// Decimal places in table cells (category, venue, matrix, median tables).
pub const TABLE_DECIMALS: usize = 2;
/// Decimal places in metric files and every JSON document.
pub const METRIC_DECIMALS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

/// Everything from one run in a single document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest: serde_json::Value,
    #[serde(default)]
    pub metrics: Vec<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<CategoryAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venues: Option<VenueAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medians: Option<CellMedians>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_matrix: Option<PromptMatrix>,
}

/// A report that can be emitted.
#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Metrics(&'a [MetricsReport]),
    Categories(&'a CategoryAccuracy),
    Venues(&'a VenueAccuracy),
    Medians(&'a CellMedians),
    PromptMatrix(&'a PromptMatrix),
    Bundle(&'a RunReport),
}

enum Cell {
    Text(String),
    Int(u64),
    Real(Option<f64>),
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<Cell>>,
    decimals: usize,
}

impl Table {
    fn render_cell(&self, cell: &Cell) -> String {
        match cell {
            Cell::Text(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Real(Some(x)) => format!("{:.*}", self.decimals, x),
            Cell::Real(None) => String::new(),
        }
    }

    fn csv(&self) -> Result<Vec<u8>, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| self.render_cell(c)))?;
        }
        w.into_inner().map_err(|e| EvalError::Emit(e.to_string()))
    }

    fn markdown(&self) -> Vec<u8> {
        let mut out = String::new();
        let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
        out.push_str(&line(self.headers.clone()));
        let _ = writeln!(out, "|{}", "---|".repeat(self.headers.len()));
        for row in &self.rows {
            out.push_str(&line(
                row.iter().map(|c| self.render_cell(c).replace('|', "\\|")).collect(),
            ));
        }
        out.into_bytes()
    }
}

fn metrics_table(reports: &[MetricsReport]) -> Table {
    Table {
        headers: ["slice", "tp", "fp", "fn", "tn", "accuracy", "precision", "recall", "f1"]
            .map(String::from)
            .to_vec(),
        rows: reports
            .iter()
            .map(|r| {
                vec![
                    Cell::Text(r.slice.as_ref().map(|s| s.label()).unwrap_or_default()),
                    Cell::Int(r.counts.tp),
                    Cell::Int(r.counts.fp),
                    Cell::Int(r.counts.fn_),
                    Cell::Int(r.counts.tn),
                    Cell::Real(Some(r.accuracy)),
                    Cell::Real(r.precision),
                    Cell::Real(r.recall),
                    Cell::Real(r.f1),
                ]
            })
            .collect(),
        decimals: METRIC_DECIMALS,
    }
}

fn category_table(acc: &CategoryAccuracy) -> Table {
    Table {
        headers: ["category", "n", "accuracy"].map(String::from).to_vec(),
        rows: acc
            .rows
            .iter()
            .chain([&acc.none, &acc.overall])
            .map(|r| vec![Cell::Text(r.category.clone()), Cell::Int(r.n), Cell::Real(r.accuracy)])
            .collect(),
        decimals: TABLE_DECIMALS,
    }
}

fn venue_table(acc: &VenueAccuracy) -> Table {
    let mut rows: Vec<Vec<Cell>> = acc
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::Text(r.venue.clone()),
                Cell::Int(r.num_papers),
                Cell::Real(Some(r.accuracy)),
            ]
        })
        .collect();
    rows.push(vec![
        Cell::Text("Overall".into()),
        Cell::Int(acc.total_papers),
        Cell::Real(Some(acc.overall)),
    ]);
    Table {
        headers: ["venue", "num_papers", "accuracy"].map(String::from).to_vec(),
        rows,
        decimals: TABLE_DECIMALS,
    }
}

fn medians_table(m: &CellMedians) -> Table {
    let rows = [
        ("TP", m.counts.tp, m.tp),
        ("FP", m.counts.fp, m.fp),
        ("TN", m.counts.tn, m.tn),
        ("FN", m.counts.fn_, m.fn_),
    ]
    .into_iter()
    .map(|(cell, n, med)| vec![Cell::Text(cell.into()), Cell::Int(n), Cell::Real(med)])
    .collect();
    Table {
        headers: ["cell", "n", "median_probability"].map(String::from).to_vec(),
        rows,
        decimals: TABLE_DECIMALS,
    }
}

fn matrix_table(m: &PromptMatrix) -> Table {
    let mut headers = vec!["model".to_string()];
    headers.extend(m.columns.iter().cloned());
    headers.push("mean_gain_points".into());
    Table {
        headers,
        rows: m
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![Cell::Text(r.model.clone())];
                row.extend(r.cells.iter().map(|c| Cell::Real(*c)));
                row.push(Cell::Real(r.mean_gain_points));
                row
            })
            .collect(),
        decimals: TABLE_DECIMALS,
    }
}

/// Rounds every non-integer number in a JSON tree to `places` decimals.
fn round_json(value: &mut serde_json::Value, places: i32) {
    match value {
        serde_json::Value::Number(n) if n.is_f64() => {
            let scale = 10f64.powi(places);
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = serde_json::Number::from_f64((x * scale).round() / scale) {
                *n = r;
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(|v| round_json(v, places)),
        serde_json::Value::Object(map) => map.values_mut().for_each(|v| round_json(v, places)),
        _ => {}
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, EvalError> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v, METRIC_DECIMALS as i32);
    let mut bytes = serde_json::to_vec_pretty(&v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Serializes a report. Output bytes depend only on the report contents.
pub fn emit_report(report: Report<'_>, format: Format) -> Result<Vec<u8>, EvalError> {
    if format == Format::Json {
        return match report {
            Report::Metrics(r) if r.len() == 1 => json(&r[0]),
            Report::Metrics(r) => json(r),
            Report::Categories(r) => json(r),
            Report::Venues(r) => json(r),
            Report::Medians(r) => json(r),
            Report::PromptMatrix(r) => json(r),
            Report::Bundle(r) => json(r),
        };
    }
    let table = match report {
        Report::Metrics(r) => metrics_table(r),
        Report::Categories(r) => category_table(r),
        Report::Venues(r) => venue_table(r),
        Report::Medians(r) => medians_table(r),
        Report::PromptMatrix(r) => matrix_table(r),
        Report::Bundle(_) => return Err(EvalError::UnsupportedFormat("run bundles are JSON only")),
    };
    match format {
        Format::Csv => table.csv(),
        Format::Markdown => Ok(table.markdown()),
        Format::Json => unreachable!("handled above"),
    }
}
