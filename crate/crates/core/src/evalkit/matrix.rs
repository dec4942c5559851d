use serde::{Deserialize, Serialize};

use super::{EvalError, MetricsReport};
use crate::promptkit::{prompt_matrix, Clause, PromptSpec};

/// One accuracy observation for a `(model, prompt)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCell {
    pub model: String,
    pub prompt_id: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMatrixRow {
    pub model: String,
    /// One entry per column of [`PromptMatrix::columns`].
    pub cells: Vec<Option<f64>>,
    /// Mean accuracy of the +U/+UC cells minus mean of the base cells, in
    /// percentage points.
    pub mean_gain_points: Option<f64>,
}

/// Model × prompt accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<PromptMatrixRow>,
}

/// Builds the table: rows in first-appearance order of models, columns in
/// matrix order. A repeated cell keeps its last value.
pub fn prompt_matrix_report(cells: &[PromptCell]) -> Result<PromptMatrix, EvalError> {
    if cells.is_empty() {
        return Err(EvalError::EmptyInput("prompt_matrix_report"));
    }
    let specs = prompt_matrix();
    let mut rows: Vec<PromptMatrixRow> = Vec::new();
    for cell in cells {
        let spec: PromptSpec = cell
            .prompt_id
            .parse()
            .map_err(|_| EvalError::UnknownPrompt(cell.prompt_id.clone()))?;
        let col = specs.iter().position(|s| *s == spec).expect("matrix covers every spec");
        let row = match rows.iter().position(|r| r.model == cell.model) {
            Some(i) => &mut rows[i],
            None => {
                rows.push(PromptMatrixRow {
                    model: cell.model.clone(),
                    cells: vec![None; specs.len()],
                    mean_gain_points: None,
                });
                rows.last_mut().expect("just pushed")
            }
        };
        row.cells[col] = Some(cell.accuracy);
    }
    for row in &mut rows {
        let mean_of = |want_base: bool| {
            let vals: Vec<f64> = specs
                .iter()
                .zip(&row.cells)
                .filter(|(s, _)| (s.clause == Clause::Base) == want_base)
                .filter_map(|(_, v)| *v)
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        row.mean_gain_points = match (mean_of(true), mean_of(false)) {
            (Some(base), Some(clauses)) => Some((clauses - base) * 100.0),
            _ => None,
        };
    }
    Ok(PromptMatrix {
        columns: specs.iter().map(PromptSpec::id).collect(),
        rows,
    })
}

/// Cells from metrics reports whose slice names both a model and a prompt.
pub fn cells_from_reports(reports: &[MetricsReport]) -> Vec<PromptCell> {
    reports
        .iter()
        .filter_map(|r| {
            let slice = r.slice.as_ref()?;
            Some(PromptCell {
                model: slice.model.clone()?,
                prompt_id: slice.prompt_id.clone()?,
                accuracy: r.accuracy,
            })
        })
        .collect()
}
