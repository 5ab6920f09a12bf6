use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::model::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    /// One-hot encoded in the declared category order.
    Categorical { categories: Vec<String> },
    /// Present in the file but not used.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

fn default_na_values() -> Vec<String> {
    ["", "NA", "N/A", "NaN", "nan", "?"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_true() -> bool {
    true
}

/// Description of a CSV dataset. `columns` lists every column of the file
/// in order, the target included (its `type` is ignored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    pub task: Task,
    /// Label strings for classification targets; position is the class index.
    #[serde(default)]
    pub target_classes: Option<Vec<String>>,
    #[serde(default = "default_na_values")]
    pub na_values: Vec<String>,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Rows whose feature cells all equal this token are skipped.
    #[serde(default)]
    pub drop_rows_if_all: Option<String>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SpamError::io(path, e))?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.check()?;
        Ok(schema)
    }

    pub fn check(&self) -> Result<()> {
        let hits = self.columns.iter().filter(|c| c.name == self.target).count();
        if hits != 1 {
            return Err(SpamError::Schema(format!(
                "target `{}` must appear exactly once among the columns",
                self.target
            )));
        }
        match (self.task, &self.target_classes) {
            (Task::Regression, _) => {}
            (Task::Binary, Some(c)) if c.len() == 2 => {}
            (Task::Multiclass, Some(c)) if c.len() >= 2 => {}
            _ => {
                return Err(SpamError::Schema(
                    "classification tasks need `target_classes` (exactly 2 for binary)".into(),
                ))
            }
        }
        for c in &self.columns {
            if let ColumnKind::Categorical { categories } = &c.kind {
                if categories.is_empty() {
                    return Err(SpamError::Schema(format!(
                        "categorical column `{}` declares no categories",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.target_classes.as_ref().map_or(1, |c| c.len())
    }

    /// Names of the encoded feature columns.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            if c.name == self.target {
                continue;
            }
            match &c.kind {
                ColumnKind::Numeric => out.push(c.name.clone()),
                ColumnKind::Categorical { categories } => {
                    out.extend(categories.iter().map(|v| format!("{}={v}", c.name)))
                }
                ColumnKind::Ignore => {}
            }
        }
        out
    }
}

/// Encoded features and targets before any normalization. Class targets
/// are stored as their integer index.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
    pub task: Task,
    pub num_classes: usize,
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| SpamError::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(input: R, schema: &Schema) -> Result<RawTable> {
    schema.check()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .from_reader(input);
    if schema.has_header {
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let want: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        if header != want {
            return Err(SpamError::Schema(format!(
                "header {header:?} does not match schema columns {want:?}"
            )));
        }
    }
    let na: Vec<&str> = schema.na_values.iter().map(String::as_str).collect();
    let class_index: HashMap<&str, usize> = schema
        .target_classes
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let feature_names = schema.feature_names();
    let width = feature_names.len();
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut row_values = Vec::with_capacity(width);

    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != schema.columns.len() {
            return Err(SpamError::Parse {
                row,
                column: String::new(),
                message: format!(
                    "expected {} fields, found {}",
                    schema.columns.len(),
                    record.len()
                ),
            });
        }
        if let Some(token) = &schema.drop_rows_if_all {
            let all = schema
                .columns
                .iter()
                .zip(record.iter())
                .filter(|(c, _)| c.name != schema.target && c.kind != ColumnKind::Ignore)
                .all(|(_, v)| v == token);
            if all {
                continue;
            }
        }
        row_values.clear();
        let mut target = None;
        for (col, cell) in schema.columns.iter().zip(record.iter()) {
            if col.kind == ColumnKind::Ignore && col.name != schema.target {
                continue;
            }
            if na.contains(&cell) {
                return Err(SpamError::MissingValue {
                    row,
                    column: col.name.clone(),
                });
            }
            if col.name == schema.target {
                target = Some(if schema.task == Task::Regression {
                    parse_number(cell, row, &col.name)?
                } else {
                    *class_index.get(cell).ok_or_else(|| SpamError::UnknownCategory {
                        row,
                        column: col.name.clone(),
                        value: cell.to_string(),
                    })? as f64
                });
                continue;
            }
            match &col.kind {
                ColumnKind::Numeric => row_values.push(parse_number(cell, row, &col.name)?),
                ColumnKind::Categorical { categories } => {
                    let pos = categories.iter().position(|c| c == cell).ok_or_else(|| {
                        SpamError::UnknownCategory {
                            row,
                            column: col.name.clone(),
                            value: cell.to_string(),
                        }
                    })?;
                    for k in 0..categories.len() {
                        row_values.push(if k == pos { 1.0 } else { 0.0 });
                    }
                }
                ColumnKind::Ignore => {}
            }
        }
        data.extend_from_slice(&row_values);
        targets.push(target.expect("target column present"));
    }
    let rows = targets.len();
    Ok(RawTable {
        features: Matrix::from_vec(rows, width, data)?,
        targets,
        feature_names,
        task: schema.task,
        num_classes: schema.num_classes(),
    })
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| SpamError::Parse {
        row,
        column: column.to_string(),
        message: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(SpamError::Parse {
            row,
            column: column.to_string(),
            message: format!("`{cell}` is not finite"),
        });
    }
    Ok(v)
}
