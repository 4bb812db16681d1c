//! Machine-readable result tables: CSV with a `#`-prefixed metadata block.
//!
//! Numbers are written in Rust's shortest round-trip form, so files are
//! byte-identical across runs of the same configuration and seed, and every
//! table can be checked against its own column schema.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Column layout of one table kind.
#[derive(Debug, Clone, Copy)]
pub struct TableSchema {
    pub name: &'static str,
    pub columns: &'static [&'static str],
}

pub const TRAJECTORY: TableSchema = TableSchema {
    name: "trajectory",
    columns: &[
        "photon_index",
        "jz_mean",
        "jz_var",
        "jx",
        "jy",
        "jsq",
        "n1",
        "n2",
        "n_scatt",
        "jz_calc",
    ],
};

pub const ENSEMBLE: TableSchema = TableSchema {
    name: "ensemble",
    columns: &[
        "photon_index",
        "mean_jz_var",
        "var_jz_var",
        "mean_jx",
        "var_jx",
        "mean_jy",
        "var_jy",
        "mean_jsq",
        "var_jsq",
        "mean_sqdev_jzcalc",
        "var_sqdev_jzcalc",
        "jzcalc_count",
        "histories",
    ],
};

pub const SUMMARY: TableSchema = TableSchema {
    name: "summary",
    columns: &[
        "history",
        "stream",
        "n1",
        "n2",
        "n_scatt",
        "jz_mean",
        "jz_var",
        "jx",
        "jy",
        "jsq",
        "jz_calc",
    ],
};

pub const PREDICTIONS: TableSchema = TableSchema {
    name: "predictions",
    columns: &["regime", "quantity", "published", "derived", "note"],
};

pub const DENSE_SUMMARY: TableSchema = TableSchema {
    name: "dense_summary",
    columns: &["quantity", "value"],
};

pub const DENSE_MODES: TableSchema = TableSchema {
    name: "dense_modes",
    columns: &[
        "ix",
        "iy",
        "iz",
        "kx",
        "ky",
        "kz",
        "delta_omega",
        "n_sc",
        "posterior_rms",
        "width_estimate",
    ],
};

pub const DENSE_RADIAL: TableSchema = TableSchema {
    name: "dense_radial",
    columns: &["radius", "prior_density", "posterior_density"],
};

pub const SWEEP: TableSchema = TableSchema {
    name: "sweep",
    columns: &[
        "parameter",
        "value",
        "xi_interferometer",
        "xi_small_cloud",
        "xi_dilute",
        "xi_dense",
        "width_interferometer",
        "width_scattering",
    ],
};

/// One table cell; numeric cells print in shortest round-trip form.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Uint(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Uint(v) => v.to_string(),
            Cell::Float(v) => format!("{v}"),
            Cell::Text(s) => {
                debug_assert!(!s.contains(','), "text cells must not contain commas");
                s.clone()
            }
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Uint(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// A fully assembled table ready for rendering or writing.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub schema: TableSchema,
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(schema: TableSchema, metadata: Vec<(String, String)>) -> Self {
        Self {
            schema,
            metadata,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.schema.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.metadata {
            let _ = writeln!(out, "# {key} = {value}");
        }
        let _ = writeln!(out, "{}", self.schema.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Writes the table to `<dir>/<name>.csv`, re-validating the rendering.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let rendered = self.render();
        validate_table(&rendered, &self.schema)?;
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.schema.name));
        std::fs::write(&path, rendered)?;
        Ok(path)
    }
}

/// Checks a rendered table against its schema: metadata block first, exact
/// header, constant row arity, and numeric cells that parse (text is allowed
/// only in columns whose header suggests it).
pub fn validate_table(content: &str, schema: &TableSchema) -> Result<()> {
    let mut lines = content.lines().peekable();
    while let Some(line) = lines.peek() {
        if line.starts_with('#') {
            lines.next();
        } else {
            break;
        }
    }
    let header = lines
        .next()
        .ok_or_else(|| Error::Io(format!("{}: missing header row", schema.name)))?;
    let expected = schema.columns.join(",");
    if header != expected {
        return Err(Error::Io(format!(
            "{}: header `{header}` does not match schema `{expected}`",
            schema.name
        )));
    }
    let text_columns = ["regime", "quantity", "note", "parameter"];
    for (ix, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != schema.columns.len() {
            return Err(Error::Io(format!(
                "{}: row {ix} has {} cells, expected {}",
                schema.name,
                cells.len(),
                schema.columns.len()
            )));
        }
        for (column, cell) in schema.columns.iter().zip(&cells) {
            if cell.is_empty() || text_columns.contains(column) {
                continue;
            }
            if cell.parse::<f64>().is_err() {
                return Err(Error::Io(format!(
                    "{}: row {ix} column {column}: `{cell}` is not numeric",
                    schema.name
                )));
            }
        }
    }
    Ok(())
}

/// Standard metadata block shared by all outputs.
pub fn standard_metadata(command: &str, config_hash: u64, seed: u64) -> Vec<(String, String)> {
    vec![
        ("tool".into(), format!("squeeze-sim {}", env!("CARGO_PKG_VERSION"))),
        ("command".into(), command.into()),
        ("config_hash".into(), format!("{config_hash:016x}")),
        ("seed".into(), seed.to_string()),
    ]
}
