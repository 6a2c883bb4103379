//! Typed column-oriented tabular data: CSV ingestion, schema handling, fold
//! splitting, and column permutation.
//!
//! A [`Dataset`] is immutable after construction; every mutation-like
//! operation returns a new dataset, so values can be shared freely across
//! threads.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RapidError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ColumnKind {
    Categorical { levels: Vec<String> },
    Continuous,
}

impl ColumnKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "qi")]
    QuasiIdentifier,
    #[serde(rename = "sensitive")]
    Sensitive,
    #[serde(rename = "unused")]
    Unused,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
    #[serde(default = "default_role")]
    pub role: Role,
}

fn default_role() -> Role {
    Role::Unused
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnDef>,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut n_sensitive = 0;
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(RapidError::Schema(format!(
                    "duplicate column name {:?}",
                    col.name
                )));
            }
            if col.role == Role::Sensitive {
                n_sensitive += 1;
            }
            if let ColumnKind::Categorical { levels } = &col.kind {
                if levels.is_empty() {
                    return Err(RapidError::Schema(format!(
                        "column {:?} has an empty level set",
                        col.name
                    )));
                }
                let distinct: HashSet<&str> = levels.iter().map(String::as_str).collect();
                if distinct.len() != levels.len() {
                    return Err(RapidError::Schema(format!(
                        "column {:?} has duplicate levels",
                        col.name
                    )));
                }
            }
        }
        if n_sensitive > 1 {
            return Err(RapidError::Schema(
                "more than one column has role \"sensitive\"".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Schema> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text)
            .map_err(|e| RapidError::Schema(format!("schema JSON: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// Column storage. Categorical cells hold level indices; `None` marks a
/// missing value in either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical(Vec<Option<u32>>),
    Continuous(Vec<Option<f64>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, i: usize) -> bool {
        match self {
            ColumnData::Categorical(v) => v[i].is_none(),
            ColumnData::Continuous(v) => v[i].is_none(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    n: usize,
    columns: Vec<ColumnData>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// Per-record fold index in `[0, k)`.
    pub assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn complement_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<ColumnData>) -> Result<Dataset> {
        schema.validate()?;
        if schema.columns.len() != columns.len() {
            return Err(RapidError::Schema(format!(
                "schema has {} columns but {} column vectors were supplied",
                schema.columns.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, ColumnData::len);
        for (def, col) in schema.columns.iter().zip(&columns) {
            if col.len() != n {
                return Err(RapidError::Schema(format!(
                    "column {:?} has length {} (expected {n})",
                    def.name,
                    col.len()
                )));
            }
            match (&def.kind, col) {
                (ColumnKind::Categorical { levels }, ColumnData::Categorical(vals)) => {
                    let n_levels = levels.len() as u32;
                    if vals.iter().flatten().any(|&v| v >= n_levels) {
                        return Err(RapidError::Schema(format!(
                            "column {:?} contains a level index out of range",
                            def.name
                        )));
                    }
                }
                (ColumnKind::Continuous, ColumnData::Continuous(_)) => {}
                _ => {
                    return Err(RapidError::Schema(format!(
                        "column {:?}: kind and storage disagree",
                        def.name
                    )))
                }
            }
        }
        Ok(Dataset { schema, n, columns })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&ColumnData> {
        let idx = self
            .schema
            .column_index(name)
            .ok_or_else(|| RapidError::UnknownColumn(name.to_string()))?;
        Ok(&self.columns[idx])
    }

    pub fn column_def(&self, name: &str) -> Result<&ColumnDef> {
        self.schema
            .column(name)
            .ok_or_else(|| RapidError::UnknownColumn(name.to_string()))
    }

    /// Loads an RFC-4180 style CSV (header row required, empty cells missing).
    ///
    /// Without a schema, kinds are inferred: a column whose non-missing cells
    /// all parse as numbers becomes continuous, everything else categorical
    /// with levels in first-appearance order.
    pub fn load_csv(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<Dataset> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if text.trim().is_empty() {
            return Err(RapidError::EmptyFile(path.display().to_string()));
        }
        Self::parse_csv(&text, schema, &path.display().to_string())
    }

    pub fn parse_csv(text: &str, schema: Option<&Schema>, origin: &str) -> Result<Dataset> {
        if text.trim().is_empty() {
            return Err(RapidError::EmptyFile(origin.to_string()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        if let Some(schema) = schema {
            let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
            let got: Vec<&str> = header.iter().map(String::as_str).collect();
            if expected != got {
                return Err(RapidError::Schema(format!(
                    "CSV header {got:?} does not match schema columns {expected:?}"
                )));
            }
        }
        let mut rows: Vec<Vec<String>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        match schema {
            Some(schema) => Self::from_cells(schema.clone(), &rows),
            None => {
                let schema = infer_schema(&header, &rows);
                Self::from_cells(schema, &rows)
            }
        }
    }

    fn from_cells(schema: Schema, rows: &[Vec<String>]) -> Result<Dataset> {
        let n = rows.len();
        let mut columns = Vec::with_capacity(schema.columns.len());
        for (j, def) in schema.columns.iter().enumerate() {
            match &def.kind {
                ColumnKind::Categorical { levels } => {
                    let mut vals = Vec::with_capacity(n);
                    for row in rows {
                        let cell = row[j].as_str();
                        if cell.is_empty() {
                            vals.push(None);
                        } else {
                            let idx = levels.iter().position(|l| l == cell).ok_or_else(|| {
                                RapidError::UnknownLevel {
                                    column: def.name.clone(),
                                    value: cell.to_string(),
                                }
                            })?;
                            vals.push(Some(idx as u32));
                        }
                    }
                    columns.push(ColumnData::Categorical(vals));
                }
                ColumnKind::Continuous => {
                    let mut vals = Vec::with_capacity(n);
                    for (i, row) in rows.iter().enumerate() {
                        let cell = row[j].as_str();
                        if cell.is_empty() {
                            vals.push(None);
                        } else {
                            let v: f64 = cell.parse().map_err(|_| RapidError::MalformedCsv {
                                line: i as u64 + 2,
                                message: format!(
                                    "cell {cell:?} in continuous column {:?} is not numeric",
                                    def.name
                                ),
                            })?;
                            vals.push(Some(v));
                        }
                    }
                    columns.push(ColumnData::Continuous(vals));
                }
            }
        }
        Dataset::new(schema, columns)
    }

    /// Writes the dataset back to CSV. Reals use the shortest round-trip
    /// decimal representation; missing cells are written as empty strings.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        let header: Vec<&str> = self.schema.columns.iter().map(|c| c.name.as_str()).collect();
        writer.write_record(&header).expect("in-memory write");
        for i in 0..self.n {
            let mut row = Vec::with_capacity(self.columns.len());
            for (def, col) in self.schema.columns.iter().zip(&self.columns) {
                row.push(match col {
                    ColumnData::Categorical(v) => match v[i] {
                        Some(idx) => match &def.kind {
                            ColumnKind::Categorical { levels } => levels[idx as usize].clone(),
                            ColumnKind::Continuous => unreachable!(),
                        },
                        None => String::new(),
                    },
                    ColumnData::Continuous(v) => match v[i] {
                        Some(x) => {
                            let mut s = String::new();
                            write!(s, "{x}").unwrap();
                            s
                        }
                        None => String::new(),
                    },
                });
            }
            writer.write_record(&row).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory write")).unwrap());
        out
    }

    /// Deterministic k-fold split. With `stratify_by`, per-fold class counts of
    /// the stratification column differ from an even allocation by at most one
    /// record per class per fold.
    pub fn split_folds(
        &self,
        k: usize,
        stratify_by: Option<&str>,
        rng_seed: u64,
    ) -> Result<FoldAssignment> {
        if k < 2 || k > self.n {
            return Err(RapidError::InvalidK { k, n: self.n });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut assignment = vec![0_usize; self.n];
        match stratify_by {
            None => {
                let mut order: Vec<usize> = (0..self.n).collect();
                order.shuffle(&mut rng);
                for (pos, &rec) in order.iter().enumerate() {
                    assignment[rec] = pos % k;
                }
            }
            Some(name) => {
                let def = self.column_def(name)?;
                if !def.kind.is_categorical() {
                    return Err(RapidError::Schema(format!(
                        "stratification column {name:?} must be categorical"
                    )));
                }
                let ColumnData::Categorical(vals) = self.column(name)? else {
                    unreachable!()
                };
                // Group records by class (missing treated as its own class),
                // shuffle within groups, then deal round-robin with a cursor
                // that continues across classes so total fold sizes balance.
                let ColumnKind::Categorical { levels } = &def.kind else {
                    unreachable!()
                };
                let n_groups = levels.len() + 1;
                let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
                for (i, v) in vals.iter().enumerate() {
                    let g = v.map_or(n_groups - 1, |idx| idx as usize);
                    groups[g].push(i);
                }
                let mut cursor = 0_usize;
                for group in &mut groups {
                    group.shuffle(&mut rng);
                    for &rec in group.iter() {
                        assignment[rec] = cursor % k;
                        cursor += 1;
                    }
                }
            }
        }
        Ok(FoldAssignment { k, assignment })
    }

    /// Returns a copy with the named column's values uniformly permuted.
    pub fn permute_column(&self, column: &str, rng_seed: u64) -> Result<Dataset> {
        let idx = self
            .schema
            .column_index(column)
            .ok_or_else(|| RapidError::UnknownColumn(column.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut out = self.clone();
        match &mut out.columns[idx] {
            ColumnData::Categorical(v) => v.shuffle(&mut rng),
            ColumnData::Continuous(v) => v.shuffle(&mut rng),
        }
        Ok(out)
    }

    /// Row subset in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                ColumnData::Categorical(v) => {
                    ColumnData::Categorical(indices.iter().map(|&i| v[i]).collect())
                }
                ColumnData::Continuous(v) => {
                    ColumnData::Continuous(indices.iter().map(|&i| v[i]).collect())
                }
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            n: indices.len(),
            columns,
        }
    }

    /// Replaces the data of one column, keeping the schema.
    pub fn with_column_data(&self, column: &str, data: ColumnData) -> Result<Dataset> {
        let idx = self
            .schema
            .column_index(column)
            .ok_or_else(|| RapidError::UnknownColumn(column.to_string()))?;
        if data.len() != self.n {
            return Err(RapidError::LengthMismatch(format!(
                "replacement column has length {}, dataset has {}",
                data.len(),
                self.n
            )));
        }
        let mut out = self.clone();
        out.columns[idx] = data;
        Ok(out)
    }

    /// Remaps a categorical column onto a superset level list.
    pub fn with_levels(&self, column: &str, new_levels: Vec<String>) -> Result<Dataset> {
        let idx = self
            .schema
            .column_index(column)
            .ok_or_else(|| RapidError::UnknownColumn(column.to_string()))?;
        let ColumnKind::Categorical { levels } = &self.schema.columns[idx].kind else {
            return Err(RapidError::Schema(format!(
                "column {column:?} is not categorical"
            )));
        };
        let map: Vec<u32> = levels
            .iter()
            .map(|l| {
                new_levels
                    .iter()
                    .position(|nl| nl == l)
                    .map(|p| p as u32)
                    .ok_or_else(|| {
                        RapidError::Schema(format!(
                            "new level list for {column:?} is missing level {l:?}"
                        ))
                    })
            })
            .collect::<Result<_>>()?;
        let ColumnData::Categorical(vals) = &self.columns[idx] else {
            unreachable!()
        };
        let remapped = vals.iter().map(|v| v.map(|i| map[i as usize])).collect();
        let mut out = self.clone();
        out.schema.columns[idx].kind = ColumnKind::Categorical { levels: new_levels };
        out.columns[idx] = ColumnData::Categorical(remapped);
        Ok(out)
    }
}

fn csv_err(e: csv::Error) -> RapidError {
    let line = match e.position() {
        Some(pos) => pos.line(),
        None => 0,
    };
    RapidError::MalformedCsv {
        line,
        message: e.to_string(),
    }
}

fn infer_schema(header: &[String], rows: &[Vec<String>]) -> Schema {
    let columns = header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let all_numeric = rows
                .iter()
                .map(|r| r[j].as_str())
                .filter(|c| !c.is_empty())
                .all(|c| c.parse::<f64>().is_ok());
            let kind = if all_numeric {
                ColumnKind::Continuous
            } else {
                let mut levels: Vec<String> = Vec::new();
                for row in rows {
                    let cell = row[j].as_str();
                    if !cell.is_empty() && !levels.iter().any(|l| l == cell) {
                        levels.push(cell.to_string());
                    }
                }
                if levels.is_empty() {
                    levels.push(String::new()); // unreachable in practice
                }
                ColumnKind::Categorical { levels }
            };
            ColumnDef {
                name: name.clone(),
                kind,
                role: Role::Unused,
            }
        })
        .collect();
    Schema { columns }
}

/// Unions the level lists of a shared categorical column across two datasets
/// and remaps both so they use one level space. Original levels come first,
/// then levels only seen in the second dataset.
pub fn union_levels(a: &Dataset, b: &Dataset, column: &str) -> Result<(Dataset, Dataset)> {
    let def_a = a.column_def(column)?;
    let def_b = b.column_def(column)?;
    let (ColumnKind::Categorical { levels: la }, ColumnKind::Categorical { levels: lb }) =
        (&def_a.kind, &def_b.kind)
    else {
        return Err(RapidError::Schema(format!(
            "column {column:?} is not categorical in both datasets"
        )));
    };
    let mut merged = la.clone();
    for l in lb {
        if !merged.iter().any(|m| m == l) {
            merged.push(l.clone());
        }
    }
    Ok((
        a.with_levels(column, merged.clone())?,
        b.with_levels(column, merged)?,
    ))
}
