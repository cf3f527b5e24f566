//! Spectra, labeled datasets and the dataset CSV format.
//!
//! A dataset CSV has one header row made of wavelength values plus a single
//! literal `label` column, and one sample per row. Lines starting with `#`
//! are treated as comments.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    wavelengths: Vec<f64>,
    absorbances: Vec<f64>,
    pub unit: String,
}

impl Spectrum {
    pub fn new(wavelengths: Vec<f64>, absorbances: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != absorbances.len() {
            return Err(Error::Validation(format!(
                "{} wavelengths but {} absorbances",
                wavelengths.len(),
                absorbances.len()
            )));
        }
        check_grid(&wavelengths)?;
        if let Some(i) = absorbances.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("absorbance {i} is not finite")));
        }
        Ok(Spectrum {
            wavelengths,
            absorbances,
            unit: String::new(),
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn absorbances(&self) -> &[f64] {
        &self.absorbances
    }

    pub fn len(&self) -> usize {
        self.absorbances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorbances.is_empty()
    }

    pub(crate) fn with_absorbances(&self, absorbances: Vec<f64>) -> Spectrum {
        Spectrum {
            wavelengths: self.wavelengths.clone(),
            absorbances,
            unit: self.unit.clone(),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(i) = grid.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("wavelength {i} is not finite")));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Validation(format!(
            "wavelengths must be strictly increasing: {} at position {} is followed by {}",
            grid[i],
            i,
            grid[i + 1]
        )));
    }
    Ok(())
}

/// Absorbance rows over a shared wavelength grid with dense class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    grid: Vec<f64>,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    pub unit: String,
}

impl LabeledDataset {
    pub fn new(
        grid: Vec<f64>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        check_grid(&grid)?;
        if class_names.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        if rows.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != grid.len() {
                return Err(Error::Validation(format!(
                    "row {i} has {} values, grid has {}",
                    row.len(),
                    grid.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "row {i}, column {j} is not finite"
                )));
            }
        }
        if let Some(i) = labels.iter().position(|&l| l >= class_names.len()) {
            return Err(Error::Validation(format!(
                "label {} of row {i} is out of range for {} classes",
                labels[i],
                class_names.len()
            )));
        }
        Ok(LabeledDataset {
            grid,
            rows,
            labels,
            class_names,
            unit: String::new(),
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.grid.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn spectrum(&self, i: usize) -> Spectrum {
        Spectrum {
            wavelengths: self.grid.clone(),
            absorbances: self.rows[i].clone(),
            unit: self.unit.clone(),
        }
    }

    /// Copy of the samples at `indices`, in that order. Class names are kept.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            grid: self.grid.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            unit: self.unit.clone(),
        }
    }

    /// Same samples and grid with replaced rows; rows must keep their length.
    pub fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<LabeledDataset> {
        let mut out =
            LabeledDataset::new(self.grid.clone(), rows, self.labels.clone(), self.class_names.clone())?;
        out.unit = self.unit.clone();
        Ok(out)
    }

    /// Renumber classes so that `order[new_id]` is the old id.
    pub fn reorder_classes(&self, order: &[usize]) -> Result<LabeledDataset> {
        let c = self.num_classes();
        let mut seen = vec![false; c];
        if order.len() != c || !order.iter().all(|&o| o < c && !std::mem::replace(&mut seen[o], true))
        {
            return Err(Error::Argument(format!(
                "class order {order:?} is not a permutation of 0..{c}"
            )));
        }
        let mut new_id = vec![0; c];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        Ok(LabeledDataset {
            grid: self.grid.clone(),
            rows: self.rows.clone(),
            labels: self.labels.iter().map(|&l| new_id[l]).collect(),
            class_names: order.iter().map(|&o| self.class_names[o].clone()).collect(),
            unit: self.unit.clone(),
        })
    }

    /// Make the class named `name` the positive class (id 1) of a binary dataset.
    pub fn with_positive_class(&self, name: &str) -> Result<LabeledDataset> {
        if self.num_classes() != 2 {
            return Err(Error::Argument(format!(
                "a positive class only applies to binary datasets, this one has {} classes",
                self.num_classes()
            )));
        }
        match self.class_names.iter().position(|n| n == name) {
            Some(1) => Ok(self.clone()),
            Some(_) => self.reorder_classes(&[1, 0]),
            None => Err(Error::Argument(format!(
                "no class named {name:?}; classes are {:?}",
                self.class_names
            ))),
        }
    }
}

/// Borrowed selection of samples from a dataset, keeping the original indices.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    data: &'a LabeledDataset,
    indices: &'a [usize],
}

impl<'a> SampleView<'a> {
    pub fn new(data: &'a LabeledDataset, indices: &'a [usize]) -> Self {
        SampleView { data, indices }
    }

    pub fn dataset(&self) -> &'a LabeledDataset {
        self.data
    }

    pub fn indices(&self) -> &'a [usize] {
        self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.indices.iter().map(|&i| self.data.rows[i].clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| self.data.labels[i]).collect()
    }

    pub fn to_dataset(&self) -> LabeledDataset {
        self.data.subset(self.indices)
    }
}

fn parse_number(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column,
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column,
            value: cell.to_string(),
        });
    }
    Ok(v)
}

/// Read a dataset CSV. Rows are numbered from 1 for the first data row;
/// header errors are reported as row 0. Columns are numbered from 0.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Format {
                row: 0,
                message: "empty file, expected a header row".into(),
            })
        }
    };
    let label_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.trim() == LABEL_COLUMN)
        .map(|(i, _)| i)
        .collect();
    let label_col = match label_cols.as_slice() {
        [c] => *c,
        [] => {
            return Err(Error::Format {
                row: 0,
                message: format!("header has no `{LABEL_COLUMN}` column"),
            })
        }
        _ => {
            return Err(Error::Format {
                row: 0,
                message: format!("header has {} `{LABEL_COLUMN}` columns", label_cols.len()),
            })
        }
    };
    let mut grid = Vec::with_capacity(header.len() - 1);
    for (j, h) in header.iter().enumerate() {
        if j != label_col {
            grid.push(parse_number(h, 0, j)?);
        }
    }
    check_grid(&grid)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (r, record) in records.enumerate() {
        let record = record?;
        let row_no = r + 1;
        if record.len() != header.len() {
            return Err(Error::Format {
                row: row_no,
                message: format!(
                    "expected {} fields, found {}",
                    header.len(),
                    record.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(grid.len());
        for (j, cell) in record.iter().enumerate() {
            if j != label_col {
                row.push(parse_number(cell, row_no, j)?);
            }
        }
        let name = record[label_col].trim();
        let id = match class_names.iter().position(|n| n == name) {
            Some(id) => id,
            None => {
                class_names.push(name.to_string());
                class_names.len() - 1
            }
        };
        rows.push(row);
        labels.push(id);
    }
    if rows.is_empty() {
        return Err(Error::Format {
            row: 1,
            message: "no data rows".into(),
        });
    }
    LabeledDataset::new(grid, rows, labels, class_names)
}

/// Shortest decimal that round-trips the value rounded to 9 significant digits.
pub fn format_value(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn write_csv<W: Write>(data: &LabeledDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = data.grid.iter().map(|&g| format_value(g)).collect();
    header.push(LABEL_COLUMN.to_string());
    wtr.write_record(&header)?;
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        let mut rec: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        rec.push(data.class_names[label].clone());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(data, BufWriter::new(file))
}
