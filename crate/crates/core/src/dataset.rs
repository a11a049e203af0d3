//! Observed study data: an `N × K` covariate matrix and 1-based treatment labels.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::numeric::format_g17;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("input is empty")]
    EmptyFile,
    #[error("parse error at row {row}, column {column:?}: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing value at row {row}, column {column:?}")]
    MissingValue { row: usize, column: String },
    #[error("treatment label {label} at row {row} is outside 1..={num_treatments}")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_treatments: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Column layout of an input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub treatment_column: String,
    /// Covariate columns in order; `None` takes every other column.
    pub covariate_columns: Option<Vec<String>>,
    /// Overrides the inferred number of treatments (max label).
    pub num_treatments: Option<usize>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            treatment_column: "w".into(),
            covariate_columns: None,
            num_treatments: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Vec<f64>,
    treatments: Vec<usize>,
    num_units: usize,
    num_covariates: usize,
    num_treatments: usize,
    covariate_names: Vec<String>,
    warnings: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major covariates. Treatments absent from the
    /// data are recorded as warnings.
    pub fn new(
        covariates: Vec<f64>,
        treatments: Vec<usize>,
        num_covariates: usize,
        num_treatments: usize,
        covariate_names: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        let num_units = treatments.len();
        if covariates.len() != num_units * num_covariates {
            return Err(DatasetError::Shape(format!(
                "{} covariate values for {} units × {} covariates",
                covariates.len(),
                num_units,
                num_covariates
            )));
        }
        if let Some((row, &label)) = treatments
            .iter()
            .enumerate()
            .find(|(_, &t)| t == 0 || t > num_treatments)
        {
            return Err(DatasetError::LabelOutOfRange {
                row: row + 1,
                label,
                num_treatments,
            });
        }
        if let Some(row) = covariates
            .iter()
            .position(|x| !x.is_finite())
            .map(|i| i / num_covariates.max(1))
        {
            return Err(DatasetError::MissingValue {
                row: row + 1,
                column: String::new(),
            });
        }
        let covariate_names = match covariate_names {
            Some(names) if names.len() == num_covariates => names,
            Some(names) => {
                return Err(DatasetError::Shape(format!(
                    "{} names for {} covariates",
                    names.len(),
                    num_covariates
                )))
            }
            None => (1..=num_covariates).map(|k| format!("x{}", k)).collect(),
        };
        let mut present = vec![false; num_treatments];
        for &t in &treatments {
            present[t - 1] = true;
        }
        let warnings = present
            .iter()
            .enumerate()
            .filter(|(_, &p)| !p)
            .map(|(t, _)| format!("treatment {} has no units", t + 1))
            .collect();
        Ok(Self {
            covariates,
            treatments,
            num_units,
            num_covariates,
            num_treatments,
            covariate_names,
            warnings,
        })
    }

    pub fn from_rows(
        rows: &[Vec<f64>],
        treatments: Vec<usize>,
        num_treatments: usize,
    ) -> Result<Self, DatasetError> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(DatasetError::Shape("ragged covariate rows".into()));
        }
        if rows.len() != treatments.len() {
            return Err(DatasetError::Shape(format!(
                "{} covariate rows for {} treatment labels",
                rows.len(),
                treatments.len()
            )));
        }
        Self::new(rows.concat(), treatments, k, num_treatments, None)
    }

    pub fn num_units(&self) -> usize {
        self.num_units
    }

    pub fn num_covariates(&self) -> usize {
        self.num_covariates
    }

    pub fn num_treatments(&self) -> usize {
        self.num_treatments
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn treatments(&self) -> &[usize] {
        &self.treatments
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.num_covariates..(i + 1) * self.num_covariates]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.num_units).map(move |i| self.row(i))
    }

    pub fn covariate(&self, i: usize, k: usize) -> f64 {
        self.covariates[i * self.num_covariates + k]
    }

    /// Row-major `N × K` covariate values.
    pub fn covariate_values(&self) -> &[f64] {
        &self.covariates
    }

    /// The dataset with units reordered: unit `i` of the result is unit
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let covariates = order.iter().flat_map(|&i| self.row(i).to_vec()).collect();
        let treatments = order.iter().map(|&i| self.treatments[i]).collect();
        Self {
            covariates,
            treatments,
            num_units: order.len(),
            ..self.clone()
        }
    }

    /// Replaces the covariates by `cells - 1` indicator columns of the exact
    /// covariate cells (first cell is the reference), giving a saturated
    /// design for logistic fits.
    pub fn cell_indicator_features(&self) -> Self {
        let index = build_cell_index(self);
        let k = index.num_cells().saturating_sub(1);
        let mut covariates = vec![0.0; self.num_units * k];
        for (c, units) in index.cells().iter().enumerate().skip(1) {
            for &i in &units.units {
                covariates[i * k + c - 1] = 1.0;
            }
        }
        Self::new(
            covariates,
            self.treatments.clone(),
            k,
            self.num_treatments,
            Some(
                (2..=index.num_cells())
                    .map(|c| format!("cell{}", c))
                    .collect(),
            ),
        )
        .expect("indicator design is well formed")
    }

    pub fn load(path: impl AsRef<Path>, schema: &Schema) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(file, schema)
    }

    /// Reads a headered, comma-separated table.
    pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(DatasetError::EmptyFile);
        }
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::ParseError {
                    row: 0,
                    column: name.to_string(),
                    message: "column not found in header".into(),
                })
        };
        let treatment_idx = column(&schema.treatment_column)?;
        let covariate_names: Vec<String> = match &schema.covariate_columns {
            Some(cols) => cols.clone(),
            None => headers
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != treatment_idx)
                .map(|(_, h)| h.clone())
                .collect(),
        };
        if covariate_names.is_empty() {
            return Err(DatasetError::ParseError {
                row: 0,
                column: schema.treatment_column.clone(),
                message: "at least one covariate column is required".into(),
            });
        }
        let covariate_idx = covariate_names
            .iter()
            .map(|n| column(n))
            .collect::<Result<Vec<_>, _>>()?;

        let mut covariates = Vec::new();
        let mut treatments = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let row = r + 1;
            for (&idx, name) in covariate_idx.iter().zip(&covariate_names) {
                let field = record.get(idx).unwrap_or("");
                if field.is_empty() || field.eq_ignore_ascii_case("na") {
                    return Err(DatasetError::MissingValue {
                        row,
                        column: name.clone(),
                    });
                }
                let value: f64 = field.parse().map_err(|_| DatasetError::ParseError {
                    row,
                    column: name.clone(),
                    message: format!("{:?} is not a number", field),
                })?;
                if !value.is_finite() {
                    return Err(DatasetError::ParseError {
                        row,
                        column: name.clone(),
                        message: format!("{:?} is not finite", field),
                    });
                }
                covariates.push(value);
            }
            let field = record.get(treatment_idx).unwrap_or("");
            if field.is_empty() {
                return Err(DatasetError::MissingValue {
                    row,
                    column: schema.treatment_column.clone(),
                });
            }
            let label: usize = field.parse().map_err(|_| DatasetError::ParseError {
                row,
                column: schema.treatment_column.clone(),
                message: format!("{:?} is not a positive integer label", field),
            })?;
            treatments.push(label);
        }
        if treatments.is_empty() {
            return Err(DatasetError::EmptyFile);
        }
        let num_treatments = schema
            .num_treatments
            .unwrap_or_else(|| treatments.iter().copied().max().unwrap_or(0));
        Self::new(
            covariates,
            treatments,
            covariate_names.len(),
            num_treatments,
            Some(covariate_names),
        )
    }

    /// Writes the dataset as CSV (covariates, then `treatment_column`),
    /// followed by any `extra` columns of per-unit values.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        treatment_column: &str,
        extra: &[(String, Vec<String>)],
    ) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.covariate_names.iter().map(String::as_str).collect();
        header.push(treatment_column);
        header.extend(extra.iter().map(|(name, _)| name.as_str()));
        wtr.write_record(&header)?;
        for i in 0..self.num_units {
            let mut record: Vec<String> = self.row(i).iter().map(|&x| format_g17(x)).collect();
            record.push(self.treatments[i].to_string());
            record.extend(extra.iter().map(|(_, values)| values[i].clone()));
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|source| DatasetError::Io {
            path: "<output>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Units sharing a bit-identical covariate row.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub key: Vec<f64>,
    pub units: Vec<usize>,
}

/// Partition of the units into exact covariate cells, in order of first
/// appearance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellIndex {
    cells: Vec<Cell>,
    unit_cell: Vec<usize>,
}

impl CellIndex {
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of(&self, unit: usize) -> usize {
        self.unit_cell[unit]
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

pub fn build_cell_index(d: &Dataset) -> CellIndex {
    group_by_key(d.num_units(), |i| {
        (
            d.row(i).iter().map(|x| x.to_bits()).collect::<Vec<u64>>(),
            d.row(i).to_vec(),
        )
    })
}

/// Groups `0..n` by a hashable key, remembering a representative value.
pub(crate) fn group_by_key<K, F>(n: usize, key: F) -> CellIndex
where
    K: std::hash::Hash + Eq,
    F: Fn(usize) -> (K, Vec<f64>),
{
    let mut lookup: HashMap<K, usize> = HashMap::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut unit_cell = Vec::with_capacity(n);
    for i in 0..n {
        let (k, repr) = key(i);
        let c = *lookup.entry(k).or_insert_with(|| {
            cells.push(Cell {
                key: repr,
                units: Vec::new(),
            });
            cells.len() - 1
        });
        cells[c].units.push(i);
        unit_cell.push(c);
    }
    CellIndex { cells, unit_cell }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::artificial_dataset;

    #[test]
    fn loads_artificial_example_csv() {
        let d = artificial_dataset();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, "w", &[]).unwrap();
        let loaded = Dataset::read_csv(buf.as_slice(), &Schema::default()).unwrap();
        assert_eq!(loaded.num_units(), 24);
        assert_eq!(loaded.num_covariates(), 3);
        assert_eq!(loaded.num_treatments(), 3);
        assert_eq!(loaded, d);
    }

    #[test]
    fn rejects_missing_values() {
        let csv = "x1,x2,w\n1,,2\n";
        assert!(matches!(
            Dataset::read_csv(csv.as_bytes(), &Schema::default()),
            Err(DatasetError::MissingValue { row: 1, .. })
        ));
        let csv = "x1,w\nNA,1\n";
        assert!(matches!(
            Dataset::read_csv(csv.as_bytes(), &Schema::default()),
            Err(DatasetError::MissingValue { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let schema = Schema::default();
        assert!(matches!(
            Dataset::read_csv("w\n1\n2\n".as_bytes(), &schema),
            Err(DatasetError::ParseError { .. })
        ));
        assert!(matches!(
            Dataset::read_csv("x1,w\nabc,1\n".as_bytes(), &schema),
            Err(DatasetError::ParseError { .. })
        ));
        assert!(matches!(
            Dataset::read_csv("x1,w\n1,1.5\n".as_bytes(), &schema),
            Err(DatasetError::ParseError { .. })
        ));
        assert!(matches!(
            Dataset::read_csv("x1,w\n".as_bytes(), &schema),
            Err(DatasetError::EmptyFile)
        ));
        assert!(matches!(
            Dataset::read_csv("".as_bytes(), &schema),
            Err(DatasetError::EmptyFile)
        ));
        assert!(matches!(
            Dataset::read_csv("x1,w\n1,0\n".as_bytes(), &schema),
            Err(DatasetError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn schema_overrides() {
        let csv = "arm,a,b,ignored\n1,0.5,1,9\n2,0.25,0,9\n";
        let schema = Schema {
            treatment_column: "arm".into(),
            covariate_columns: Some(vec!["b".into(), "a".into()]),
            num_treatments: Some(4),
        };
        let d = Dataset::read_csv(csv.as_bytes(), &schema).unwrap();
        assert_eq!(d.covariate_names(), &["b".to_string(), "a".to_string()]);
        assert_eq!(d.row(1), &[0.0, 0.25]);
        assert_eq!(d.num_treatments(), 4);
        assert_eq!(d.warnings().len(), 2);
    }

    #[test]
    fn cell_index_of_artificial_example() {
        let index = build_cell_index(&artificial_dataset());
        assert_eq!(index.num_cells(), 4);
        let keys: Vec<&[f64]> = index.cells().iter().map(|c| c.key.as_slice()).collect();
        assert_eq!(
            keys,
            vec![
                &[1.0, 1.0, 1.0][..],
                &[1.0, 0.0, 1.0],
                &[0.0, 1.0, 1.0],
                &[0.0, 0.0, 0.0]
            ]
        );
        assert!(index.cells().iter().all(|c| c.units.len() == 6));
    }

    #[test]
    fn cell_index_edge_cases() {
        let d = Dataset::from_rows(&[vec![0.1], vec![0.2], vec![0.3]], vec![1, 2, 1], 2).unwrap();
        assert_eq!(build_cell_index(&d).num_cells(), 3);
        let empty = Dataset::new(vec![], vec![], 2, 2, None).unwrap();
        assert!(build_cell_index(&empty).is_empty());
    }

    #[test]
    fn indicator_features_are_saturated() {
        let d = artificial_dataset().cell_indicator_features();
        assert_eq!(d.num_covariates(), 3);
        assert_eq!(d.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(d.row(6), &[1.0, 0.0, 0.0]);
        assert_eq!(d.row(23), &[0.0, 0.0, 1.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip_is_bit_exact(
                rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 2), 1..30),
                seed in 0usize..3,
            ) {
                let treatments: Vec<usize> = (0..rows.len()).map(|i| (i + seed) % 3 + 1).collect();
                let d = Dataset::from_rows(&rows, treatments, 3).unwrap();
                let mut buf = Vec::new();
                d.write_csv(&mut buf, "w", &[]).unwrap();
                let schema = Schema { num_treatments: Some(3), ..Schema::default() };
                let back = Dataset::read_csv(buf.as_slice(), &schema).unwrap();
                prop_assert_eq!(back.covariate_values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                                d.covariate_values().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
                prop_assert_eq!(back.treatments(), d.treatments());
            }

            #[test]
            fn cell_sizes_sum_to_n(values in prop::collection::vec(0u8..3, 0..40)) {
                let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![f64::from(v)]).collect();
                let d = Dataset::from_rows(&rows, vec![1; rows.len()], 1).unwrap();
                let index = build_cell_index(&d);
                prop_assert_eq!(index.cells().iter().map(|c| c.units.len()).sum::<usize>(), rows.len());
            }
        }
    }
}
