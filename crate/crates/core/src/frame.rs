//! The working table that flows through pipeline stages.
//!
//! Feature columns are what the classifier eventually sees. Auxiliary
//! columns are the remaining raw columns of the dataset; row filters may
//! reference them but no transformer touches them.

use crate::data::{ColumnData, ColumnKind, Dataset, Group, GroupCounts};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values.into_iter().map(Some).collect()),
        }
    }

    pub fn kind(&self) -> ColumnKind {
        self.data.kind()
    }

    /// Numeric values, or `None` if the column is categorical or has gaps.
    pub fn dense(&self) -> Option<Vec<f64>> {
        match &self.data {
            ColumnData::Numeric(v) => v.iter().copied().collect(),
            ColumnData::Categorical(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub features: Vec<Column>,
    pub aux: Vec<Column>,
    pub labels: Vec<u8>,
    pub groups: Vec<Group>,
    /// Source row of each row; `None` for synthetic rows.
    pub row_ids: Vec<Option<usize>>,
}

impl Frame {
    pub fn from_dataset(d: &Dataset) -> Self {
        let features: Vec<Column> = d
            .feature_indices()
            .iter()
            .map(|&i| Column {
                name: d.schema()[i].name.clone(),
                data: d.columns()[i].clone(),
            })
            .collect();
        let aux = d
            .schema()
            .iter()
            .enumerate()
            .filter(|(i, _)| !d.feature_indices().contains(i))
            .map(|(i, s)| Column {
                name: s.name.clone(),
                data: d.columns()[i].clone(),
            })
            .collect();
        Frame {
            features,
            aux,
            labels: d.labels().to_vec(),
            groups: d.groups().to_vec(),
            row_ids: d.row_ids().iter().map(|&i| Some(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|c| c.name == name)
    }

    /// A feature column first, otherwise an auxiliary column.
    pub fn any_column(&self, name: &str) -> Option<&Column> {
        self.features
            .iter()
            .chain(&self.aux)
            .find(|c| c.name == name)
    }

    pub fn group_counts(&self) -> GroupCounts {
        GroupCounts::tally(&self.labels, &self.groups)
    }

    pub fn take(&self, rows: &[usize]) -> Frame {
        let take = |cols: &[Column]| {
            cols.iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.take(rows),
                })
                .collect()
        };
        Frame {
            features: take(&self.features),
            aux: take(&self.aux),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Row-major numeric matrix of the features.
    pub fn matrix(&self) -> Result<Matrix> {
        let cols: Vec<Vec<f64>> = self
            .features
            .iter()
            .map(|c| match &c.data {
                ColumnData::Categorical(_) => Err(Error::ColumnKind {
                    stage: "classifier".into(),
                    column: c.name.clone(),
                    expected: "numeric",
                    found: "categorical",
                }),
                ColumnData::Numeric(_) => c.dense().ok_or_else(|| Error::UnexpectedMissing {
                    stage: "classifier".into(),
                    column: c.name.clone(),
                }),
            })
            .collect::<Result<_>>()?;
        Ok(Matrix::from_columns(self.len(), &cols))
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                data[i * cols + j] = x;
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}
