//! Tabular datasets with an explicit label, a binary sensitive-group
//! partition, and first-class missing cells.

mod csv_io;
mod split;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, write_csv, DEFAULT_MISSING_TOKENS};
pub use split::{split, SplitPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub allowed_missing: bool,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numeric,
            allowed_missing: false,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            allowed_missing: false,
        }
    }

    pub fn allow_missing(mut self) -> Self {
        self.allowed_missing = true;
        self
    }
}

/// Which rows are privileged and which label values count as favorable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub sensitive_column: String,
    pub privileged_values: BTreeSet<String>,
    /// Label tokens mapped to `Y = 1`.
    pub favorable_labels: BTreeSet<String>,
    /// When present, every label must be in one of the two sets.
    #[serde(default)]
    pub unfavorable_labels: Option<BTreeSet<String>>,
}

impl GroupSpec {
    pub fn new<I, J, S, T>(sensitive_column: &str, privileged: I, favorable: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        GroupSpec {
            sensitive_column: sensitive_column.to_string(),
            privileged_values: privileged.into_iter().map(Into::into).collect(),
            favorable_labels: favorable.into_iter().map(Into::into).collect(),
            unfavorable_labels: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "u")]
    Unprivileged,
    #[serde(rename = "p")]
    Privileged,
}

impl Group {
    pub fn flipped(self) -> Group {
        match self {
            Group::Unprivileged => Group::Privileged,
            Group::Privileged => Group::Unprivileged,
        }
    }
}

/// A single cell as seen at load time.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Cat(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Categorical(v) => v[row].is_none(),
        }
    }

    pub fn has_missing(&self) -> bool {
        match self {
            ColumnData::Numeric(v) => v.iter().any(Option::is_none),
            ColumnData::Categorical(v) => v.iter().any(Option::is_none),
        }
    }

    pub fn cell(&self, row: usize) -> Cell {
        match self {
            ColumnData::Numeric(v) => v[row].map_or(Cell::Missing, Cell::Num),
            ColumnData::Categorical(v) => v[row].clone().map_or(Cell::Missing, Cell::Cat),
        }
    }

    /// Rows selected by `rows`, in that order.
    pub fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// The six stratum sizes every group metric divides by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub n_u: usize,
    pub n_p: usize,
    pub n_u_pos: usize,
    pub n_p_pos: usize,
    pub n_u_neg: usize,
    pub n_p_neg: usize,
}

impl GroupCounts {
    pub fn tally(labels: &[u8], groups: &[Group]) -> Self {
        let mut c = GroupCounts::default();
        for (&y, &g) in labels.iter().zip(groups) {
            match (g, y) {
                (Group::Unprivileged, 1) => c.n_u_pos += 1,
                (Group::Unprivileged, _) => c.n_u_neg += 1,
                (Group::Privileged, 1) => c.n_p_pos += 1,
                (Group::Privileged, _) => c.n_p_neg += 1,
            }
        }
        c.n_u = c.n_u_pos + c.n_u_neg;
        c.n_p = c.n_p_pos + c.n_p_neg;
        c
    }

    pub fn total(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn size(&self, g: Group) -> usize {
        match g {
            Group::Unprivileged => self.n_u,
            Group::Privileged => self.n_p,
        }
    }

    pub fn positives(&self, g: Group) -> usize {
        match g {
            Group::Unprivileged => self.n_u_pos,
            Group::Privileged => self.n_p_pos,
        }
    }

    pub fn negatives(&self, g: Group) -> usize {
        match g {
            Group::Unprivileged => self.n_u_neg,
            Group::Privileged => self.n_p_neg,
        }
    }

    /// Counts with the privileged/unprivileged designation swapped.
    pub fn swapped(&self) -> Self {
        GroupCounts {
            n_u: self.n_p,
            n_p: self.n_u,
            n_u_pos: self.n_p_pos,
            n_p_pos: self.n_u_pos,
            n_u_neg: self.n_p_neg,
            n_p_neg: self.n_u_neg,
        }
    }
}

/// An immutable, validated table.
///
/// Every column (including the label and the sensitive column) is kept with
/// its raw values so the dataset can be written back out unchanged. The
/// binary label and the group partition are derived once at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    columns: Vec<ColumnData>,
    label_column: usize,
    group: GroupSpec,
    features: Vec<usize>,
    labels: Vec<u8>,
    groups: Vec<Group>,
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Validates and assembles a dataset. All non-label columns are features.
    pub fn new(
        schema: Vec<ColumnSchema>,
        columns: Vec<ColumnData>,
        label_column: &str,
        group: GroupSpec,
    ) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::Csv(format!(
                "schema has {} columns but {} were supplied",
                schema.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &schema {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        let n = columns.first().map_or(0, ColumnData::len);
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        for (s, c) in schema.iter().zip(&columns) {
            if c.len() != n {
                return Err(Error::Csv(format!(
                    "column `{}` has {} rows, expected {n}",
                    s.name,
                    c.len()
                )));
            }
            if c.kind() != s.kind {
                return Err(Error::ColumnKind {
                    stage: "schema".into(),
                    column: s.name.clone(),
                    expected: s.kind.as_str(),
                    found: c.kind().as_str(),
                });
            }
            if !s.allowed_missing {
                if let Some(row) = (0..n).find(|&r| c.is_missing(r)) {
                    return Err(Error::MissingNotAllowed {
                        column: s.name.clone(),
                        row,
                    });
                }
            }
        }

        let position = |name: &str| schema.iter().position(|c| c.name == name);
        let label_idx =
            position(label_column).ok_or_else(|| Error::UnknownColumn(label_column.into()))?;
        let labels = map_labels(&schema[label_idx].name, &columns[label_idx], &group)?;

        let sens_idx = position(&group.sensitive_column)
            .ok_or_else(|| Error::UnknownColumn(group.sensitive_column.clone()))?;
        if sens_idx == label_idx {
            return Err(Error::InvalidGroup(
                "sensitive column cannot be the label column".into(),
            ));
        }
        let sens = match &columns[sens_idx] {
            ColumnData::Categorical(v) => v,
            ColumnData::Numeric(_) => {
                return Err(Error::InvalidGroup(format!(
                    "sensitive column `{}` must be categorical",
                    group.sensitive_column
                )))
            }
        };
        if group.privileged_values.is_empty() {
            return Err(Error::InvalidGroup("no privileged values declared".into()));
        }
        let mut groups = Vec::with_capacity(n);
        for (row, v) in sens.iter().enumerate() {
            let v = v.as_ref().ok_or_else(|| Error::MissingNotAllowed {
                column: group.sensitive_column.clone(),
                row,
            })?;
            groups.push(if group.privileged_values.contains(v) {
                Group::Privileged
            } else {
                Group::Unprivileged
            });
        }
        if !groups.contains(&Group::Privileged) {
            return Err(Error::EmptyGroup("privileged"));
        }
        if !groups.contains(&Group::Unprivileged) {
            return Err(Error::EmptyGroup("unprivileged"));
        }

        let features = (0..schema.len()).filter(|&i| i != label_idx).collect();
        Ok(Dataset {
            schema,
            columns,
            label_column: label_idx,
            group,
            features,
            labels,
            groups,
            row_ids: (0..n).collect(),
        })
    }

    /// Builds a dataset from row records; convenient for small fixtures.
    pub fn from_rows(
        schema: Vec<ColumnSchema>,
        rows: &[Vec<Cell>],
        label_column: &str,
        group: GroupSpec,
    ) -> Result<Self> {
        let mut columns: Vec<ColumnData> = schema
            .iter()
            .map(|s| match s.kind {
                ColumnKind::Numeric => ColumnData::Numeric(Vec::with_capacity(rows.len())),
                ColumnKind::Categorical => ColumnData::Categorical(Vec::with_capacity(rows.len())),
            })
            .collect();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Csv(format!(
                    "row {r} has {} cells, expected {}",
                    row.len(),
                    schema.len()
                )));
            }
            for ((cell, col), s) in row.iter().zip(columns.iter_mut()).zip(&schema) {
                match (col, cell) {
                    (ColumnData::Numeric(v), Cell::Num(x)) => v.push(Some(*x)),
                    (ColumnData::Numeric(v), Cell::Missing) => v.push(None),
                    (ColumnData::Categorical(v), Cell::Cat(x)) => v.push(Some(x.clone())),
                    (ColumnData::Categorical(v), Cell::Missing) => v.push(None),
                    (ColumnData::Categorical(v), Cell::Num(x)) => v.push(Some(x.to_string())),
                    (ColumnData::Numeric(_), Cell::Cat(x)) => {
                        return Err(Error::NotNumeric {
                            column: s.name.clone(),
                            row: r,
                            value: x.clone(),
                        })
                    }
                }
            }
        }
        Dataset::new(schema, columns, label_column, group)
    }

    /// Restricts the feature set to `names` (the label is never a feature).
    pub fn with_features<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        let mut features = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .column_index(name.as_ref())
                .ok_or_else(|| Error::UnknownColumn(name.as_ref().to_string()))?;
            if idx == self.label_column {
                return Err(Error::Config(format!(
                    "label column `{}` cannot be a feature",
                    name.as_ref()
                )));
            }
            if !features.contains(&idx) {
                features.push(idx);
            }
        }
        self.features = features;
        Ok(self)
    }

    /// Removes the sensitive attribute from the feature set.
    pub fn without_sensitive_feature(mut self) -> Self {
        let sens = self.column_index(&self.group.sensitive_column.clone());
        self.features.retain(|&i| Some(i) != sens);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn label_column(&self) -> &str {
        &self.schema[self.label_column].name
    }

    pub fn group_spec(&self) -> &GroupSpec {
        &self.group
    }

    /// Indices (into the schema) of the feature columns, in order.
    pub fn feature_indices(&self) -> &[usize] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features
            .iter()
            .map(|&i| self.schema[i].name.as_str())
            .collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Row positions in the originally loaded dataset.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn group_counts(&self) -> GroupCounts {
        GroupCounts::tally(&self.labels, &self.groups)
    }

    /// Rows at the given positions. Group membership of the subset is not
    /// re-validated: a test split may legitimately lack one group.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            label_column: self.label_column,
            group: self.group.clone(),
            features: self.features.clone(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// A stable digest of the schema (names, kinds, missing policy) and the
    /// label/group declarations.
    pub fn schema_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.schema {
            h.update(c.name.as_bytes());
            h.update([0u8]);
            h.update(c.kind.as_str().as_bytes());
            h.update([c.allowed_missing as u8]);
        }
        h.update(self.label_column().as_bytes());
        h.update(self.group.sensitive_column.as_bytes());
        for v in &self.group.privileged_values {
            h.update(v.as_bytes());
            h.update([1u8]);
        }
        for v in &self.group.favorable_labels {
            h.update(v.as_bytes());
            h.update([2u8]);
        }
        hex::encode(h.finalize())
    }
}

fn map_labels(name: &str, column: &ColumnData, spec: &GroupSpec) -> Result<Vec<u8>> {
    let tokens: Vec<String> = match column {
        ColumnData::Categorical(v) => v
            .iter()
            .enumerate()
            .map(|(row, x)| {
                x.clone().ok_or_else(|| Error::MissingNotAllowed {
                    column: name.to_string(),
                    row,
                })
            })
            .collect::<Result<_>>()?,
        ColumnData::Numeric(v) => v
            .iter()
            .enumerate()
            .map(|(row, x)| {
                x.map(|x| x.to_string())
                    .ok_or_else(|| Error::MissingNotAllowed {
                        column: name.to_string(),
                        row,
                    })
            })
            .collect::<Result<_>>()?,
    };
    if spec.favorable_labels.is_empty() {
        return Err(Error::InvalidGroup("no favorable label declared".into()));
    }
    let mut unfavorable_seen: Option<&str> = None;
    let mut labels = Vec::with_capacity(tokens.len());
    for t in &tokens {
        if spec.favorable_labels.contains(t) {
            labels.push(1);
            continue;
        }
        match &spec.unfavorable_labels {
            Some(set) if !set.contains(t) => {
                return Err(Error::NonBinaryLabel {
                    column: name.to_string(),
                    value: t.clone(),
                })
            }
            Some(_) => {}
            None => match unfavorable_seen {
                None => unfavorable_seen = Some(t),
                Some(u) if u != t => {
                    return Err(Error::NonBinaryLabel {
                        column: name.to_string(),
                        value: t.clone(),
                    })
                }
                Some(_) => {}
            },
        }
        labels.push(0);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::numeric("x"),
            ColumnSchema::categorical("sex"),
            ColumnSchema::categorical("y"),
        ]
    }

    fn spec() -> GroupSpec {
        GroupSpec::new("sex", ["m"], ["good"])
    }

    fn row(x: f64, s: &str, y: &str) -> Vec<Cell> {
        vec![Cell::Num(x), s.into(), y.into()]
    }

    #[test]
    fn group_counts_four_rows() {
        let rows = vec![
            row(0.0, "f", "good"),
            row(1.0, "f", "bad"),
            row(2.0, "m", "good"),
            row(3.0, "m", "bad"),
        ];
        let d = Dataset::from_rows(schema(), &rows, "y", spec()).unwrap();
        let c = d.group_counts();
        assert_eq!(
            c,
            GroupCounts {
                n_u: 2,
                n_p: 2,
                n_u_pos: 1,
                n_p_pos: 1,
                n_u_neg: 1,
                n_p_neg: 1
            }
        );
    }

    #[test]
    fn all_privileged_rejected_at_construction() {
        let rows = vec![row(0.0, "m", "good"), row(1.0, "m", "bad")];
        let err = Dataset::from_rows(schema(), &rows, "y", spec()).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup("unprivileged")));
    }

    #[test]
    fn third_label_value_is_non_binary() {
        let rows = vec![
            row(0.0, "f", "good"),
            row(1.0, "m", "bad"),
            row(2.0, "m", "ugly"),
        ];
        let err = Dataset::from_rows(schema(), &rows, "y", spec()).unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel { .. }));
    }

    #[test]
    fn declared_unfavorable_set_allows_several_tokens() {
        let mut g = spec();
        g.favorable_labels.insert("ok".into());
        g.unfavorable_labels = Some(["bad".to_string()].into_iter().collect());
        let rows = vec![
            row(0.0, "f", "good"),
            row(1.0, "m", "ok"),
            row(2.0, "m", "bad"),
        ];
        let d = Dataset::from_rows(schema(), &rows, "y", g).unwrap();
        assert_eq!(d.labels(), &[1, 1, 0]);
    }

    #[test]
    fn numeric_sensitive_column_rejected() {
        let rows = vec![row(0.0, "f", "good"), row(1.0, "m", "bad")];
        let g = GroupSpec::new("x", ["0"], ["good"]);
        assert!(matches!(
            Dataset::from_rows(schema(), &rows, "y", g),
            Err(Error::InvalidGroup(_))
        ));
    }

    #[test]
    fn missing_in_strict_column_rejected() {
        let rows = vec![
            vec![Cell::Missing, "f".into(), "good".into()],
            row(1.0, "m", "bad"),
        ];
        assert!(matches!(
            Dataset::from_rows(schema(), &rows, "y", spec()),
            Err(Error::MissingNotAllowed { row: 0, .. })
        ));
    }

    #[test]
    fn every_row_in_exactly_one_group() {
        let rows = vec![
            row(0.0, "f", "good"),
            row(1.0, "x", "bad"),
            row(2.0, "m", "good"),
        ];
        let d = Dataset::from_rows(schema(), &rows, "y", spec()).unwrap();
        let c = d.group_counts();
        assert_eq!(c.n_u + c.n_p, d.len());
        assert_eq!(c.n_u, 2);
    }

    #[test]
    fn feature_restriction_and_sensitive_exclusion() {
        let rows = vec![row(0.0, "f", "good"), row(1.0, "m", "bad")];
        let d = Dataset::from_rows(schema(), &rows, "y", spec()).unwrap();
        assert_eq!(d.feature_names(), vec!["x", "sex"]);
        let d = d.without_sensitive_feature();
        assert_eq!(d.feature_names(), vec!["x"]);
        assert!(d.clone().with_features(&["y"]).is_err());
    }
}
