//! The public benchmark datasets: where they come from, how the raw files
//! become canonical CSVs, and the dataset configs that go with them.

use std::path::{Path, PathBuf};

use crate::config::{ColumnConfig, DatasetConfig};
use crate::data::ColumnKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Source {
    pub name: &'static str,
    pub raw_file: &'static str,
    pub url: &'static str,
    pub raw_sha256: &'static str,
    pub rows: usize,
}

pub const SOURCES: &[Source] = &[
    Source {
        name: "german",
        raw_file: "german.data",
        url: "https://archive.ics.uci.edu/ml/machine-learning-databases/statlog/german/german.data",
        raw_sha256: "b21f3d81db8071257d5ff1deaeba1fd4303b62712e6fcc9715c7a86202cb5871",
        rows: 1000,
    },
    Source {
        name: "adult",
        raw_file: "adult.data",
        url: "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data",
        raw_sha256: "5b00264637dbfec36bdeaab5676b0b309ff9eb788d63554ca0a249491c86603d",
        rows: 32561,
    },
    Source {
        name: "compas",
        raw_file: "compas-scores-two-years.csv",
        url: "https://raw.githubusercontent.com/propublica/compas-analysis/master/compas-scores-two-years.csv",
        raw_sha256: "c451db85908b2f7fef1d83203bedf6b71ecda0d5af468d82ae62178f91d0cc7d",
        rows: 7214,
    },
];

pub fn source(name: &str) -> Option<&'static Source> {
    SOURCES.iter().find(|s| s.name == name)
}

const GERMAN_COLUMNS: [&str; 21] = [
    "status",
    "duration",
    "credit_history",
    "purpose",
    "credit_amount",
    "savings",
    "employment",
    "installment_rate",
    "personal_status",
    "other_debtors",
    "residence_since",
    "property",
    "age",
    "installment_plans",
    "housing",
    "existing_credits",
    "job",
    "people_liable",
    "telephone",
    "foreign_worker",
    "credit",
];
const GERMAN_NUMERIC: [&str; 7] = [
    "duration",
    "credit_amount",
    "installment_rate",
    "residence_since",
    "age",
    "existing_credits",
    "people_liable",
];

const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education_num",
    "marital_status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital_gain",
    "capital_loss",
    "hours_per_week",
    "native_country",
    "income",
];
const ADULT_NUMERIC: [&str; 6] = [
    "age",
    "fnlwgt",
    "education_num",
    "capital_gain",
    "capital_loss",
    "hours_per_week",
];
const ADULT_MISSING: [&str; 3] = ["workclass", "occupation", "native_country"];

const COMPAS_COLUMNS: [&str; 14] = [
    "sex",
    "age",
    "age_cat",
    "race",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "priors_count",
    "days_b_screening_arrest",
    "c_charge_degree",
    "is_recid",
    "decile_score",
    "score_text",
    "two_year_recid",
];
const COMPAS_NUMERIC: [&str; 8] = [
    "age",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "priors_count",
    "days_b_screening_arrest",
    "decile_score",
    "two_year_recid",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

fn writer(out: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(out).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    Ok(w)
}

fn convert_german(raw: &str, out: &Path) -> Result<usize> {
    let mut header: Vec<&str> = GERMAN_COLUMNS[..20].to_vec();
    header.extend(["sex", "credit"]);
    let mut w = writer(out, &header)?;
    let mut n = 0;
    for (i, line) in raw.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 21 {
            return Err(Error::Csv(format!("german line {}: {} fields", i + 1, f.len())));
        }
        let sex = match f[8] {
            "A91" | "A93" | "A94" => "male",
            "A92" | "A95" => "female",
            other => return Err(Error::Csv(format!("german line {}: personal status `{other}`", i + 1))),
        };
        let mut rec: Vec<&str> = f[..20].to_vec();
        rec.extend([sex, f[20]]);
        w.write_record(&rec).map_err(csv_err)?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(n)
}

fn convert_adult(raw: &str, out: &Path) -> Result<usize> {
    let mut w = writer(out, &ADULT_COLUMNS)?;
    let mut n = 0;
    for (i, line) in raw.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 15 {
            return Err(Error::Csv(format!("adult line {}: {} fields", i + 1, f.len())));
        }
        w.write_record(&f).map_err(csv_err)?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(n)
}

fn convert_compas(raw: &Path, out: &Path) -> Result<usize> {
    let mut r = csv::Reader::from_path(raw).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    // the raw file repeats some names; the first occurrence wins
    let pos: Vec<usize> = COMPAS_COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| Error::UnknownColumn(c.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut w = writer(out, &COMPAS_COLUMNS)?;
    let mut n = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        w.write_record(pos.iter().map(|&p| rec[p].trim())).map_err(csv_err)?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(n)
}

/// Converts a verified raw download into the canonical CSV; returns the
/// number of data rows written.
pub fn convert(name: &str, raw: &Path, out: &Path) -> Result<usize> {
    let read = || std::fs::read_to_string(raw).map_err(|e| Error::io(raw, e));
    match name {
        "german" => convert_german(&read()?, out),
        "adult" => convert_adult(&read()?, out),
        "compas" => convert_compas(raw, out),
        _ => Err(Error::Config(format!("unknown dataset `{name}`"))),
    }
}

fn columns(names: &[&str], numeric: &[&str], missing: &[&str]) -> Vec<ColumnConfig> {
    names
        .iter()
        .map(|n| ColumnConfig {
            name: n.to_string(),
            kind: if numeric.contains(n) {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            },
            allow_missing: missing.contains(n),
        })
        .collect()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// The canonical dataset config: label, favorable outcome, sensitive
/// attribute and privileged group as used by the shipped pipelines.
pub fn dataset_config(name: &str, csv_path: &Path, sha256: Option<String>) -> Result<DatasetConfig> {
    let base = |label: &str, favorable: &[&str], sensitive: &str, privileged: &[&str], cols| DatasetConfig {
        name: name.to_string(),
        path: csv_path.to_path_buf(),
        sha256: sha256.clone(),
        label: label.to_string(),
        favorable: strings(favorable),
        unfavorable: None,
        sensitive: sensitive.to_string(),
        privileged: strings(privileged),
        missing_tokens: strings(&["", "NA", "?"]),
        features: None,
        include_sensitive: true,
        columns: cols,
        base_dir: PathBuf::new(),
    };
    Ok(match name {
        "german" => {
            let mut names = GERMAN_COLUMNS[..20].to_vec();
            names.extend(["sex", "credit"]);
            let mut c = base("credit", &["1"], "sex", &["male"], columns(&names, &GERMAN_NUMERIC, &[]));
            c.unfavorable = Some(strings(&["2"]));
            // the 20 original attributes; sex is derived from personal_status
            c.features = Some(strings(&GERMAN_COLUMNS[..20]));
            c
        }
        "adult" => {
            let mut c = base(
                "income",
                &[">50K"],
                "sex",
                &["Male"],
                columns(&ADULT_COLUMNS, &ADULT_NUMERIC, &ADULT_MISSING),
            );
            c.unfavorable = Some(strings(&["<=50K"]));
            c
        }
        "compas" => {
            let mut c = base(
                "score_text",
                &["Low", "Medium"],
                "race",
                &["Caucasian"],
                columns(&COMPAS_COLUMNS, &COMPAS_NUMERIC, &["days_b_screening_arrest"]),
            );
            c.unfavorable = Some(strings(&["High"]));
            c.features = Some(strings(&["is_recid", "age", "decile_score", "priors_count"]));
            c.include_sensitive = false;
            c
        }
        _ => return Err(Error::Config(format!("unknown dataset `{name}`"))),
    })
}
