//! TOML configuration for datasets and pipelines.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, ColumnKind, ColumnSchema, Dataset, GroupSpec, DEFAULT_MISSING_TOKENS};
use crate::error::{Error, Result};
use crate::classifiers::ClassifierSpec;
use crate::harness::{AuditTarget, ExperimentConfig, MitigationRequest};
use crate::pipeline::PipelineSpec;
use crate::transformers::StageSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnConfig {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub allow_missing: bool,
}

fn default_missing() -> Vec<String> {
    DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// CSV location, relative to the config file.
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    pub label: String,
    pub favorable: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unfavorable: Option<Vec<String>>,
    pub sensitive: String,
    pub privileged: Vec<String>,
    #[serde(default = "default_missing")]
    pub missing_tokens: Vec<String>,
    /// Feature columns; every non-label column when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub include_sensitive: bool,
    pub columns: Vec<ColumnConfig>,
    /// Directory the config was read from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn csv_path(&self) -> PathBuf {
        self.base_dir.join(&self.path)
    }

    pub fn schema(&self) -> Vec<ColumnSchema> {
        self.columns
            .iter()
            .map(|c| ColumnSchema {
                name: c.name.clone(),
                kind: c.kind,
                allowed_missing: c.allow_missing,
            })
            .collect()
    }

    pub fn group_spec(&self) -> GroupSpec {
        GroupSpec {
            sensitive_column: self.sensitive.clone(),
            privileged_values: self.privileged.iter().cloned().collect(),
            favorable_labels: self.favorable.iter().cloned().collect(),
            unfavorable_labels: self
                .unfavorable
                .as_ref()
                .map(|u| u.iter().cloned().collect::<BTreeSet<_>>()),
        }
    }

    /// Loads the CSV, checking the checksum first when one is declared.
    pub fn load(&self) -> Result<Dataset> {
        let path = self.csv_path();
        if let Some(expected) = &self.sha256 {
            let found = sha256_file(&path)?;
            if !found.eq_ignore_ascii_case(expected) {
                return Err(Error::Config(format!(
                    "checksum mismatch for {}: expected {expected}, found {found}",
                    path.display()
                )));
            }
        }
        let mut d = load_csv(&path, &self.schema(), &self.label, &self.group_spec(), &self.missing_tokens)?;
        if let Some(f) = &self.features {
            d = d.with_features(f)?;
        }
        if !self.include_sensitive {
            d = d.without_sensitive_feature();
        }
        Ok(d)
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// A pipeline file: the pipeline itself, the stages to audit and optional
/// experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub pipeline: PipelineSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<AuditTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let audit = match table.remove("audit") {
            None => Vec::new(),
            Some(v) => Vec::<AuditTarget>::deserialize(v).map_err(|e| Error::Config(format!("audit: {e}")))?,
        };
        let experiment = match table.remove("experiment") {
            None => None,
            Some(v) => Some(
                ExperimentConfig::deserialize(v).map_err(|e| Error::Config(format!("experiment: {e}")))?,
            ),
        };
        let pipeline = PipelineSpec::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(e.to_string()))?;
        Ok(PipelineConfig {
            pipeline,
            audit,
            experiment,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (text, _) = read_text(path)?;
        Self::from_toml(&text).map_err(|e| located(path, e))
    }

    /// Audit targets, or every stage when none are listed.
    pub fn targets(&self) -> Vec<AuditTarget> {
        if self.audit.is_empty() {
            self.pipeline
                .stage_names()
                .into_iter()
                .map(AuditTarget::stage)
                .collect()
        } else {
            self.audit.clone()
        }
    }
}

fn read_text(path: &Path) -> Result<(String, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok((text, path.parent().map(Path::to_path_buf).unwrap_or_default()))
}

fn located(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        e => e,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDatasetConfig {
    /// Dataset config, relative to the grid file.
    pub config: PathBuf,
    /// Stages that make the dataset classifier-ready.
    #[serde(default)]
    pub prelude: Vec<StageSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub datasets: Vec<GridDatasetConfig>,
    pub transformers: Vec<StageSpec>,
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl GridConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (text, base) = read_text(path)?;
        let mut c = Self::from_toml(&text).map_err(|e| located(path, e))?;
        c.base_dir = base;
        Ok(c)
    }

    pub fn dataset_path(&self, i: usize) -> PathBuf {
        self.base_dir.join(&self.datasets[i].config)
    }
}

/// A mitigation file: the request plus an optional dataset config path and
/// experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MitigationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(flatten)]
    pub request: MitigationRequest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl MitigationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let dataset = match table.remove("dataset") {
            None => None,
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(Error::Config("dataset: expected a path".into())),
        };
        let experiment = match table.remove("experiment") {
            None => None,
            Some(v) => Some(
                ExperimentConfig::deserialize(v).map_err(|e| Error::Config(format!("experiment: {e}")))?,
            ),
        };
        let known = ["prelude", "upstream", "candidates", "classifier", "metric"];
        if let Some(k) = table.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown field `{k}`")));
        }
        let request =
            MitigationRequest::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(e.to_string()))?;
        Ok(MitigationConfig {
            dataset,
            request,
            experiment,
            base_dir: PathBuf::new(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (text, base) = read_text(path)?;
        let mut c = Self::from_toml(&text).map_err(|e| located(path, e))?;
        c.base_dir = base;
        Ok(c)
    }

    pub fn dataset_path(&self) -> Option<PathBuf> {
        self.dataset.as_ref().map(|d| self.base_dir.join(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::TargetMode;
    use crate::transformers::StageKind;

    #[test]
    fn pipeline_config_round_trip() {
        let c = PipelineConfig::from_toml(
            r#"
            name = "p"
            [[stages]]
            kind = "zscore"
            [[stages]]
            kind = "zscore"
            [[stages]]
            kind = "kbest"
            k = 3
            name = "sb"
            [classifier]
            kind = "logistic_regression"
            [[audit]]
            stage = "sb"
            mode = "replace"
            replacement = { kind = "column_drop", columns = ["a"] }
            [experiment]
            repeats = 3
            "#,
        )
        .unwrap();
        assert_eq!(c.pipeline.stage_names(), vec!["zscore", "zscore_2", "sb"]);
        assert_eq!(c.audit[0].mode, TargetMode::Replace);
        assert_eq!(c.audit[0].replacement.as_ref().unwrap().kind, StageKind::ColumnDrop);
        assert_eq!(c.experiment.as_ref().unwrap().repeats, 3);
        assert_eq!(c.experiment.as_ref().unwrap().train_fraction, 0.7);
    }

    #[test]
    fn unknown_pipeline_key_rejected() {
        let r = PipelineConfig::from_toml(
            "name = \"p\"\nstagez = []\n[classifier]\nkind = \"k_neighbors\"\n",
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn mitigation_config_parses() {
        let c = MitigationConfig::from_toml(
            r#"
            dataset = "../datasets/german.toml"
            metric = "eod"
            upstream = { kind = "random_undersample" }
            candidates = [{ kind = "minmax" }, { kind = "zscore" }]
            classifier = { kind = "k_neighbors" }
            [experiment]
            repeats = 2
            "#,
        )
        .unwrap();
        assert_eq!(c.request.metric, crate::metrics::Metric::Eod);
        assert_eq!(c.request.candidates.len(), 2);
        assert!(c.request.prelude.is_empty());
        assert!(MitigationConfig::from_toml("metric = \"spd\"\ncandidatez = []").is_err());
    }

    #[test]
    fn dataset_config_loads() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.csv"), "x,s,y\n1,a,1\n2,b,0\n?,a,0\n").unwrap();
        let cfg = r#"
            name = "d"
            path = "d.csv"
            label = "y"
            favorable = ["1"]
            sensitive = "s"
            privileged = ["a"]
            include_sensitive = false
            columns = [
              { name = "x", kind = "numeric", allow_missing = true },
              { name = "s", kind = "categorical" },
              { name = "y", kind = "categorical" },
            ]
        "#;
        let p = dir.path().join("d.toml");
        std::fs::write(&p, cfg).unwrap();
        let d = DatasetConfig::read(&p).unwrap().load().unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_names(), vec!["x"]);
        assert_eq!(d.labels(), &[1, 0, 0]);
    }
}
