use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fairstage::classifiers::ClassifierSpec;
use fairstage::config::{DatasetConfig, GridConfig, MitigationConfig, PipelineConfig};
use fairstage::data::Dataset;
use fairstage::harness::{self, AuditTarget, ExperimentConfig, GridDataset};
use fairstage::metrics::Metric;
use fairstage::report::{DatasetFingerprint, Report, ReportBody};
use fairstage::transformers::StageSpec;

mod fetch;
mod summary;

#[derive(Parser)]
#[command(name = "fairstage", version, about = "Stage-level fairness audits for tabular ML pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the stages of one pipeline on one dataset.
    Audit(AuditArgs),
    /// Audit every transformer × classifier on every dataset of a grid file.
    Grid(GridArgs),
    /// Rank downstream candidates that offset an upstream stage's bias.
    Mitigate(MitigateArgs),
    /// Download (or verify cached) benchmark datasets and write their configs.
    FetchDatasets(FetchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Args)]
struct Common {
    /// Number of repeated splits.
    #[arg(long)]
    repeats: Option<usize>,
    /// Base seed; repeat r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Leave the timestamp out of the report.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Restrict to these metrics (repeatable).
    #[arg(long, value_parser = parse_metric)]
    metric: Vec<Metric>,
    /// Audit only these stages (repeatable); defaults to the config's list.
    #[arg(long)]
    stage: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Only these datasets, by name (repeatable).
    #[arg(long)]
    dataset: Vec<String>,
    /// Replace the grid's transformers with these kinds (repeatable).
    #[arg(long)]
    transformer: Vec<String>,
    /// Replace the grid's classifiers with these kinds (repeatable).
    #[arg(long)]
    classifier: Vec<String>,
    #[arg(long, value_parser = parse_metric)]
    metric: Vec<Metric>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MitigateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Dataset config; overrides the one named in the mitigation file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Ranking metric.
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
    /// Comma-separated candidate kinds replacing the file's list.
    #[arg(long)]
    candidates: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FetchArgs {
    /// Datasets to fetch; all known ones when omitted.
    names: Vec<String>,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "configs/datasets")]
    config_dir: PathBuf,
    /// Never touch the network; cached raw files must verify.
    #[arg(long)]
    offline: bool,
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    Metric::ALL
        .into_iter()
        .find(|m| m.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown metric `{s}` (spd, eod, aod, erd)"))
}

fn experiment(base: Option<ExperimentConfig>, c: &Common, metrics: &[Metric]) -> fairstage::Result<ExperimentConfig> {
    let mut e = base.unwrap_or_default();
    if let Some(r) = c.repeats {
        e.repeats = r;
    }
    if let Some(s) = c.seed {
        e.base_seed = s;
    }
    if let Some(f) = c.train_fraction {
        e.train_fraction = f;
    }
    if !metrics.is_empty() {
        e.metrics = metrics.to_vec();
    }
    e.jobs = c.jobs;
    e.check()?;
    Ok(e)
}

fn load_dataset(path: &Path) -> Result<(DatasetConfig, Dataset)> {
    let cfg = DatasetConfig::read(path)?;
    let d = cfg
        .load()
        .with_context(|| format!("loading dataset `{}`", cfg.name))?;
    Ok((cfg, d))
}

fn write_report(mut report: Report, c: &Common) -> Result<Report> {
    if !c.no_timestamp {
        report.timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }
    std::fs::create_dir_all(&c.out_dir).with_context(|| format!("creating {}", c.out_dir.display()))?;
    let kind = report.kind();
    if matches!(c.format, Format::Json | Format::Both) {
        let path = c.out_dir.join(format!("{kind}.json"));
        std::fs::write(&path, report.to_json()?).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
    }
    if matches!(c.format, Format::Csv | Format::Both) {
        for (stem, text) in report.tables()? {
            let path = c.out_dir.join(format!("{kind}_{stem}.csv"));
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            log::info!("wrote {}", path.display());
        }
    }
    Ok(report)
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let pc = PipelineConfig::read(&a.pipeline)?;
    let cfg = experiment(pc.experiment.clone(), &a.common, &a.metric)?;
    let (dc, d) = load_dataset(&a.dataset)?;
    let targets: Vec<AuditTarget> = if a.stage.is_empty() {
        pc.targets()
    } else {
        a.stage
            .iter()
            .map(|s| {
                pc.audit
                    .iter()
                    .find(|t| &t.stage == s)
                    .cloned()
                    .unwrap_or_else(|| AuditTarget::stage(s.clone()))
            })
            .collect()
    };
    let run = harness::run_stage_audit(&d, &pc.pipeline, &targets, &cfg)?;
    let composition = harness::composition_of(&run, &cfg.metrics);
    let report = Report::new(
        vec![DatasetFingerprint::of(&dc, &d)],
        cfg,
        ReportBody::Audit {
            pipeline: pc.pipeline,
            targets,
            run,
            composition,
        },
    );
    let report = write_report(report, &a.common)?;
    summary::print(&report);
    Ok(())
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let mut gc = GridConfig::read(&a.grid)?;
    let cfg = experiment(gc.experiment.clone(), &a.common, &a.metric)?;
    if !a.transformer.is_empty() {
        gc.transformers = a
            .transformer
            .iter()
            .map(|k| StageSpec::of_kind(k))
            .collect::<fairstage::Result<_>>()?;
    }
    if !a.classifier.is_empty() {
        gc.classifiers = a
            .classifier
            .iter()
            .map(|k| ClassifierSpec::of_kind(k))
            .collect::<fairstage::Result<_>>()?;
    }
    let mut loaded = Vec::new();
    for i in 0..gc.datasets.len() {
        let (dc, d) = load_dataset(&gc.dataset_path(i))?;
        if a.dataset.is_empty() || a.dataset.contains(&dc.name) {
            loaded.push((dc, d, gc.datasets[i].prelude.clone()));
        }
    }
    if loaded.is_empty() {
        return Err(fairstage::Error::Config("no dataset left after --dataset filtering".into()).into());
    }
    let grid_datasets: Vec<GridDataset> = loaded
        .iter()
        .map(|(dc, d, prelude)| GridDataset {
            name: dc.name.clone(),
            dataset: d,
            prelude: prelude.clone(),
        })
        .collect();
    let grid = harness::run_transformer_grid(&grid_datasets, &gc.transformers, &gc.classifiers, &cfg)?;
    let report = Report::new(
        loaded.iter().map(|(dc, d, _)| DatasetFingerprint::of(dc, d)).collect(),
        cfg,
        ReportBody::Grid {
            transformers: gc.transformers,
            classifiers: gc.classifiers,
            grid,
        },
    );
    let report = write_report(report, &a.common)?;
    summary::print(&report);
    Ok(())
}

fn cmd_mitigate(a: MitigateArgs) -> Result<()> {
    let mut mc = MitigationConfig::read(&a.config)?;
    if let Some(m) = a.metric {
        mc.request.metric = m;
    }
    if let Some(list) = &a.candidates {
        mc.request.candidates = list
            .split(',')
            .map(str::trim)
            .filter(|k| !k.is_empty())
            .map(StageSpec::of_kind)
            .collect::<fairstage::Result<_>>()?;
    }
    let cfg = experiment(mc.experiment.clone(), &a.common, &[])?;
    let path = a
        .dataset
        .clone()
        .or_else(|| mc.dataset_path())
        .ok_or_else(|| fairstage::Error::Config("no dataset: pass --dataset or set `dataset` in the file".into()))?;
    let (dc, d) = load_dataset(&path)?;
    let recommendation = harness::recommend_downstream(&d, &mc.request, &cfg)?;
    let report = Report::new(
        vec![DatasetFingerprint::of(&dc, &d)],
        cfg,
        ReportBody::Mitigation {
            request: mc.request,
            recommendation,
        },
    );
    let report = write_report(report, &a.common)?;
    summary::print(&report);
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(fe) = cause.downcast_ref::<fairstage::Error>() {
            if let fairstage::Error::AllRepeatsFailed(_) = fe {
                return 3;
            }
            if fe.is_validation() {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Audit(a) => cmd_audit(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Mitigate(a) => cmd_mitigate(a),
        Command::FetchDatasets(a) => fetch::run(&a.names, &a.data_dir, &a.config_dir, a.offline),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
