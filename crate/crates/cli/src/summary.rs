use fairstage::harness::{Aggregate, CellStatus};
use fairstage::report::{Report, ReportBody};

fn cell(a: Option<&Aggregate>) -> String {
    match a {
        Some(Aggregate { mean: Some(m), stderr: Some(s), .. }) => format!("{m:+.4} ± {s:.4}"),
        Some(Aggregate { mean: Some(m), .. }) => format!("{m:+.4}"),
        _ => "undefined".into(),
    }
}

/// Plain-text tables on stdout: stage × metric as mean ± standard error.
pub fn print(r: &Report) {
    let metrics = &r.experiment.metrics;
    match &r.body {
        ReportBody::Audit { run, composition, .. } => {
            println!(
                "pipeline `{}`  repeats {}  seed {}",
                run.pipeline.name, r.experiment.repeats, r.experiment.base_seed
            );
            print!("{:<24}", "global");
            for m in metrics {
                print!(" {:>20}", format!("{}: {}", m, cell(run.global.metrics.get(m))));
            }
            println!("  acc {}", cell(Some(&run.global.accuracy)));
            println!();
            print!("{:<24} {:<8}", "stage", "mode");
            for m in metrics {
                print!(" {:>20}", format!("SF_{}", m.as_str().to_uppercase()));
            }
            println!(" {:>20}", "Δacc");
            for s in &run.stages {
                let mode = format!("{:?}", s.mode).to_lowercase();
                print!("{:<24} {:<8}", s.stage, mode);
                for m in metrics {
                    print!(" {:>20}", cell(s.sf.get(m)));
                }
                println!(" {:>20}", cell(Some(&s.tradeoff.delta_accuracy)));
                if s.failed_repeats > 0 {
                    println!("  ({} of {} repeats failed)", s.failed_repeats, s.repeats.len());
                }
            }
            for a in &composition.agreement {
                if let Some(f) = a.fraction {
                    println!("sign agreement SF vs Δglobal {}: {}/{} ({:.0}%)", a.metric, a.agree, a.compared, 100.0 * f);
                }
            }
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
        }
        ReportBody::Grid { grid, .. } => {
            let ran = grid.cells.iter().filter(|c| c.status == CellStatus::Ran).count();
            println!("{} cells, {ran} ran", grid.cells.len());
            for c in &grid.cells {
                match &c.status {
                    CellStatus::Ran => {
                        let a = c.audit.as_ref().expect("ran cells carry an audit");
                        print!("{:<10} {:<22} {:<20}", c.dataset, c.transformer, c.classifier);
                        for m in metrics {
                            print!(" {:>20}", cell(a.sf.get(m)));
                        }
                        println!();
                    }
                    CellStatus::Skipped { reason } | CellStatus::Failed { reason } => {
                        println!("{:<10} {:<22} {:<20} skipped: {reason}", c.dataset, c.transformer, c.classifier);
                    }
                }
            }
            for (d, cats) in &grid.category_bias {
                let parts: Vec<String> = cats.iter().map(|(k, v)| format!("{k:?} {v:.4}")).collect();
                println!("{d}: mean |SF_SPD| by category: {}", parts.join(", "));
            }
            for s in &grid.soft_checks {
                let tag = if s.holds { "holds" } else { "does not hold" };
                println!("check `{}` {tag}: expected {}, observed {}", s.name, s.expected, s.observed);
            }
        }
        ReportBody::Mitigation { recommendation: rec, .. } => {
            let m = rec.metric;
            println!(
                "upstream `{}`  baseline {}: {}  upstream SF: {}",
                rec.upstream,
                m,
                cell(rec.baseline.get(&m)),
                cell(rec.upstream_sf.get(&m))
            );
            println!("{:<4} {:<20} {:>20} {:>20} {:>8}", "rank", "candidate", m.as_str(), "local SF", "opposes");
            for c in &rec.candidates {
                let rank = c.rank.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
                let opp = match c.opposes_baseline {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "-",
                };
                println!(
                    "{rank:<4} {:<20} {:>20} {:>20} {opp:>8}",
                    c.stage,
                    cell(c.global.get(&m)),
                    cell(c.local_sf.get(&m))
                );
                if let Some(e) = &c.error {
                    println!("     error: {e}");
                }
            }
            println!(
                "winner `{}`; {}",
                rec.winner,
                if rec.mitigates { "mitigates the baseline" } else { "does not beat the baseline" }
            );
        }
    }
}
