use std::io::Read;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};

use fairstage::config::{sha256_bytes, sha256_file};
use fairstage::datasets::{self, Source};

/// Writes through a sibling temp file so a failure never clobbers `path`.
fn replace_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

fn download(url: &str) -> Result<Vec<u8>> {
    let mut resp = ureq::get(url).call().with_context(|| format!("GET {url}"))?;
    let mut buf = Vec::new();
    resp.body_mut()
        .as_reader()
        .read_to_end(&mut buf)
        .with_context(|| format!("reading {url}"))?;
    Ok(buf)
}

fn ensure_raw(s: &Source, raw_dir: &Path, offline: bool) -> Result<PathBuf> {
    let raw = raw_dir.join(s.raw_file);
    if raw.exists() {
        let found = sha256_file(&raw)?;
        if found == s.raw_sha256 {
            log::info!("{}: cached copy verified", s.name);
            return Ok(raw);
        }
        if offline {
            bail!("{}: checksum mismatch for cached {} (found {found})", s.name, raw.display());
        }
        log::warn!("{}: cached copy does not verify; downloading", s.name);
    } else if offline {
        bail!("{}: {} not present and --offline given", s.name, raw.display());
    }
    let bytes = download(s.url)?;
    let found = sha256_bytes(&bytes);
    if found != s.raw_sha256 {
        bail!("{}: downloaded checksum {found} != expected {}", s.name, s.raw_sha256);
    }
    std::fs::create_dir_all(raw_dir).with_context(|| format!("creating {}", raw_dir.display()))?;
    replace_file(&raw, &bytes)?;
    Ok(raw)
}

fn absolute(p: &Path) -> Result<PathBuf> {
    let abs = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()?.join(p)
    };
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            c => out.push(c),
        }
    }
    Ok(out)
}

/// `target` expressed relative to directory `from`.
fn relative(target: &Path, from: &Path) -> Result<PathBuf> {
    let t = absolute(target)?;
    let f = absolute(from)?;
    let tc: Vec<_> = t.components().collect();
    let fc: Vec<_> = f.components().collect();
    let common = tc.iter().zip(&fc).take_while(|(a, b)| a == b).count();
    let mut out = PathBuf::new();
    for _ in common..fc.len() {
        out.push("..");
    }
    for c in &tc[common..] {
        out.push(c);
    }
    Ok(out)
}

fn prepare(s: &Source, data_dir: &Path, config_dir: &Path, offline: bool) -> Result<()> {
    let raw = ensure_raw(s, &data_dir.join("raw"), offline)?;
    let csv = data_dir.join(format!("{}.csv", s.name));
    let tmp = csv.with_extension("partial");
    let rows = datasets::convert(s.name, &raw, &tmp)?;
    if rows != s.rows {
        let _ = std::fs::remove_file(&tmp);
        bail!("{}: converted {rows} rows, expected {}", s.name, s.rows);
    }
    std::fs::rename(&tmp, &csv).with_context(|| format!("renaming onto {}", csv.display()))?;
    let sha = sha256_file(&csv)?;

    std::fs::create_dir_all(config_dir).with_context(|| format!("creating {}", config_dir.display()))?;
    let cfg = datasets::dataset_config(s.name, &relative(&csv, config_dir)?, Some(sha))?;
    let text = format!(
        "# written by `fairstage fetch-datasets`\n{}",
        cfg.to_toml()?
    );
    let cfg_path = config_dir.join(format!("{}.toml", s.name));
    replace_file(&cfg_path, text.as_bytes())?;
    println!("{:<8} {rows:>6} rows  {}  {}", s.name, csv.display(), cfg_path.display());
    Ok(())
}

pub fn run(names: &[String], data_dir: &Path, config_dir: &Path, offline: bool) -> Result<()> {
    let chosen: Vec<&Source> = if names.is_empty() {
        datasets::SOURCES.iter().collect()
    } else {
        names
            .iter()
            .map(|n| {
                datasets::source(n)
                    .ok_or_else(|| fairstage::Error::Config(format!("unknown dataset `{n}`")).into())
            })
            .collect::<Result<_>>()?
    };
    let mut failed = Vec::new();
    for s in chosen {
        if let Err(e) = prepare(s, data_dir, config_dir, offline) {
            eprintln!("error: {e:#}");
            failed.push(s.name);
        }
    }
    if !failed.is_empty() {
        bail!("could not prepare: {}", failed.join(", "));
    }
    Ok(())
}
