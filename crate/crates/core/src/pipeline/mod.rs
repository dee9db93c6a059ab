//! End-to-end driver: ingestion, summaries, fits, margin tables, daily
//! analytics and the run manifest.

mod config;
mod tables;
mod verify;

pub use config::{derive_seed, RunConfig};
pub use tables::{FitEntry, SummaryEntry};
pub use verify::{verify, CellCheck, VerificationReport};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{self, AnalyticsSummary};
use crate::error::{Error, Result};
use crate::extremes::{block_extremes, BlockExtremes};
use crate::gev::{self, GevParams};
use crate::margins::{margin_table, CellKey, MarginReport, Tail};
use crate::timeseries::{self, ChangeDefinition, ChangeSeries, Frequency, IngestReport, SummaryStats};

pub const MANIFEST: &str = "manifest.json";
const QQ_POINTS: usize = 1000;

/// Change series, summary and block extremes for one kind and frequency.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub kind: ChangeDefinition,
    pub frequency: Frequency,
    pub changes: ChangeSeries,
    pub summary: SummaryStats,
    pub extremes: BlockExtremes,
}

impl Prepared {
    pub fn tail_sample(&self, tail: Tail) -> Vec<f64> {
        match tail {
            Tail::Right => self.extremes.maxima.clone(),
            Tail::Left => self.extremes.negated_minima(),
            Tail::Common => self.extremes.common.clone(),
        }
    }
}

/// Loads prices and builds every (kind, frequency) cell in config order.
pub fn prepare(cfg: &RunConfig) -> Result<(Vec<Prepared>, IngestReport)> {
    let (prices, ingest) =
        timeseries::load_price_csv_with(cfg.price_path(), cfg.price_frequency, cfg.gap_policy)?;
    let mut out = Vec::new();
    for &frequency in &cfg.frequencies {
        let series = timeseries::resample(&prices, frequency)?;
        for &kind in &cfg.futures_kinds {
            let label = format!("{kind}_{frequency}");
            let build = || -> Result<Prepared> {
                let changes = timeseries::changes(&series, kind, cfg.scale)?;
                let summary = timeseries::summarize(&changes)?;
                let extremes = block_extremes(&changes, cfg.block_size(frequency))?;
                Ok(Prepared {
                    kind,
                    frequency,
                    changes,
                    summary,
                    extremes,
                })
            };
            out.push(build().map_err(|e| e.in_cell(label))?);
        }
    }
    Ok((out, ingest))
}

pub fn summary_entries(prepared: &[Prepared]) -> Vec<SummaryEntry> {
    prepared
        .iter()
        .map(|p| SummaryEntry {
            kind: p.kind,
            frequency: p.frequency,
            stats: p.summary.clone(),
        })
        .collect()
}

/// Per-observation (mean, sd) for the normal baseline.
pub fn moments(prepared: &[Prepared]) -> BTreeMap<(ChangeDefinition, Frequency), (f64, f64)> {
    prepared
        .iter()
        .map(|p| ((p.kind, p.frequency), (p.summary.mean, p.summary.sd)))
        .collect()
}

/// Fits every tail of every prepared cell. Cells run in parallel; results
/// come back in (frequency, kind, tail) order.
pub fn fit_all(prepared: &[Prepared]) -> Vec<(CellKey, usize, Vec<f64>, Result<GevParams>)> {
    let jobs: Vec<(&Prepared, Tail)> = prepared
        .iter()
        .flat_map(|p| Tail::ALL.into_iter().map(move |t| (p, t)))
        .collect();
    jobs.par_iter()
        .map(|&(p, tail)| {
            let key = CellKey {
                kind: p.kind,
                frequency: p.frequency,
                tail,
            };
            let sample = p.tail_sample(tail);
            let res = gev::fit(&sample);
            (key, p.extremes.block_size, sample, res)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub ingest: IngestReport,
    pub failures: Vec<Failure>,
    pub leverage_at_cap: Option<(usize, usize)>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(Error::NoRunArtifacts(dir.to_path_buf()));
        }
        let text = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes output files and remembers their digests.
struct OutputWriter {
    dir: PathBuf,
    records: Vec<FileRecord>,
}

impl OutputWriter {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputWriter {
            dir,
            records: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        self.records.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.put(name, buf)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.put(name, buf)
    }
}

fn input_record(label: &Path, path: &Path) -> Result<FileRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileRecord {
        path: label.to_string_lossy().into_owned(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len(),
    })
}

fn write_summary(out: &mut OutputWriter, prepared: &[Prepared]) -> Result<()> {
    let entries = summary_entries(prepared);
    out.csv("table1.csv", |b| tables::write_summary_csv(&entries, b))?;
    out.json("table1.json", &entries)?;
    for p in prepared {
        out.csv(&format!("qq_{}_{}.csv", p.kind, p.frequency), |b| {
            tables::write_qq_csv(&p.changes.values, QQ_POINTS, b)
        })?;
    }
    Ok(())
}

/// Writes the parameter table and CDF plot data for the successful fits and
/// returns them keyed by cell, along with any failures.
fn write_fits(
    out: &mut OutputWriter,
    prepared: &[Prepared],
) -> Result<(BTreeMap<CellKey, GevParams>, Vec<(CellKey, Error)>)> {
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut fits = BTreeMap::new();
    for (key, block_size, sample, res) in fit_all(prepared) {
        match res {
            Ok(params) => {
                out.csv(&format!("cdf_{key}.csv"), |b| tables::write_cdf_csv(&sample, &params.dist(), b))?;
                entries.push(FitEntry {
                    kind: key.kind,
                    frequency: key.frequency,
                    tail: key.tail,
                    block_size,
                    params: params.clone(),
                });
                fits.insert(key, params);
            }
            Err(e) => failures.push((key, e)),
        }
    }
    out.csv("table2.csv", |b| tables::write_fits_csv(&entries, b))?;
    out.json("table2.json", &entries)?;
    Ok((fits, failures))
}

fn write_margins(
    out: &mut OutputWriter,
    cfg: &RunConfig,
    prepared: &[Prepared],
    fits: &BTreeMap<CellKey, GevParams>,
) -> Result<MarginReport> {
    let report = margin_table(
        &cfg.futures_kinds,
        &cfg.frequencies,
        fits,
        &moments(prepared),
        &cfg.probabilities,
    )?;
    out.csv("table3.csv", |b| report.write_csv(b))?;
    out.json("table3.json", &report)?;
    Ok(report)
}

fn write_analytics(out: &mut OutputWriter, cfg: &RunConfig, ohlcv: &Path) -> Result<AnalyticsSummary> {
    let days = analytics::load_ohlcv_csv(ohlcv)?;
    let summary = analytics::analytics_summary(&days, cfg.leverage_cap)?;
    out.csv("table4.csv", |b| summary.write_csv(b))?;
    out.json("table4.json", &summary)?;
    out.csv("speculation_series.csv", |b| {
        analytics::write_series_csv(&days, cfg.leverage_cap, b)
    })?;
    Ok(summary)
}

/// Which tables a command produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Summarize,
    Fit,
    Margins,
    Analytics,
}

/// Runs a single stage, writing only its own tables. Returns the written
/// file names.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut out = OutputWriter::new(cfg.output_path())?;
    match stage {
        Stage::Summarize => {
            let (prepared, _) = prepare(cfg)?;
            write_summary(&mut out, &prepared)?;
        }
        Stage::Fit => {
            let (prepared, _) = prepare(cfg)?;
            let (_, failures) = write_fits(&mut out, &prepared)?;
            first_failure(failures)?;
        }
        Stage::Margins => {
            let (prepared, _) = prepare(cfg)?;
            let mut fits = BTreeMap::new();
            for (key, _, _, res) in fit_all(&prepared) {
                fits.insert(key, res.map_err(|e| e.in_cell(key.to_string()))?);
            }
            write_margins(&mut out, cfg, &prepared, &fits)?;
        }
        Stage::Analytics => {
            let ohlcv = cfg
                .ohlcv_path()
                .ok_or_else(|| Error::Config("ohlcv_file is required for analytics".into()))?;
            write_analytics(&mut out, cfg, &ohlcv)?;
        }
    }
    Ok(out.records.into_iter().map(|r| r.path).collect())
}

fn first_failure(failures: Vec<(CellKey, Error)>) -> Result<()> {
    match failures.into_iter().next() {
        None => Ok(()),
        Some((key, e)) => Err(e.in_cell(key.to_string())),
    }
}

/// Full run: all four tables, plot data and `manifest.json`.
///
/// When some fits fail, everything that could be computed is still
/// written, the manifest records the failures with status `failed`, and the
/// first failing cell is returned as the error.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let mut out = OutputWriter::new(cfg.output_path())?;
    let mut inputs = vec![input_record(&cfg.price_file, &cfg.price_path())?];
    if let (Some(label), Some(path)) = (&cfg.ohlcv_file, cfg.ohlcv_path()) {
        inputs.push(input_record(label, &path)?);
    }

    let (prepared, ingest) = prepare(cfg)?;
    write_summary(&mut out, &prepared)?;
    let (fits, failures) = write_fits(&mut out, &prepared)?;
    if failures.is_empty() {
        write_margins(&mut out, cfg, &prepared, &fits)?;
    }
    let leverage_at_cap = match cfg.ohlcv_path() {
        Some(path) => {
            let s = write_analytics(&mut out, cfg, &path)?;
            Some((s.long_at_cap, s.short_at_cap))
        }
        None => None,
    };

    let mut outputs = out.records.clone();
    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: if failures.is_empty() { "ok" } else { "failed" }.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        inputs,
        outputs,
        ingest,
        failures: failures
            .iter()
            .map(|(k, e)| Failure {
                cell: k.to_string(),
                error: e.to_string(),
            })
            .collect(),
        leverage_at_cap,
    };
    out.json(MANIFEST, &manifest)?;
    first_failure(failures)?;
    Ok(manifest)
}

/// Reads back `table2.json` from a run directory.
pub fn read_fits(dir: &Path) -> Result<Vec<FitEntry>> {
    read_json(&dir.join("table2.json"))
}

/// Reads back `table3.json` from a run directory.
pub fn read_margins(dir: &Path) -> Result<MarginReport> {
    read_json(&dir.join("table3.json"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}
