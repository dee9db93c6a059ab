//! Serialized forms of the summary, parameter and analytics tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{Gev, GevParams};
use crate::margins::{CellKey, Tail};
use crate::stats;
use crate::timeseries::{ChangeDefinition, Frequency, SummaryStats};

/// One column of the price-change summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub kind: ChangeDefinition,
    pub frequency: Frequency,
    pub stats: SummaryStats,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

/// Rows `Min … Nobs`, one column per kind and frequency.
pub fn write_summary_csv<W: Write>(entries: &[SummaryEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["Variable".to_string()];
    header.extend(entries.iter().map(|e| format!("{}_{}", e.kind, e.frequency)));
    w.write_record(&header)?;
    for row in SummaryStats::ROW_NAMES {
        let mut rec = vec![row.to_string()];
        for e in entries {
            let s = &e.stats;
            rec.push(match row {
                "Min" => s.min.to_string(),
                "P25" => s.p25.to_string(),
                "Median" => s.median.to_string(),
                "Mean" => s.mean.to_string(),
                "P75" => s.p75.to_string(),
                "Max" => s.max.to_string(),
                "Skewness" => fmt_opt(s.skewness),
                "Kurtosis" => fmt_opt(s.kurtosis),
                "S.D." => s.sd.to_string(),
                _ => s.nobs.to_string(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("summary table", e))?;
    Ok(())
}

/// One fitted tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub kind: ChangeDefinition,
    pub frequency: Frequency,
    pub tail: Tail,
    pub block_size: usize,
    #[serde(flatten)]
    pub params: GevParams,
}

impl FitEntry {
    pub fn cell(&self) -> CellKey {
        CellKey {
            kind: self.kind,
            frequency: self.frequency,
            tail: self.tail,
        }
    }
}

fn panel(tail: Tail) -> &'static str {
    match tail {
        Tail::Right => "A",
        Tail::Left => "B",
        Tail::Common => "C",
    }
}

/// Panels A (right), B (left), C (common); parameter rows with their
/// standard errors underneath; one column per kind and frequency.
pub fn write_fits_csv<W: Write>(entries: &[FitEntry], out: W) -> Result<()> {
    let mut columns: Vec<(ChangeDefinition, Frequency)> = Vec::new();
    for e in entries {
        if !columns.contains(&(e.kind, e.frequency)) {
            columns.push((e.kind, e.frequency));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["panel".to_string(), "parameter".into()];
    header.extend(columns.iter().map(|(k, f)| format!("{k}_{f}")));
    w.write_record(&header)?;
    type Pick = fn(&GevParams) -> String;
    let rows: [(&str, Pick); 8] = [
        ("tau", |p| p.tau.to_string()),
        ("se_tau", |p| fmt_opt(p.se_tau)),
        ("sigma", |p| p.sigma.to_string()),
        ("se_sigma", |p| fmt_opt(p.se_sigma)),
        ("mu", |p| p.mu.to_string()),
        ("se_mu", |p| fmt_opt(p.se_mu)),
        ("n_fit", |p| p.n_fit.to_string()),
        ("loglik", |p| p.loglik.to_string()),
    ];
    for tail in Tail::ALL {
        if !entries.iter().any(|e| e.tail == tail) {
            continue;
        }
        for (name, pick) in rows {
            let mut rec = vec![panel(tail).to_string(), name.to_string()];
            for &(k, f) in &columns {
                let v = entries
                    .iter()
                    .find(|e| e.kind == k && e.frequency == f && e.tail == tail)
                    .map(|e| pick(&e.params))
                    .unwrap_or_default();
                rec.push(v);
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("parameter table", e))?;
    Ok(())
}

/// Empirical CDF of the fitted sample against the fitted CDF, at every
/// sorted sample point.
pub fn write_cdf_csv<W: Write>(sample: &[f64], fitted: &Gev, out: W) -> Result<()> {
    let sorted = stats::sorted_copy(sample);
    let n = sorted.len() as f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "empirical_cdf", "fitted_cdf"])?;
    for (i, x) in sorted.iter().enumerate() {
        w.write_record([x.to_string(), ((i + 1) as f64 / n).to_string(), fitted.cdf(*x).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("cdf data", e))?;
    Ok(())
}

/// Normal-vs-sample quantile pairs at up to `points` evenly spaced levels.
pub fn write_qq_csv<W: Write>(values: &[f64], points: usize, out: W) -> Result<()> {
    let sorted = stats::sorted_copy(values);
    let m = points.min(sorted.len()).max(1);
    let mean = stats::mean(values);
    let sd = stats::sample_sd(values);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["probability", "normal_quantile", "sample_quantile"])?;
    for i in 0..m {
        let q = (i as f64 + 0.5) / m as f64;
        w.write_record([
            q.to_string(),
            (mean + sd * crate::normal::quantile(q)).to_string(),
            stats::quantile_sorted(&sorted, q).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("q-q data", e))?;
    Ok(())
}
