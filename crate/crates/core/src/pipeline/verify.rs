//! Monte Carlo and round-trip checks of a completed run.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_fits, read_margins, Manifest, RunConfig};
use crate::error::{Error, Result};
use crate::margins::{margin_call_probability, monte_carlo_exceedance, CellKey, Position};
use crate::timeseries::{ChangeDefinition, Frequency};

/// Exceedance frequencies must land within this many standard errors.
pub const PASS_SIGMAS: f64 = 3.0;
/// Largest accepted |P(extreme > margin) − p| for a tabulated margin.
pub const ROUNDTRIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub position: Position,
    pub kind: ChangeDefinition,
    pub frequency: Frequency,
    pub probability: f64,
    pub margin: f64,
    pub mc_frequency: f64,
    pub mc_stderr: f64,
    pub mc_samples: usize,
    pub mc_pass: bool,
    /// |P(extreme > margin) − p| under the fitted distribution.
    pub roundtrip_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub cells: Vec<CellCheck>,
    /// Largest |cdf(quantile(q)) − q| over a probability grid, across fits.
    pub max_quantile_cdf_residual: f64,
    pub passed: usize,
    pub failed: usize,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Checks every margin cell of the run in `cfg.output_path()` and writes
/// `verification.json` next to it.
pub fn verify(cfg: &RunConfig) -> Result<VerificationReport> {
    let dir = cfg.output_path();
    Manifest::load(&dir)?;
    if !dir.join("table3.json").exists() {
        return Err(Error::NoRunArtifacts(dir));
    }
    let fits: BTreeMap<CellKey, _> = read_fits(&dir)?
        .into_iter()
        .map(|e| (e.cell(), e.params.dist()))
        .collect();
    let margins = read_margins(&dir)?;

    let cells = margins
        .rows
        .par_iter()
        .map(|row| {
            let key = CellKey {
                kind: row.kind,
                frequency: row.frequency,
                tail: row.position.tail(),
            };
            let params = fits.get(&key).ok_or_else(|| Error::MissingFit(key.to_string()))?;
            let seed = cfg.derive_seed(&format!("verify/{key}/{}", row.probability));
            let mc = monte_carlo_exceedance(params, row.gev_margin, cfg.mc_samples, seed)?;
            let mc_pass = mc.consistent_with(row.probability, PASS_SIGMAS);
            let roundtrip_residual = (margin_call_probability(params, row.gev_margin) - row.probability).abs();
            Ok(CellCheck {
                position: row.position,
                kind: row.kind,
                frequency: row.frequency,
                probability: row.probability,
                margin: row.gev_margin,
                mc_frequency: mc.frequency,
                mc_stderr: mc.stderr,
                mc_samples: mc.samples,
                mc_pass,
                roundtrip_residual,
                pass: mc_pass && roundtrip_residual <= ROUNDTRIP_TOLERANCE,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    let max_quantile_cdf_residual = fits
        .values()
        .flat_map(|g| grid.iter().map(move |&q| (g.cdf(g.quantile_unchecked(q)) - q).abs()))
        .fold(0.0, f64::max);

    let passed = cells.iter().filter(|c| c.pass).count();
    let report = VerificationReport {
        failed: cells.len() - passed,
        passed,
        cells,
        max_quantile_cdf_residual,
    };
    let path = dir.join("verification.json");
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
