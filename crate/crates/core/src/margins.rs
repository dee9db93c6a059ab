//! Optimal margins from fitted tail distributions.
//!
//! All three positions share one formula. The short side uses the right
//! tail (block maxima), the long side uses the left tail fitted on negated
//! block minima, and the common position uses the pooled sample. In each
//! case the margin is the GEV quantile with exceedance probability `p`:
//!
//! ```text
//! MD = μ + (σ/τ)·[(−ln(1 − p))^(−τ) − 1]
//! ```
//!
//! For the long side, `P(Min < −MD) = P(−Min > MD)`, so fitting `−Min`
//! absorbs the sign flip of the location parameter.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{Gev, GevParams};
use crate::normal;
use crate::timeseries::{ChangeDefinition, Frequency};

/// Direction of a single futures position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

/// Margin position: one side, or a single margin shared by both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Short,
    Long,
    Common,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Short, Position::Long, Position::Common];

    pub fn tail(self) -> Tail {
        match self {
            Position::Short => Tail::Right,
            Position::Long => Tail::Left,
            Position::Common => Tail::Common,
        }
    }

    pub fn panel(self) -> &'static str {
        match self {
            Position::Short => "A",
            Position::Long => "B",
            Position::Common => "C",
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            Position::Short => Some(Side::Short),
            Position::Long => Some(Side::Long),
            Position::Common => None,
        }
    }
}

/// Which block-extreme sample a fit was made on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// Block maxima.
    Right,
    /// Negated block minima.
    Left,
    /// Negated minima pooled with maxima.
    Common,
}

impl Tail {
    pub const ALL: [Tail; 3] = [Tail::Right, Tail::Left, Tail::Common];

    pub fn as_str(self) -> &'static str {
        match self {
            Tail::Right => "right",
            Tail::Left => "left",
            Tail::Common => "common",
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tail::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown tail '{s}'")))
    }
}

/// One (futures kind, frequency, tail) fitting cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub kind: ChangeDefinition,
    pub frequency: Frequency,
    pub tail: Tail,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.kind, self.frequency, self.tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSpec {
    pub probability: f64,
    pub position: Position,
    pub futures_kind: ChangeDefinition,
    pub frequency: Frequency,
}

impl MarginSpec {
    pub fn new(
        probability: f64,
        position: Position,
        futures_kind: ChangeDefinition,
        frequency: Frequency,
    ) -> Result<Self> {
        check_probability(probability)?;
        Ok(MarginSpec {
            probability,
            position,
            futures_kind,
            frequency,
        })
    }

    pub fn cell(&self) -> CellKey {
        CellKey {
            kind: self.futures_kind,
            frequency: self.frequency,
            tail: self.position.tail(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginResult {
    pub gev_margin: f64,
    pub normal_margin: Option<f64>,
    pub params_used: GevParams,
    pub spec: MarginSpec,
}

impl MarginResult {
    pub fn leverage(&self) -> f64 {
        leverage_equivalent(self.gev_margin)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(p))
    }
}

/// Margin (in the units of the fitted data) whose exceedance probability
/// under `params` is `p`.
pub fn optimal_margin(params: &Gev, p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(params.upper_quantile(p))
}

/// Probability that a block extreme exceeds `md`.
pub fn margin_call_probability(params: &Gev, md: f64) -> f64 {
    params.survival(md)
}

/// Margin under a normal model of single-period changes.
///
/// Short: `P(X > MD) = p` gives `MD = mean + sd·z(1−p)`.
/// Long: `P(X < −MD) = p` gives `MD = sd·z(1−p) − mean`.
pub fn normal_margin(mean: f64, sd: f64, p: f64, side: Side) -> Result<f64> {
    check_probability(p)?;
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::InvalidInput(format!("sd must be positive, got {sd}")));
    }
    let z = -normal::quantile(p);
    Ok(match side {
        Side::Short => mean + sd * z,
        Side::Long => sd * z - mean,
    })
}

/// Leverage a margin (in percent of notional) supports, `100 / margin`.
pub fn leverage_equivalent(margin_percent: f64) -> f64 {
    100.0 / margin_percent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub panel: String,
    pub position: Position,
    pub kind: ChangeDefinition,
    pub frequency: Frequency,
    pub probability: f64,
    pub gev_margin: f64,
    pub normal_margin: Option<f64>,
    pub leverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub rows: Vec<MarginRow>,
}

/// Builds the full position × frequency × kind × probability table.
///
/// Rows are ordered by panel (short, long, common), then frequency, kind
/// and probability in the order given. `moments` holds per-observation
/// (mean, sd) in the same scale as the fits; a missing entry leaves the
/// normal baseline empty.
pub fn margin_table(
    kinds: &[ChangeDefinition],
    frequencies: &[Frequency],
    fits: &BTreeMap<CellKey, GevParams>,
    moments: &BTreeMap<(ChangeDefinition, Frequency), (f64, f64)>,
    probabilities: &[f64],
) -> Result<MarginReport> {
    if probabilities.is_empty() {
        return Err(Error::InvalidInput("no margin-call probabilities requested".into()));
    }
    for &p in probabilities {
        check_probability(p)?;
    }
    let mut rows = Vec::new();
    for position in Position::ALL {
        for &frequency in frequencies {
            for &kind in kinds {
                let cell = CellKey {
                    kind,
                    frequency,
                    tail: position.tail(),
                };
                let params = fits
                    .get(&cell)
                    .ok_or_else(|| Error::MissingFit(cell.to_string()))?
                    .dist();
                for &p in probabilities {
                    let gev_margin = optimal_margin(&params, p)?;
                    let normal_margin = match (position.side(), moments.get(&(kind, frequency))) {
                        (Some(side), Some(&(mean, sd))) => Some(normal_margin(mean, sd, p, side)?),
                        _ => None,
                    };
                    rows.push(MarginRow {
                        panel: position.panel().to_string(),
                        position,
                        kind,
                        frequency,
                        probability: p,
                        gev_margin,
                        normal_margin,
                        leverage: leverage_equivalent(gev_margin),
                    });
                }
            }
        }
    }
    Ok(MarginReport { rows })
}

impl MarginReport {
    fn kinds(&self) -> Vec<ChangeDefinition> {
        let mut v: Vec<_> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.kind) {
                v.push(r.kind);
            }
        }
        v
    }

    fn probabilities(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.probability) {
                v.push(r.probability);
            }
        }
        v
    }

    fn lookup(&self, position: Position, frequency: Frequency, kind: ChangeDefinition, p: f64) -> Option<&MarginRow> {
        self.rows.iter().find(|r| {
            r.position == position && r.frequency == frequency && r.kind == kind && r.probability == p
        })
    }

    fn grid(&self) -> Vec<(Position, Frequency)> {
        let mut v = Vec::new();
        for r in &self.rows {
            if !v.contains(&(r.position, r.frequency)) {
                v.push((r.position, r.frequency));
            }
        }
        v
    }

    /// Wide layout: one `gev` row per panel and frequency, followed by a
    /// `normal` row for the one-sided panels, with a column per kind and
    /// probability.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let kinds = self.kinds();
        let probs = self.probabilities();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["panel".to_string(), "frequency".into(), "row".into()];
        for k in &kinds {
            for p in &probs {
                header.push(format!("{k}_{p}"));
            }
        }
        w.write_record(&header)?;
        for (position, frequency) in self.grid() {
            let mut emit = |label: &str, pick: &dyn Fn(&MarginRow) -> Option<f64>| -> Result<()> {
                let mut rec = vec![position.panel().to_string(), frequency.to_string(), label.to_string()];
                for &k in &kinds {
                    for &p in &probs {
                        let v = self.lookup(position, frequency, k, p).and_then(pick);
                        rec.push(v.map(|x| x.to_string()).unwrap_or_default());
                    }
                }
                w.write_record(&rec)?;
                Ok(())
            };
            emit("gev", &|r| Some(r.gev_margin))?;
            if position != Position::Common {
                emit("normal", &|r| r.normal_margin)?;
            }
        }
        w.flush().map_err(|e| Error::io("margin table", e))?;
        Ok(())
    }

    /// Two-decimal text rendering with normal baselines in parentheses.
    pub fn render_text(&self) -> String {
        let kinds = self.kinds();
        let probs = self.probabilities();
        let mut s = String::new();
        let _ = write!(s, "{:<8}", "p");
        for k in &kinds {
            for p in &probs {
                let _ = write!(s, "{:>12}", format!("{}:{p}", &k.as_str()[..4]));
            }
        }
        s.push('\n');
        let mut last_panel = None;
        for (position, frequency) in self.grid() {
            if last_panel != Some(position) {
                let _ = writeln!(s, "Panel {}: {:?} position", position.panel(), position);
                last_panel = Some(position);
            }
            let _ = write!(s, "{:<8}", frequency.as_str());
            for &k in &kinds {
                for &p in &probs {
                    let v = self.lookup(position, frequency, k, p).map(|r| r.gev_margin);
                    let _ = write!(s, "{:>12}", v.map(|x| format!("{x:.2}")).unwrap_or_default());
                }
            }
            s.push('\n');
            if position != Position::Common {
                let _ = write!(s, "{:<8}", "");
                for &k in &kinds {
                    for &p in &probs {
                        let v = self.lookup(position, frequency, k, p).and_then(|r| r.normal_margin);
                        let _ = write!(s, "{:>12}", v.map(|x| format!("({x:.2})")).unwrap_or_default());
                    }
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Exceedance frequency estimated from simulated block extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub frequency: f64,
    /// Binomial standard error `sqrt(f(1 − f)/n)`.
    pub stderr: f64,
    pub samples: usize,
}

impl Exceedance {
    /// Whether `p` lies within `k` standard errors of the estimate.
    pub fn consistent_with(&self, p: f64, k: f64) -> bool {
        (self.frequency - p).abs() <= k * self.stderr
    }
}

pub const MIN_MONTE_CARLO_SAMPLES: usize = 10_000;

/// Fraction of `n` seeded GEV draws exceeding `md`.
pub fn monte_carlo_exceedance(params: &Gev, md: f64, n: usize, seed: u64) -> Result<Exceedance> {
    if n < MIN_MONTE_CARLO_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_MONTE_CARLO_SAMPLES} Monte Carlo samples required, got {n}"
        )));
    }
    let hits = params.sample(n, seed).into_iter().filter(|&x| x > md).count();
    let frequency = hits as f64 / n as f64;
    Ok(Exceedance {
        frequency,
        stderr: (frequency * (1.0 - frequency) / n as f64).sqrt(),
        samples: n,
    })
}
