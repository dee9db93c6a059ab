//! Price ingestion, resampling, price-change series and Table-1 style
//! summary statistics.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Supported monitoring frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Frequency {
    #[serde(rename = "5min")]
    Min5,
    #[serde(rename = "30min")]
    Min30,
    #[serde(rename = "1h")]
    Hour1,
    #[serde(rename = "8h")]
    Hour8,
    #[serde(rename = "1d")]
    Day1,
}

impl Frequency {
    pub const ALL: [Frequency; 5] = [
        Frequency::Min5,
        Frequency::Min30,
        Frequency::Hour1,
        Frequency::Hour8,
        Frequency::Day1,
    ];

    pub fn minutes(self) -> i64 {
        match self {
            Frequency::Min5 => 5,
            Frequency::Min30 => 30,
            Frequency::Hour1 => 60,
            Frequency::Hour8 => 480,
            Frequency::Day1 => 1440,
        }
    }

    pub fn millis(self) -> i64 {
        self.minutes() * 60_000
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Min5 => "5min",
            Frequency::Min30 => "30min",
            Frequency::Hour1 => "1h",
            Frequency::Hour8 => "8h",
            Frequency::Day1 => "1d",
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Frequency::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnsupportedFrequency(s.to_string()))
    }
}

/// What to do when consecutive timestamps are more than one interval apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapPolicy {
    #[default]
    Reject,
    /// Insert the last observed price at every missing timestamp.
    ForwardFill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    frequency: Frequency,
    points: Vec<(DateTime<Utc>, f64)>,
}

impl PriceSeries {
    /// Builds a series from points that are already on a regular grid.
    pub fn new(frequency: Frequency, points: Vec<(DateTime<Utc>, f64)>) -> Result<Self> {
        for (i, &(_, p)) in points.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-positive price at index {i}"
                )));
            }
        }
        for w in points.windows(2) {
            let gap = (w[1].0 - w[0].0).num_milliseconds();
            if gap != frequency.millis() {
                return Err(Error::FrequencyMismatch {
                    after: w[0].0.to_rfc3339(),
                    gap_ms: gap,
                    frequency: frequency.to_string(),
                });
            }
        }
        Ok(PriceSeries { frequency, points })
    }

    /// Regular series starting at `start` with the given prices.
    pub fn from_prices(frequency: Frequency, start: DateTime<Utc>, prices: &[f64]) -> Result<Self> {
        let step = chrono::Duration::milliseconds(frequency.millis());
        let points = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| (start + step * i as i32, p))
            .collect();
        PriceSeries::new(frequency, points)
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn points(&self) -> &[(DateTime<Utc>, f64)] {
        &self.points
    }

    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(_, p)| p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Outcome details of a CSV ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub filled: usize,
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ms) = raw.parse::<i64>() {
        return Utc.timestamp_millis_opt(ms).single();
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    let naive = raw.trim_end_matches('Z');
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(naive, fmt).ok())
        .map(|n| n.and_utc())
}

/// Loads a `timestamp,price` CSV, rejecting gaps.
pub fn load_price_csv(path: impl AsRef<Path>, frequency: Frequency) -> Result<PriceSeries> {
    load_price_csv_with(path, frequency, GapPolicy::Reject).map(|(s, _)| s)
}

pub fn load_price_csv_with(
    path: impl AsRef<Path>,
    frequency: Frequency,
    gaps: GapPolicy,
) -> Result<(PriceSeries, IngestReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_price_csv(file, frequency, gaps)
}

/// Parses price CSV content from any reader. Line numbers in errors count
/// the header as line 1.
pub fn read_price_csv<R: std::io::Read>(
    reader: R,
    frequency: Frequency,
    gaps: GapPolicy,
) -> Result<(PriceSeries, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    // (timestamp, price, source line)
    let mut rows: Vec<(DateTime<Utc>, f64, u64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| Error::MalformedRow {
            line,
            reason: format!("unparseable timestamp '{}'", &record[0]),
        })?;
        let price: f64 = record[1].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("unparseable price '{}'", &record[1]),
        })?;
        if !price.is_finite() {
            return Err(Error::MalformedRow {
                line,
                reason: "price is not finite".into(),
            });
        }
        if price <= 0.0 {
            return Err(Error::NonPositivePrice { line });
        }
        rows.push((ts, price, line));
    }

    rows.sort_by_key(|r| r.0);
    let step = frequency.millis();
    let mut report = IngestReport {
        rows: rows.len(),
        filled: 0,
    };
    let mut points = Vec::with_capacity(rows.len());
    for (idx, &(ts, price, line)) in rows.iter().enumerate() {
        if idx > 0 {
            let (prev_ts, prev_price, _) = rows[idx - 1];
            let gap = (ts - prev_ts).num_milliseconds();
            if gap == 0 {
                return Err(Error::DuplicateTimestamp { line });
            }
            if gap != step {
                let fillable = gap % step == 0 && gaps == GapPolicy::ForwardFill;
                if !fillable {
                    return Err(Error::FrequencyMismatch {
                        after: prev_ts.to_rfc3339(),
                        gap_ms: gap,
                        frequency: frequency.to_string(),
                    });
                }
                let missing = gap / step - 1;
                for k in 1..=missing {
                    points.push((prev_ts + chrono::Duration::milliseconds(k * step), prev_price));
                }
                report.filled += missing as usize;
            }
        }
        points.push((ts, price));
    }
    Ok((PriceSeries { frequency, points }, report))
}

/// Keeps every k-th point, k = target / source, anchored at the first point.
pub fn resample(series: &PriceSeries, target: Frequency) -> Result<PriceSeries> {
    if series.is_empty() {
        return Err(Error::InvalidInput("cannot resample an empty series".into()));
    }
    let (src, dst) = (series.frequency.minutes(), target.minutes());
    if dst < src || dst % src != 0 {
        return Err(Error::InvalidInput(format!(
            "{target} is not an integer multiple of {}",
            series.frequency
        )));
    }
    let k = (dst / src) as usize;
    Ok(PriceSeries {
        frequency: target,
        points: series.points.iter().step_by(k).copied().collect(),
    })
}

/// How a percentage price change is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeDefinition {
    /// `F_t / F_{t−1} − 1`, the USD-settled contract.
    Standard,
    /// `1 − F_{t−1} / F_t`, the change in the coin value of one USD of
    /// notional, which is what an inverse contract settles on.
    Perpetual,
}

impl ChangeDefinition {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeDefinition::Standard => "standard",
            ChangeDefinition::Perpetual => "perpetual",
        }
    }
}

impl fmt::Display for ChangeDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChangeDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(ChangeDefinition::Standard),
            "perpetual" => Ok(ChangeDefinition::Perpetual),
            other => Err(Error::InvalidInput(format!("unknown futures kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSeries {
    pub definition: ChangeDefinition,
    pub scale: f64,
    pub values: Vec<f64>,
}

pub const DEFAULT_SCALE: f64 = 100.0;

pub fn changes(series: &PriceSeries, definition: ChangeDefinition, scale: f64) -> Result<ChangeSeries> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
    }
    let values = series
        .points
        .windows(2)
        .map(|w| {
            let (prev, cur) = (w[0].1, w[1].1);
            match definition {
                ChangeDefinition::Standard => scale * (cur / prev - 1.0),
                ChangeDefinition::Perpetual => scale * (1.0 - prev / cur),
            }
        })
        .collect();
    Ok(ChangeSeries {
        definition,
        scale,
        values,
    })
}

/// Distributional summary of a change series. Kurtosis is raw (a normal
/// sample gives 3); `sd` uses the n−1 estimator; quartiles interpolate
/// linearly between order statistics. Skewness and kurtosis are `None` when
/// the series is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    #[serde(rename = "Min")]
    pub min: f64,
    #[serde(rename = "P25")]
    pub p25: f64,
    #[serde(rename = "Median")]
    pub median: f64,
    #[serde(rename = "Mean")]
    pub mean: f64,
    #[serde(rename = "P75")]
    pub p75: f64,
    #[serde(rename = "Max")]
    pub max: f64,
    #[serde(rename = "Skewness")]
    pub skewness: Option<f64>,
    #[serde(rename = "Kurtosis")]
    pub kurtosis: Option<f64>,
    #[serde(rename = "S.D.")]
    pub sd: f64,
    #[serde(rename = "Nobs")]
    pub nobs: usize,
}

impl SummaryStats {
    pub const ROW_NAMES: [&'static str; 10] = [
        "Min", "P25", "Median", "Mean", "P75", "Max", "Skewness", "Kurtosis", "S.D.", "Nobs",
    ];
}

pub fn summarize(changes: &ChangeSeries) -> Result<SummaryStats> {
    summarize_values(&changes.values)
}

pub fn summarize_values(values: &[f64]) -> Result<SummaryStats> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let sorted = stats::sorted_copy(values);
    let (m2, m3, m4) = stats::central_moments(values);
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(SummaryStats {
        min: sorted[0],
        p25: stats::quantile_sorted(&sorted, 0.25),
        median: stats::quantile_sorted(&sorted, 0.5),
        mean: stats::mean(values),
        p75: stats::quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        skewness,
        kurtosis,
        sd: if m2 > 0.0 { stats::sample_sd(values) } else { 0.0 },
        nobs: values.len(),
    })
}
