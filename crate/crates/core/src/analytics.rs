//! Inverse-contract payoffs, liquidation triggers and daily leverage /
//! speculation metrics.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::Side;
use crate::stats;

pub const DEFAULT_LEVERAGE_CAP: f64 = 100.0;

/// Coin-denominated payoff of an inverse contract with USD notional
/// `notional` entered at `f_enter` and closed at `f_exit`.
pub fn payoff(side: Side, notional: f64, f_enter: f64, f_exit: f64) -> Result<f64> {
    if !(f_enter > 0.0 && f_exit > 0.0) {
        return Err(Error::InvalidInput("prices must be positive".into()));
    }
    if !(notional > 0.0) {
        return Err(Error::InvalidInput("notional must be positive".into()));
    }
    let long = notional / f_enter - notional / f_exit;
    Ok(match side {
        Side::Long => long,
        Side::Short => -long,
    })
}

/// Price at which a position opened at `f_enter` with `leverage` loses its
/// whole margin of `1/(L·F_enter)` coins per USD.
pub fn trigger_price(side: Side, f_enter: f64, leverage: f64) -> Result<f64> {
    if !(f_enter > 0.0) {
        return Err(Error::InvalidInput("entry price must be positive".into()));
    }
    match side {
        Side::Long if leverage > 0.0 => Ok(f_enter * leverage / (leverage + 1.0)),
        Side::Long => Err(Error::InvalidInput(format!("leverage must be positive, got {leverage}"))),
        Side::Short if leverage > 1.0 => Ok(f_enter * leverage / (leverage - 1.0)),
        Side::Short => Err(Error::NoFiniteLiquidation(leverage)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiquidationDay {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    pub open_interest: f64,
    pub long_liq: f64,
    pub short_liq: f64,
}

impl LiquidationDay {
    pub fn validate(&self) -> Result<()> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput(format!("{}: prices must be positive", self.date)));
        }
        let (lo, hi) = (self.open.min(self.close), self.open.max(self.close));
        if !(self.low <= lo && hi <= self.high) {
            return Err(Error::InvalidInput(format!(
                "{}: OHLC out of order (low {} open {} close {} high {})",
                self.date, self.low, self.open, self.close, self.high
            )));
        }
        if !(self.open_interest > 0.0) {
            return Err(Error::InvalidInput(format!("{}: open interest must be positive", self.date)));
        }
        if self.volume < 0.0 || self.long_liq < 0.0 || self.short_liq < 0.0 {
            return Err(Error::InvalidInput(format!("{}: volumes must be non-negative", self.date)));
        }
        Ok(())
    }

    /// `(high − open)/open`
    pub fn r_max(&self) -> f64 {
        (self.high - self.open) / self.open
    }

    /// `(low − open)/open`
    pub fn r_min(&self) -> f64 {
        (self.low - self.open) / self.open
    }
}

/// Reads the `date,open,high,low,close,volume,open_interest,long_liq,short_liq`
/// CSV.
pub fn load_ohlcv_csv(path: impl AsRef<Path>) -> Result<Vec<LiquidationDay>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ohlcv_csv(file)
}

pub fn read_ohlcv_csv<R: std::io::Read>(reader: R) -> Result<Vec<LiquidationDay>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut days = Vec::new();
    for (i, row) in rdr.deserialize::<LiquidationDay>().enumerate() {
        let line = i as u64 + 2;
        let day = row.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        day.validate().map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        days.push(day);
    }
    Ok(days)
}

/// A leverage estimate, flagged when the cap was applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leverage {
    pub value: f64,
    pub at_cap: bool,
}

impl Leverage {
    fn capped(raw: f64, cap: f64) -> Self {
        if raw.is_finite() && raw < cap {
            Leverage {
                value: raw,
                at_cap: false,
            }
        } else {
            Leverage {
                value: cap,
                at_cap: true,
            }
        }
    }
}

/// Leverage at which the day's low (long) or high (short), reached from the
/// open, would exactly exhaust the margin.
pub fn implied_leverage(day: &LiquidationDay, cap: f64) -> Result<(Leverage, Leverage)> {
    if !(cap > 1.0) {
        return Err(Error::InvalidInput(format!("leverage cap must exceed 1, got {cap}")));
    }
    day.validate()?;
    // −(1 + r)/r with r = (low − open)/open, written without forming r.
    let long = if day.low == day.open {
        f64::INFINITY
    } else {
        day.low / (day.open - day.low)
    };
    let short = if day.high == day.open {
        f64::INFINITY
    } else {
        day.high / (day.high - day.open)
    };
    Ok((Leverage::capped(long, cap), Leverage::capped(short, cap)))
}

/// Trading volume over open interest.
pub fn speculation_index(day: &LiquidationDay) -> Result<f64> {
    if !(day.open_interest > 0.0) {
        return Err(Error::InvalidInput(format!("{}: zero open interest", day.date)));
    }
    Ok(day.volume / day.open_interest)
}

/// Long and short liquidation volume as fractions of open interest. Values
/// above 1 are legitimate when positions churn within the day.
pub fn liquidation_percentages(day: &LiquidationDay) -> Result<(f64, f64)> {
    if !(day.open_interest > 0.0) {
        return Err(Error::InvalidInput(format!("{}: zero open interest", day.date)));
    }
    Ok((day.long_liq / day.open_interest, day.short_liq / day.open_interest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub date: NaiveDate,
    pub r_max: f64,
    pub r_min: f64,
    pub si: f64,
    pub p_long: f64,
    pub p_short: f64,
    pub lev_long: Leverage,
    pub lev_short: Leverage,
}

pub fn day_metrics(day: &LiquidationDay, cap: f64) -> Result<DayMetrics> {
    let (lev_long, lev_short) = implied_leverage(day, cap)?;
    let (p_long, p_short) = liquidation_percentages(day)?;
    Ok(DayMetrics {
        date: day.date,
        r_max: day.r_max(),
        r_min: day.r_min(),
        si: speculation_index(day)?,
        p_long,
        p_short,
        lev_long,
        lev_short,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub nobs: usize,
}

impl ColumnStats {
    fn of(values: &[f64]) -> Self {
        let sorted = stats::sorted_copy(values);
        ColumnStats {
            min: sorted[0],
            median: stats::quantile_sorted(&sorted, 0.5),
            mean: stats::mean(values),
            max: sorted[sorted.len() - 1],
            nobs: values.len(),
        }
    }
}

/// Table of min/median/mean/max/Nobs per metric. Liquidation volumes are in
/// millions of USD and liquidation ratios in percent; everything else is in
/// its natural unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsSummary {
    pub columns: Vec<(String, ColumnStats)>,
    pub long_at_cap: usize,
    pub short_at_cap: usize,
}

impl AnalyticsSummary {
    pub const COLUMNS: [&'static str; 9] = [
        "r_min", "r_max", "long_liq_m", "short_liq_m", "SI", "p_long_pct", "p_short_pct", "L_long", "L_short",
    ];
    pub const ROWS: [&'static str; 5] = ["min", "median", "mean", "max", "Nobs"];

    pub fn column(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["Variables".to_string()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for row in Self::ROWS {
            let mut rec = vec![row.to_string()];
            for (_, s) in &self.columns {
                rec.push(match row {
                    "min" => s.min.to_string(),
                    "median" => s.median.to_string(),
                    "mean" => s.mean.to_string(),
                    "max" => s.max.to_string(),
                    _ => s.nobs.to_string(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("analytics table", e))?;
        Ok(())
    }
}

pub fn analytics_summary(days: &[LiquidationDay], cap: f64) -> Result<AnalyticsSummary> {
    if days.is_empty() {
        return Err(Error::InvalidInput("no liquidation days".into()));
    }
    let metrics = days
        .iter()
        .map(|d| day_metrics(d, cap))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: &dyn Fn(&LiquidationDay, &DayMetrics) -> f64| -> ColumnStats {
        let v: Vec<f64> = days.iter().zip(&metrics).map(|(d, m)| f(d, m)).collect();
        ColumnStats::of(&v)
    };
    let columns = vec![
        ("r_min", col(&|_, m| m.r_min)),
        ("r_max", col(&|_, m| m.r_max)),
        ("long_liq_m", col(&|d, _| d.long_liq / 1e6)),
        ("short_liq_m", col(&|d, _| d.short_liq / 1e6)),
        ("SI", col(&|_, m| m.si)),
        ("p_long_pct", col(&|_, m| 100.0 * m.p_long)),
        ("p_short_pct", col(&|_, m| 100.0 * m.p_short)),
        ("L_long", col(&|_, m| m.lev_long.value)),
        ("L_short", col(&|_, m| m.lev_short.value)),
    ];
    Ok(AnalyticsSummary {
        columns: columns.into_iter().map(|(n, s)| (n.to_string(), s)).collect(),
        long_at_cap: metrics.iter().filter(|m| m.lev_long.at_cap).count(),
        short_at_cap: metrics.iter().filter(|m| m.lev_short.at_cap).count(),
    })
}

/// Per-day speculation index and liquidation ratios (percent) as CSV.
pub fn write_series_csv<W: Write>(days: &[LiquidationDay], cap: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "si", "p_long_pct", "p_short_pct", "lev_long", "lev_short"])?;
    for d in days {
        let m = day_metrics(d, cap)?;
        w.write_record([
            m.date.to_string(),
            m.si.to_string(),
            (100.0 * m.p_long).to_string(),
            (100.0 * m.p_short).to_string(),
            m.lev_long.value.to_string(),
            m.lev_short.value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("analytics series", e))?;
    Ok(())
}
