//! Seeded synthetic inputs: a heavy-tailed geometric random walk of
//! prices and a matching daily OHLCV/liquidation file.

use std::io::Write;
use std::path::Path;

use chrono::{NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StudentT};

use crate::analytics::LiquidationDay;
use crate::error::{Error, Result};
use crate::timeseries::{Frequency, PriceSeries};

/// Geometric random walk with Student-t(3) log increments.
pub fn random_walk_prices(n: usize, frequency: Frequency, start_price: f64, vol: f64, seed: u64) -> Result<PriceSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = StudentT::new(3.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    // t(3) has variance 3
    let step_sd = vol / 3f64.sqrt();
    let mut prices = Vec::with_capacity(n);
    let mut log_p = start_price.ln();
    for _ in 0..n {
        prices.push(log_p.exp());
        let shock: f64 = t.sample(&mut rng);
        log_p += step_sd * shock.clamp(-30.0, 30.0);
    }
    let start = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
    PriceSeries::from_prices(frequency, start, &prices)
}

/// Daily OHLCV rows with volumes and liquidations in USD.
pub fn liquidation_days(n: usize, seed: u64) -> Vec<LiquidationDay> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = StudentT::new(3.0).expect("valid dof");
    let range = LogNormal::new(-4.3, 0.6).expect("valid lognormal");
    let volume = LogNormal::new(21.0, 0.5).expect("valid lognormal");
    let oi = LogNormal::new(20.0, 0.2).expect("valid lognormal");
    let liq = LogNormal::new(15.5, 1.2).expect("valid lognormal");

    let mut date = NaiveDate::from_ymd_opt(2020, 1, 29).unwrap();
    let mut close = 9300.0f64;
    let mut days = Vec::with_capacity(n);
    for _ in 0..n {
        let open = close;
        let ret: f64 = 0.025 * t.sample(&mut rng) / 3f64.sqrt();
        close = open * ret.clamp(-0.5, 0.5).exp();
        let up: f64 = range.sample(&mut rng);
        let down: f64 = range.sample(&mut rng);
        // occasionally the open is the day's extreme
        let high = if rng.random_bool(0.02) { open.max(close) } else { open.max(close) * (1.0 + up) };
        let low = if rng.random_bool(0.02) { open.min(close) } else { open.min(close) * (1.0 - down.min(0.5)) };
        let open_interest: f64 = oi.sample(&mut rng);
        let l1: f64 = liq.sample(&mut rng);
        let l2: f64 = liq.sample(&mut rng);
        // losing side gets the larger liquidation volume
        let (long_liq, short_liq) = if close < open { (l1.max(l2), l1.min(l2)) } else { (l1.min(l2), l1.max(l2)) };
        days.push(LiquidationDay {
            date,
            open,
            high,
            low,
            close,
            volume: volume.sample(&mut rng),
            open_interest,
            long_liq,
            short_liq,
        });
        date = date.succ_opt().expect("date in range");
    }
    days
}

pub fn write_price_csv(series: &PriceSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["timestamp", "price"])?;
    for (ts, p) in series.points() {
        w.write_record([ts.format("%Y-%m-%dT%H:%M:%SZ").to_string(), p.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_ohlcv_csv(days: &[LiquidationDay], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for d in days {
        w.serialize(d)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `prices.csv` (`n_prices` five-minute points), `ohlcv.csv`
/// (`n_days` rows) and a matching `config.toml` into `dir`.
pub fn write_fixture(dir: impl AsRef<Path>, n_prices: usize, n_days: usize, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let prices = random_walk_prices(n_prices, Frequency::Min5, 1000.0, 0.002, seed)?;
    write_price_csv(&prices, dir.join("prices.csv"))?;
    write_ohlcv_csv(&liquidation_days(n_days, seed.wrapping_add(1)), dir.join("ohlcv.csv"))?;
    let config = format!(
        "# Synthetic fixture: {n_prices} five-minute prices, {n_days} daily rows.\n\
         price_file = \"prices.csv\"\n\
         price_frequency = \"5min\"\n\
         ohlcv_file = \"ohlcv.csv\"\n\
         frequencies = [\"5min\", \"30min\", \"1h\", \"8h\"]\n\
         probabilities = [0.1, 0.05, 0.01, 0.001]\n\
         futures_kinds = [\"standard\", \"perpetual\"]\n\
         scale = 100.0\n\
         leverage_cap = 100.0\n\
         seed = {seed}\n\
         output_dir = \"out\"\n"
    );
    let path = dir.join("config.toml");
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(config.as_bytes()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
