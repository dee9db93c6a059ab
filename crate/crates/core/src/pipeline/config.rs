//! Declarative run configuration (TOML).
//!
//! ```toml
//! price_file = "prices.csv"          # timestamp,price
//! price_frequency = "5min"           # sampling interval of price_file
//! gap_policy = "reject"              # or "forward-fill"
//! ohlcv_file = "ohlcv.csv"           # optional daily liquidation data
//! frequencies = ["5min", "1h", "1d"]
//! probabilities = [0.1, 0.05, 0.01, 0.001]   # descending, unique
//! futures_kinds = ["standard", "perpetual"]
//! scale = 100.0
//! leverage_cap = 100.0
//! seed = 2021
//! output_dir = "out"
//! mc_samples = 1000000               # Monte Carlo draws per verified cell
//!
//! [block_sizes]                      # optional per-frequency overrides
//! "1d" = 10
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::DEFAULT_LEVERAGE_CAP;
use crate::error::{Error, Result};
use crate::extremes::default_block_size;
use crate::margins::MIN_MONTE_CARLO_SAMPLES;
use crate::timeseries::{ChangeDefinition, Frequency, GapPolicy, DEFAULT_SCALE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub price_file: PathBuf,
    #[serde(default = "default_price_frequency")]
    pub price_frequency: Frequency,
    #[serde(default)]
    pub gap_policy: GapPolicy,
    #[serde(default)]
    pub ohlcv_file: Option<PathBuf>,
    pub frequencies: Vec<Frequency>,
    #[serde(default)]
    pub block_sizes: BTreeMap<String, usize>,
    #[serde(default = "default_probabilities")]
    pub probabilities: Vec<f64>,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_kinds")]
    pub futures_kinds: Vec<ChangeDefinition>,
    #[serde(default = "default_cap")]
    pub leverage_cap: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_price_frequency() -> Frequency {
    Frequency::Min5
}
fn default_probabilities() -> Vec<f64> {
    vec![0.1, 0.05, 0.01, 0.001]
}
fn default_scale() -> f64 {
    DEFAULT_SCALE
}
fn default_kinds() -> Vec<ChangeDefinition> {
    vec![ChangeDefinition::Standard, ChangeDefinition::Perpetual]
}
fn default_cap() -> f64 {
    DEFAULT_LEVERAGE_CAP
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_mc_samples() -> usize {
    1_000_000
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.frequencies.is_empty() {
            return bad("frequencies must not be empty".into());
        }
        for (i, f) in self.frequencies.iter().enumerate() {
            if self.frequencies[..i].contains(f) {
                return bad(format!("frequency {f} listed twice"));
            }
            if f.minutes() % self.price_frequency.minutes() != 0 {
                return bad(format!(
                    "frequency {f} is not a multiple of the price frequency {}",
                    self.price_frequency
                ));
            }
        }
        if self.probabilities.is_empty() {
            return bad("probabilities must not be empty".into());
        }
        for &p in &self.probabilities {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("probability {p} outside (0, 1)"));
            }
        }
        if self.probabilities.windows(2).any(|w| w[0] <= w[1]) {
            return bad("probabilities must be strictly descending".into());
        }
        if self.futures_kinds.is_empty() {
            return bad("futures_kinds must not be empty".into());
        }
        for (i, k) in self.futures_kinds.iter().enumerate() {
            if self.futures_kinds[..i].contains(k) {
                return bad(format!("futures kind {k} listed twice"));
            }
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if !(self.leverage_cap > 1.0) {
            return bad(format!("leverage_cap must exceed 1, got {}", self.leverage_cap));
        }
        if self.mc_samples < MIN_MONTE_CARLO_SAMPLES {
            return bad(format!("mc_samples must be at least {MIN_MONTE_CARLO_SAMPLES}"));
        }
        for (k, &n) in &self.block_sizes {
            k.parse::<Frequency>().map_err(|e| Error::Config(e.to_string()))?;
            if n < 2 {
                return bad(format!("block size for {k} must be at least 2"));
            }
        }
        Ok(())
    }

    pub fn block_size(&self, f: Frequency) -> usize {
        self.block_sizes
            .iter()
            .find(|(k, _)| k.parse::<Frequency>().ok() == Some(f))
            .map(|(_, &n)| n)
            .unwrap_or_else(|| default_block_size(f))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn price_path(&self) -> PathBuf {
        self.resolve(&self.price_file)
    }

    pub fn ohlcv_path(&self) -> Option<PathBuf> {
        self.ohlcv_file.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Command-line overrides; an overridden output directory is taken
    /// relative to the working directory.
    pub fn with_overrides(mut self, seed: Option<u64>, output_dir: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(d) = output_dir {
            self.output_dir = std::path::absolute(&d).unwrap_or(d);
        }
        self
    }

    /// SHA-256 over the canonical JSON form of every setting except the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    /// Sub-seed for one unit of work: the first eight bytes of
    /// SHA-256(seed as little-endian bytes ‖ key).
    pub fn derive_seed(&self, key: &str) -> u64 {
        derive_seed(self.seed, key)
    }
}

pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
