//! Non-overlapping block maxima and minima.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::timeseries::{ChangeSeries, Frequency};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockExtremes {
    pub block_size: usize,
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
    /// Negated minima followed by maxima. Negation (rather than `abs`) keeps
    /// the sign of a block whose minimum happens to be positive.
    pub common: Vec<f64>,
}

impl BlockExtremes {
    pub fn blocks(&self) -> usize {
        self.maxima.len()
    }

    /// Minima with the sign flipped, the sample used to fit the left tail.
    pub fn negated_minima(&self) -> Vec<f64> {
        self.minima.iter().map(|m| -m).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["block_index", "min", "max"])?;
        for (i, (lo, hi)) in self.minima.iter().zip(&self.maxima).enumerate() {
            w.write_record([i.to_string(), lo.to_string(), hi.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("block extremes", e))?;
        Ok(())
    }
}

pub fn block_extremes(changes: &ChangeSeries, block_size: usize) -> Result<BlockExtremes> {
    block_extremes_of(&changes.values, block_size)
}

/// Splits `values` into consecutive blocks of `block_size` starting at the
/// first element; a trailing partial block is dropped.
pub fn block_extremes_of(values: &[f64], block_size: usize) -> Result<BlockExtremes> {
    if block_size < 2 {
        return Err(Error::InvalidInput(format!(
            "block size must be at least 2, got {block_size}"
        )));
    }
    if values.len() < block_size {
        return Err(Error::TooShort {
            needed: block_size,
            got: values.len(),
        });
    }
    let (maxima, minima): (Vec<f64>, Vec<f64>) = values
        .chunks_exact(block_size)
        .map(|block| {
            block.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &x| {
                (hi.max(x), lo.min(x))
            })
        })
        .unzip();
    let common = minima.iter().map(|m| -m).chain(maxima.iter().copied()).collect();
    Ok(BlockExtremes {
        block_size,
        maxima,
        minima,
        common,
    })
}

/// Block length covering 8h for 5-minute data, 24h for 30-minute, 48h for
/// hourly, 5 days for 8-hourly and 10 days for daily data.
pub fn default_block_size(frequency: Frequency) -> usize {
    match frequency {
        Frequency::Min5 => 96,
        Frequency::Min30 => 48,
        Frequency::Hour1 => 48,
        Frequency::Hour8 => 15,
        Frequency::Day1 => 10,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_enumerated_blocks() {
        let b = block_extremes_of(&[1.0, -2.0, 3.0, -4.0, 5.0, -6.0], 3).unwrap();
        assert_eq!(b.maxima, vec![3.0, 5.0]);
        assert_eq!(b.minima, vec![-2.0, -6.0]);
        assert_eq!(b.common, vec![2.0, 6.0, 3.0, 5.0]);
    }

    #[test]
    fn remainder_is_dropped() {
        let b = block_extremes_of(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 100.0], 3).unwrap();
        assert_eq!(b.blocks(), 2);
        assert_eq!(b.maxima, vec![3.0, 6.0]);
    }

    #[test]
    fn block_count_at_eight_hours() {
        let v = vec![0.0; 431_346];
        assert_eq!(block_extremes_of(&v, 96).unwrap().blocks(), 4493);
    }

    #[test]
    fn default_sizes() {
        assert_eq!(default_block_size(Frequency::Min5), 96);
        assert_eq!(default_block_size(Frequency::Min30), 48);
        assert_eq!(default_block_size(Frequency::Hour1), 48);
        assert_eq!(default_block_size(Frequency::Hour8), 15);
        assert_eq!(default_block_size(Frequency::Day1), 10);
        for f in Frequency::ALL {
            let hours = f.minutes() as f64 * default_block_size(f) as f64 / 60.0;
            assert!([8.0, 24.0, 48.0, 120.0, 240.0].contains(&hours));
        }
    }

    #[test]
    fn errors() {
        assert!(block_extremes_of(&[1.0, 2.0], 3).is_err());
        assert!(block_extremes_of(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn csv_dump() {
        let b = block_extremes_of(&[1.0, -2.0, 3.0, -4.0], 2).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "block_index,min,max\n0,-2,1\n1,-4,3\n");
    }

    proptest! {
        #[test]
        fn lengths_and_ordering(v in proptest::collection::vec(-10f64..10.0, 2..300), n in 2usize..20) {
            prop_assume!(v.len() >= n);
            let b = block_extremes_of(&v, n).unwrap();
            prop_assert_eq!(b.blocks(), v.len() / n);
            prop_assert_eq!(b.common.len(), 2 * b.blocks());
            for (lo, hi) in b.minima.iter().zip(&b.maxima) {
                prop_assert!(lo <= hi);
            }
        }
    }
}
