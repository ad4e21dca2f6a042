//! Box-plot statistics and a normalized histogram per sample set, enough to
//! draw a violin plot.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("clip value {clip} is below the smallest sample {min}")]
    ClipBelowMin { clip: f64, min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub center: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub iqr: f64,
    /// Samples outside the 1.5 IQR fences, ascending.
    pub outliers: Vec<f64>,
    pub density: Vec<DensityBin>,
}

/// Quantile `p` of ascending data by linear interpolation between closest
/// ranks: position `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summarizes `samples`. The histogram spans `[min, max]`, or `[min, clip]`
/// when a clip is given, in which case larger samples are left out of the
/// histogram (but not of the quartiles).
pub fn summarize(samples: &[f64], bins: usize, clip: Option<f64>) -> Result<StatSummary, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if bins == 0 {
        return Err(StatsError::NoBins);
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let min = sorted[0];
    let max = sorted[n - 1];
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (low_fence, high_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < low_fence || v > high_fence)
        .collect();
    let mean = sorted.iter().sum::<f64>() / n as f64;

    let hi = match clip {
        Some(c) if c < min => return Err(StatsError::ClipBelowMin { clip: c, min }),
        Some(c) => c.min(max),
        None => max,
    };
    Ok(StatSummary {
        n,
        min,
        q1,
        median,
        q3,
        max,
        mean,
        iqr,
        outliers,
        density: histogram(&sorted, min, hi, bins),
    })
}

fn histogram(sorted: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<DensityBin> {
    let kept: Vec<f64> = sorted.iter().copied().filter(|&v| v <= hi).collect();
    if hi <= lo {
        return vec![DensityBin {
            center: lo,
            frequency: 1.0,
        }];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &kept {
        let i = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| DensityBin {
            center: lo + (i as f64 + 0.5) * width,
            frequency: c as f64 / kept.len() as f64,
        })
        .collect()
}

/// Writes `bin_center,frequency` rows.
pub fn write_density<W: io::Write>(summary: &StatSummary, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| io::Error::other(e);
    w.write_record(["bin_center", "frequency"]).map_err(err)?;
    for b in &summary.density {
        w.write_record([format!("{}", b.center), format!("{}", b.frequency)])
            .map_err(err)?;
    }
    w.flush()
}
