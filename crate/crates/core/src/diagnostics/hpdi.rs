use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Highest posterior density interval: the narrowest window of the sorted
/// samples spanning `ceil(prob * N)` consecutive gaps. The first narrowest
/// window wins ties.
pub fn hpdi(samples: &[f64], prob: f64) -> Result<Interval> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("HPDI probability must lie in (0, 1), got {prob}")));
    }
    let n = samples.len();
    if n < 20 {
        return Err(Error::InvalidConfig(format!("HPDI needs at least 20 samples, got {n}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let span = ((prob * n as f64).ceil() as usize).min(n - 1);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for i in 0..n - span {
        let w = sorted[i + span] - sorted[i];
        if w < best_width {
            best_width = w;
            best = i;
        }
    }
    Ok(Interval {
        lo: sorted[best],
        hi: sorted[best + span],
    })
}
