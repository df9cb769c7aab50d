//! Split-chain potential scale reduction and effective sample size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A diagnostic value plus a flag for inputs with no variability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub value: f64,
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Split-chain R-hat: every chain is cut in half and the halves are
/// compared as separate chains.
///
/// Constant input gives `1.0`; chains that are each constant but disagree
/// give `+inf`. Both are flagged degenerate.
pub fn rhat(chains: &[Vec<f64>]) -> Result<Diagnostic> {
    if chains.len() < 2 {
        return Err(Error::InvalidConfig("R-hat needs at least two chains".into()));
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len < 4 {
        return Err(Error::InvalidConfig("R-hat needs at least four draws per chain".into()));
    }
    let half = len / 2;
    let splits: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[len - half..len]])
        .collect();
    let means: Vec<f64> = splits.iter().map(|s| mean(s)).collect();
    let within = splits
        .iter()
        .zip(&means)
        .map(|(s, &m)| sample_variance(s, m))
        .sum::<f64>()
        / splits.len() as f64;
    let grand = mean(&means);
    let n = half as f64;
    let between = n * sample_variance(&means, grand);
    if within <= 0.0 {
        let value = if between > 0.0 { f64::INFINITY } else { 1.0 };
        return Ok(Diagnostic { value, degenerate: true });
    }
    let pooled = (n - 1.0) / n * within + between / n;
    Ok(Diagnostic {
        value: (pooled / within).sqrt(),
        degenerate: false,
    })
}

/// Effective sample size by Geyer's initial monotone positive sequence.
///
/// A constant series reports its length with the degenerate flag. The
/// estimate is capped at `1.5 N`.
pub fn ess(samples: &[f64]) -> Result<Diagnostic> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::InvalidConfig("ESS needs at least eight draws".into()));
    }
    let m = mean(samples);
    let centered: Vec<f64> = samples.iter().map(|x| x - m).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = autocov(0);
    if gamma0 <= 0.0 {
        return Ok(Diagnostic {
            value: n as f64,
            degenerate: true,
        });
    }
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let value = (n as f64 / tau).min(1.5 * n as f64);
    Ok(Diagnostic {
        value,
        degenerate: false,
    })
}
