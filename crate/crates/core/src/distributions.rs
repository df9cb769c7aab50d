//! Log-densities and samplers for the distributions the mixture model uses.
//!
//! Everything here works in log space. The Negative Binomial uses the
//! mean–precision form
//!
//! ```text
//! NB(y | mu, psi) = Gamma(y + psi) / (Gamma(psi) y!) * (psi / (psi + mu))^psi * (mu / (psi + mu))^y
//! ```
//!
//! with variance `mu + mu^2 / psi`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{domain, Result};

/// A non-negative event count.
pub type Count = u64;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const LN_GAMMA_SHIFT: f64 = 10.0;

// Stirling-series coefficients B_2n / (2n (2n - 1)).
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

/// `ln Gamma(x)` for positive finite `x`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return domain(format!("log_gamma requires a positive finite argument, got {x}"));
    }
    Ok(ln_gamma(x))
}

/// Unchecked `ln Gamma(x)` for hot paths; `x` must be positive and finite.
///
/// Below 10 the argument is shifted upward with the recurrence and the
/// shifted product removed with a single logarithm; at or above 10 the
/// Stirling series with seven correction terms is accurate to a few ulps.
#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x >= LN_GAMMA_SHIFT {
        return stirling(x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < LN_GAMMA_SHIFT {
        prod *= shifted;
        shifted += 1.0;
    }
    stirling(shifted) - prod.ln()
}

#[inline]
fn stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = STIRLING[6];
    for &coef in STIRLING[..6].iter().rev() {
        series = series * inv2 + coef;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series * inv
}

/// `ln Gamma(psi + y) - ln Gamma(psi)`, the log rising factorial.
#[inline]
pub(crate) fn ln_rising(psi: f64, y: Count) -> f64 {
    if y <= 8 {
        let mut prod = 1.0;
        for j in 0..y {
            prod *= psi + j as f64;
        }
        prod.ln()
    } else {
        ln_gamma(psi + y as f64) - ln_gamma(psi)
    }
}

/// `ln y!`.
#[inline]
pub fn ln_factorial(y: Count) -> f64 {
    ln_gamma(y as f64 + 1.0)
}

/// Mean–precision Negative Binomial parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinParams {
    mu: f64,
    psi: f64,
}

impl NegBinParams {
    pub fn new(mu: f64, psi: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return domain(format!("NB mean must be positive and finite, got {mu}"));
        }
        if !(psi.is_finite() && psi > 0.0) {
            return domain(format!("NB precision must be positive and finite, got {psi}"));
        }
        Ok(Self { mu, psi })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn variance(&self) -> f64 {
        self.mu + self.mu * self.mu / self.psi
    }

    /// The largest-probability count.
    pub fn mode(&self) -> Count {
        if self.psi <= 1.0 {
            return 0;
        }
        let m = ((self.psi - 1.0) * self.mu / self.psi).floor();
        m.max(0.0) as Count
    }
}

/// Log NB pmf at count `y`.
pub fn negbin_log_pmf(y: Count, p: &NegBinParams) -> f64 {
    nb_lpmf(y, p.mu, p.psi)
}

#[inline]
pub(crate) fn nb_lpmf(y: Count, mu: f64, psi: f64) -> f64 {
    let yf = y as f64;
    let mut lp = ln_rising(psi, y) - ln_factorial(y) - psi * (mu / psi).ln_1p();
    if y > 0 {
        lp -= yf * (psi / mu).ln_1p();
    }
    lp
}

/// Log pmf of the zero-inflated NB: `pi 1{y = 0} + (1 - pi) NB(y)`.
pub fn zinb_log_pmf(y: Count, pi: f64, p: &NegBinParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi) {
        return domain(format!("zero-inflation probability must lie in [0, 1], got {pi}"));
    }
    Ok(zinb_lpmf(y, pi, p.mu, p.psi))
}

#[inline]
pub(crate) fn zinb_lpmf(y: Count, pi: f64, mu: f64, psi: f64) -> f64 {
    if pi == 0.0 {
        return nb_lpmf(y, mu, psi);
    }
    if y > 0 {
        if pi == 1.0 {
            return f64::NEG_INFINITY;
        }
        return (-pi).ln_1p() + nb_lpmf(y, mu, psi);
    }
    if pi == 1.0 {
        return 0.0;
    }
    log_add_exp(pi.ln(), (-pi).ln_1p() + nb_lpmf(0, mu, psi))
}

/// Draws from NB(mu, psi) through the gamma–Poisson mixture.
pub fn sample_negbin<R: Rng + ?Sized>(p: &NegBinParams, rng: &mut R) -> Result<Count> {
    let gamma = Gamma::new(p.psi, p.mu / p.psi)
        .map_err(|e| crate::Error::Domain(format!("gamma mixing law: {e}")))?;
    let lambda: f64 = gamma.sample(rng);
    sample_poisson(lambda, rng)
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<Count> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(lambda)
        .map_err(|e| crate::Error::Domain(format!("Poisson rate {lambda}: {e}")))?;
    let draw: f64 = poisson.sample(rng);
    Ok(draw as Count)
}

/// Draws the logarithm of a Gamma(shape, 1) variate.
///
/// Shapes below one use `G(a) = G(a + 1) U^{1/a}` so the result stays finite
/// even when the variate itself would underflow.
pub(crate) fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0)
            .expect("positive shape")
            .sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

/// Draws a point on the simplex from Dirichlet(alphas).
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return domain("Dirichlet needs at least one concentration");
    }
    if let Some(bad) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return domain(format!("Dirichlet concentrations must be positive, got {bad}"));
    }
    Ok(dirichlet_unchecked(alphas, rng))
}

pub(crate) fn dirichlet_unchecked<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
    let mut logs: Vec<f64> = alphas.iter().map(|&a| sample_log_gamma(a, rng)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - top).exp();
        total += *l;
    }
    for l in logs.iter_mut() {
        *l /= total;
    }
    logs
}

/// Draws an index with probability proportional to `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return domain("categorical needs at least one weight");
    }
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return domain(format!("categorical weights must be non-negative, got {bad}"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("categorical weights sum to {total}, not 1"));
    }
    Ok(categorical_index(weights, total * rng.random::<f64>()))
}

/// Inverse-CDF lookup of `u` in unnormalized non-negative weights.
#[inline]
pub(crate) fn categorical_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - HALF_LN_2PI
}

pub fn lognormal_log_pdf(x: f64, log_mean: f64, log_sd: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    normal_log_pdf(x.ln(), log_mean, log_sd) - x.ln()
}

pub fn beta_log_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let left = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let right = if b == 1.0 { 0.0 } else { (b - 1.0) * (-x).ln_1p() };
    norm + left + right
}

/// Symmetric Dirichlet log density on the simplex. With `alpha < 1` the
/// density diverges on the boundary, so a zero weight gives `+inf`.
pub fn dirichlet_log_pdf(c: &[f64], alpha: f64) -> f64 {
    let k = c.len() as f64;
    let mut lp = ln_gamma(k * alpha) - k * ln_gamma(alpha);
    if alpha != 1.0 {
        for &ck in c {
            lp += (alpha - 1.0) * ck.ln();
        }
    }
    lp
}
