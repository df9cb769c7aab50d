//! Data and parameter containers, the complete-data likelihood, the prior,
//! and a synthetic-data generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    self, beta_log_pdf, dirichlet_log_pdf, lognormal_log_pdf, normal_log_pdf, Count,
};
use crate::error::{Error, Result};

/// Linear predictors are clamped to `[-ETA_LIMIT, ETA_LIMIT]` before exponentiation.
pub const ETA_LIMIT: f64 = 50.0;

/// Clamps a linear predictor, reporting whether clamping happened.
#[inline]
pub fn clamp_predictor(eta: f64) -> (f64, bool) {
    if eta > ETA_LIMIT {
        (ETA_LIMIT, true)
    } else if eta < -ETA_LIMIT {
        (-ETA_LIMIT, true)
    } else {
        (eta, false)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `exp(x . beta_k)`, with the linear predictor clamped at `ETA_LIMIT`.
pub fn component_mean(beta_k: &[f64], x: &[f64]) -> Result<f64> {
    if beta_k.len() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: beta_k.len(),
        });
    }
    Ok(clamp_predictor(dot(beta_k, x)).0.exp())
}

/// A categorical covariate retained alongside its indicator columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    /// Levels with the reference level first.
    pub levels: Vec<String>,
    /// Per-observation index into `levels`.
    pub codes: Vec<usize>,
}

/// Count outcomes with a design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<Count>,
    x: Vec<f64>,
    d: usize,
    column_names: Vec<String>,
    factors: Vec<Factor>,
}

impl Dataset {
    /// `x` is row-major with `column_names.len()` columns.
    pub fn new(y: Vec<Count>, x: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        let n = y.len();
        let d = column_names.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no observations".into()));
        }
        if d == 0 {
            return Err(Error::InvalidData("dataset has no columns".into()));
        }
        if x.len() != n * d {
            return Err(Error::Dimension {
                expected: n * d,
                got: x.len(),
            });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate at row {}, column {}",
                pos / d,
                column_names[pos % d]
            )));
        }
        if let Some(row) = (0..n).find(|&i| x[i * d] != 1.0) {
            return Err(Error::InvalidData(format!(
                "column 0 must be an all-ones intercept (row {row})"
            )));
        }
        Ok(Self {
            y,
            x,
            d,
            column_names,
            factors: Vec::new(),
        })
    }

    pub fn with_factors(mut self, factors: Vec<Factor>) -> Result<Self> {
        for f in &factors {
            if f.codes.len() != self.n() || f.codes.iter().any(|&c| c >= f.levels.len()) {
                return Err(Error::InvalidData(format!("factor {} is inconsistent", f.name)));
            }
        }
        self.factors = factors;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[Count] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn y_max(&self) -> Count {
        self.y.iter().copied().max().unwrap_or(0)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.d];
        for i in 0..self.n() {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.n() as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

/// Fixed prior configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Symmetric Dirichlet concentration.
    pub alpha0: f64,
    /// Coefficient prior mean.
    pub m0: f64,
    /// Coefficient prior standard deviation.
    pub s0: f64,
    /// Mean of `ln psi`.
    pub a0: f64,
    /// Standard deviation of `ln psi`.
    pub b0: f64,
    /// Number of mixture components carried by the sampler.
    pub k_max: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha0: 0.1,
            m0: 0.0,
            s0: 10.0,
            a0: 0.0,
            b0: 2.0,
            k_max: 10,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.alpha0) || !positive(self.s0) || !positive(self.b0) {
            return Err(Error::InvalidConfig(
                "alpha0, s0 and b0 must be positive".into(),
            ));
        }
        if !self.m0.is_finite() || !self.a0.is_finite() {
            return Err(Error::InvalidConfig("m0 and a0 must be finite".into()));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Nb,
    Zinb,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Nb => "nb",
            Variant::Zinb => "zinb",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nb" => Ok(Variant::Nb),
            "zinb" => Ok(Variant::Zinb),
            other => Err(Error::InvalidConfig(format!("unknown model variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub hyper: Hyperparams,
    /// Beta shape parameters for the zero-inflation probabilities.
    pub pi_prior: (f64, f64),
}

impl ModelSpec {
    pub fn nb(hyper: Hyperparams) -> Self {
        Self {
            variant: Variant::Nb,
            hyper,
            pi_prior: (1.0, 1.0),
        }
    }

    pub fn zinb(hyper: Hyperparams) -> Self {
        Self {
            variant: Variant::Zinb,
            ..Self::nb(hyper)
        }
    }

    pub fn k_max(&self) -> usize {
        self.hyper.k_max
    }

    pub fn is_zinb(&self) -> bool {
        self.variant == Variant::Zinb
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        let (a, b) = self.pi_prior;
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::InvalidConfig("pi_prior shapes must be positive".into()));
        }
        Ok(())
    }
}

/// A `k x d` row-major coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    k: usize,
    d: usize,
    values: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(k: usize, d: usize) -> Self {
        Self {
            k,
            d,
            values: vec![0.0; k * d],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidState("ragged coefficient rows".into()));
        }
        Ok(Self {
            k,
            d,
            values: rows.concat(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.d..(k + 1) * self.d]
    }

    #[inline]
    pub fn get(&self, k: usize, d: usize) -> f64 {
        self.values[k * self.d + d]
    }

    #[inline]
    pub fn set(&mut self, k: usize, d: usize, v: f64) {
        self.values[k * self.d + d] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.d.max(1))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Component-level parameters: weights, coefficients, precisions and
/// (zero-inflated variant only) structural-zero probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub c: Vec<f64>,
    pub beta: Coefficients,
    pub psi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.c.len()
    }

    pub fn d(&self) -> usize {
        self.beta.d()
    }

    #[inline]
    pub fn pi_k(&self, k: usize) -> f64 {
        self.pi.as_ref().map_or(0.0, |p| p[k])
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.c.len();
        if k == 0 {
            return Err(Error::InvalidState("no components".into()));
        }
        if self.beta.k() != k || self.psi.len() != k {
            return Err(Error::InvalidState("component dimensions disagree".into()));
        }
        if self.c.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::InvalidState("weights must be non-negative".into()));
        }
        let total: f64 = self.c.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        if self.beta.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite coefficient".into()));
        }
        if self.psi.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidState("precisions must be positive".into()));
        }
        if let Some(pi) = &self.pi {
            if pi.len() != k || pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidState("zero-inflation out of [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Reorders components so that new component `j` is old component `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut beta = Coefficients::zeros(self.k(), self.d());
        for (j, &old) in perm.iter().enumerate() {
            beta.row_mut(j).copy_from_slice(self.beta.row(old));
        }
        Self {
            c: perm.iter().map(|&o| self.c[o]).collect(),
            beta,
            psi: perm.iter().map(|&o| self.psi[o]).collect(),
            pi: self
                .pi
                .as_ref()
                .map(|p| perm.iter().map(|&o| p[o]).collect()),
        }
    }

    /// Mean of component `k` at covariate row `x`.
    #[inline]
    pub fn mean_at(&self, k: usize, x: &[f64]) -> f64 {
        clamp_predictor(dot(self.beta.row(k), x)).0.exp()
    }

    /// Log mass of `y` under component `k` at covariate row `x`.
    pub fn component_log_pmf(&self, k: usize, y: Count, x: &[f64]) -> f64 {
        let mu = self.mean_at(k, x);
        match &self.pi {
            Some(pi) => distributions::zinb_lpmf(y, pi[k], mu, self.psi[k]),
            None => distributions::nb_lpmf(y, mu, self.psi[k]),
        }
    }
}

/// One full configuration of the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub params: MixtureParams,
    /// Component index for each observation.
    pub z: Vec<usize>,
    /// Structural-zero indicators (zero-inflated variant only).
    pub w: Option<Vec<bool>>,
}

impl ParamState {
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        self.params.validate()?;
        let k = self.params.k();
        if self.params.d() != data.d() {
            return Err(Error::Dimension {
                expected: data.d(),
                got: self.params.d(),
            });
        }
        if self.z.len() != data.n() {
            return Err(Error::Dimension {
                expected: data.n(),
                got: self.z.len(),
            });
        }
        if let Some(bad) = self.z.iter().find(|&&z| z >= k) {
            return Err(Error::InvalidState(format!("assignment {bad} out of range")));
        }
        if let Some(w) = &self.w {
            if w.len() != data.n() {
                return Err(Error::InvalidState("latent zero vector length".into()));
            }
            if w.iter().zip(data.y()).any(|(&w, &y)| w && y > 0) {
                return Err(Error::InvalidState("structural zero on a positive count".into()));
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.params.k()];
        for &z in &self.z {
            counts[z] += 1;
        }
        counts
    }

    /// Relabels components; see [`MixtureParams::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Self {
            params: self.params.permuted(perm),
            z: self.z.iter().map(|&z| inverse[z]).collect(),
            w: self.w.clone(),
        }
    }
}

/// `sum_n log f(y_n | mu_{z_n}(x_n), psi_{z_n})` with `f` the NB or ZINB mass.
pub fn complete_log_likelihood(state: &ParamState, data: &Dataset, spec: &ModelSpec) -> f64 {
    let params = &state.params;
    let zinb = spec.is_zinb();
    (0..data.n())
        .map(|i| {
            let k = state.z[i];
            let mu = params.mean_at(k, data.row(i));
            if zinb {
                distributions::zinb_lpmf(data.y()[i], params.pi_k(k), mu, params.psi[k])
            } else {
                distributions::nb_lpmf(data.y()[i], mu, params.psi[k])
            }
        })
        .sum()
}

/// Log prior density of the component parameters.
///
/// The categorical mass of `z` is left to the assignment update. Weights on
/// the simplex boundary give `+inf` when `alpha0 < 1`, where the Dirichlet
/// density is unbounded.
pub fn log_prior(params: &MixtureParams, spec: &ModelSpec) -> f64 {
    let h = &spec.hyper;
    let mut lp = dirichlet_log_pdf(&params.c, h.alpha0);
    lp += params
        .beta
        .values()
        .iter()
        .map(|&b| normal_log_pdf(b, h.m0, h.s0))
        .sum::<f64>();
    lp += params
        .psi
        .iter()
        .map(|&p| lognormal_log_pdf(p, h.a0, h.b0))
        .sum::<f64>();
    if spec.is_zinb() {
        if let Some(pi) = &params.pi {
            let (a, b) = spec.pi_prior;
            lp += pi.iter().map(|&p| beta_log_pdf(p, a, b)).sum::<f64>();
        }
    }
    lp
}

/// Distribution of one non-intercept synthetic covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateKind {
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateColumn {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
}

/// Generator for the non-intercept design columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateLaw {
    pub columns: Vec<CovariateColumn>,
}

impl CovariateLaw {
    /// `continuous` standard-normal columns followed by `binary` Bernoulli(0.5) columns.
    pub fn standard(continuous: usize, binary: usize) -> Self {
        let mut columns = Vec::new();
        for j in 0..continuous {
            columns.push(CovariateColumn {
                name: format!("x{}", j + 1),
                kind: CovariateKind::Normal { mean: 0.0, sd: 1.0 },
            });
        }
        for j in 0..binary {
            columns.push(CovariateColumn {
                name: format!("b{}", j + 1),
                kind: CovariateKind::Bernoulli { p: 0.5 },
            });
        }
        Self { columns }
    }

    pub fn dim(&self) -> usize {
        self.columns.len() + 1
    }

    /// Expected design row, intercept included.
    pub fn mean_row(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.columns.iter().map(|c| match c.kind {
                CovariateKind::Normal { mean, .. } => mean,
                CovariateKind::Bernoulli { p } => p,
            }))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        for c in &self.columns {
            match c.kind {
                CovariateKind::Normal { mean, sd } if !(mean.is_finite() && sd > 0.0) => {
                    return Err(Error::InvalidConfig(format!("bad normal column {}", c.name)))
                }
                CovariateKind::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                    return Err(Error::InvalidConfig(format!("bad binary column {}", c.name)))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A generated dataset with the assignments that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub data: Dataset,
    pub z: Vec<usize>,
    pub structural_zeros: Option<Vec<bool>>,
}

/// Draws `n` observations from the mixture described by `truth`.
///
/// When `truth.pi` is set, each observation is a structural zero with
/// probability `pi_{z_n}`.
pub fn generate_synthetic(
    truth: &MixtureParams,
    n: usize,
    law: &CovariateLaw,
    seed: u64,
) -> Result<SyntheticData> {
    truth.validate()?;
    law.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let d = law.dim();
    if truth.d() != d {
        return Err(Error::Dimension {
            expected: d,
            got: truth.d(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut w = truth.pi.as_ref().map(|_| Vec::with_capacity(n));
    for _ in 0..n {
        let start = x.len();
        x.push(1.0);
        for col in &law.columns {
            x.push(match col.kind {
                CovariateKind::Normal { mean, sd } => mean + sd * distributions::standard_normal(&mut rng),
                CovariateKind::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < p)),
            });
        }
        let k = distributions::sample_categorical(&truth.c, &mut rng)?;
        let structural = match (&truth.pi, w.as_mut()) {
            (Some(pi), Some(w)) => {
                let s = rng.random::<f64>() < pi[k];
                w.push(s);
                s
            }
            _ => false,
        };
        let count = if structural {
            0
        } else {
            let mu = truth.mean_at(k, &x[start..]);
            let p = distributions::NegBinParams::new(mu, truth.psi[k])?;
            distributions::sample_negbin(&p, &mut rng)?
        };
        y.push(count);
        z.push(k);
    }
    let names = std::iter::once("intercept".to_string())
        .chain(law.columns.iter().map(|c| c.name.clone()))
        .collect();
    Ok(SyntheticData {
        data: Dataset::new(y, x, names)?,
        z,
        structural_zeros: w,
    })
}
