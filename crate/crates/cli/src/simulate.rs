//! Generating parameters for `simulate` and the built-in demo designs.

use nbmix::model::{generate_synthetic, CovariateLaw, MixtureParams, SyntheticData};
use nbmix::{Coefficients, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Weights whose sum is off by up to this much are renormalized; larger
/// deviations are rejected.
pub const SIMPLEX_TOLERANCE: f64 = 0.02;

/// A mixture to simulate from, as read from a JSON truth file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub weights: Vec<f64>,
    /// One row per component, intercept first.
    pub coefficients: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    pub covariates: CovariateLaw,
}

impl Truth {
    /// Checks the parameters and returns them with the weights normalized.
    pub fn params(&self) -> CliResult<MixtureParams> {
        let w = &self.weights;
        let total: f64 = w.iter().sum();
        if w.is_empty() || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CliError::input("weights must be finite and non-negative"));
        }
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(CliError::input(format!("weights sum to {total}, not 1")));
        }
        if (total - 1.0).abs() > 1e-12 {
            log::warn!("weights sum to {total}; renormalizing");
        }
        let k = w.len();
        if self.coefficients.len() != k || self.psi.len() != k {
            return Err(CliError::input(format!(
                "{k} weights but {} coefficient rows and {} precisions",
                self.coefficients.len(),
                self.psi.len()
            )));
        }
        let d = self.covariates.dim();
        if let Some(row) = self.coefficients.iter().find(|r| r.len() != d) {
            return Err(CliError::input(format!(
                "coefficient rows need {d} entries (intercept plus covariates), found {}",
                row.len()
            )));
        }
        let params = MixtureParams {
            c: w.iter().map(|v| v / total).collect(),
            beta: Coefficients::from_rows(&self.coefficients).map_err(|e| CliError::input(e.to_string()))?,
            psi: self.psi.clone(),
            pi: self.pi.clone(),
        };
        params.validate().map_err(|e| CliError::input(e.to_string()))?;
        Ok(params)
    }

    pub fn generate(&self, n: usize, seed: u64) -> CliResult<SyntheticData> {
        let params = self.params()?;
        generate_synthetic(&params, n, &self.covariates, seed).map_err(|e| CliError::input(e.to_string()))
    }
}

/// Size of the demo cohort.
pub const DEMO_N: usize = 7118;

/// Three components holding 420, 4091 and 2607 of 7118 observations
/// (about 0.06, 0.58 and 0.37), with predictive modes 5, 24 and 39 at
/// the covariate means. Covariates are two standard normals and two
/// Bernoulli(0.5) indicators, so the design has five columns.
///
/// The zero-inflated design adds structural-zero probabilities
/// (0.3, 0.05, 0).
pub fn demo_truth(variant: Variant) -> Truth {
    let weights = [420.0, 4091.0, 2607.0].map(|v| v / DEMO_N as f64).to_vec();
    // Means at the covariate means are 7, 24.5 and 40.
    let slopes = [[0.2, -0.1, 0.3, -0.2], [0.1, 0.03, 0.1, -0.05], [0.1, 0.05, 0.05, 0.08]];
    let means: [f64; 3] = [7.0, 24.5, 40.0];
    let covariates = CovariateLaw::standard(2, 2);
    let xbar = covariates.mean_row();
    let coefficients = slopes
        .iter()
        .zip(means)
        .map(|(s, m)| {
            let shift: f64 = s.iter().zip(&xbar[1..]).map(|(b, x)| b * x).sum();
            std::iter::once(m.ln() - shift).chain(s.iter().copied()).collect()
        })
        .collect();
    Truth {
        weights,
        coefficients,
        psi: vec![4.0, 100.0, 100.0],
        pi: (variant == Variant::Zinb).then(|| vec![0.3, 0.05, 0.0]),
        covariates,
    }
}

/// Ground truth written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub n: usize,
    pub seed: u64,
    pub params: MixtureParams,
    pub columns: Vec<String>,
    pub z: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_zeros: Option<Vec<bool>>,
}
