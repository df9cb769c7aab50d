//! Dirichlet-prior mixtures of Negative Binomial and zero-inflated Negative
//! Binomial regressions for count outcomes.
//!
//! The mixture carries `k_max` components under a symmetric Dirichlet prior
//! with a small concentration, so components the data do not support empty
//! out and the number of occupied components is learned from the data.
//! Fitting is done by multi-chain blocked Gibbs sampling ([`sampler`]);
//! [`diagnostics`] relabels the chains and summarizes the posterior.

pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod model;
pub mod sampler;

pub use diagnostics::{FitSummary, RelabeledTrace, SummaryOptions};
pub use distributions::{Count, NegBinParams};
pub use error::{Error, Result};
pub use model::{
    Coefficients, CovariateLaw, Dataset, Factor, Hyperparams, MixtureParams, ModelSpec,
    ParamState, SyntheticData, Variant,
};
pub use sampler::{Draw, SamplerConfig, Trace};
