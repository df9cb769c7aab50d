//! Run configuration: a TOML file mirroring the `fit` flags, merged with
//! precedence flag > file > default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nbmix::{Hyperparams, ModelSpec, SamplerConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::ingest::Encoding;

pub const DEFAULT_RHAT_THRESHOLD: f64 = 1.1;
pub const DEFAULT_OCCUPANCY: f64 = 0.01;
pub const DEFAULT_MAX_ASSIGNMENT_DRAWS: usize = 1000;
pub const DEFAULT_OUTCOME: &str = "y";

/// Every field is optional so a file and the command line can each supply a
/// subset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub outcome: Option<String>,
    pub delimiter: Option<char>,
    pub model: Option<Variant>,
    pub kmax: Option<usize>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
    pub adapt: Option<usize>,
    pub target_accept: Option<f64>,
    pub alpha0: Option<f64>,
    pub m0: Option<f64>,
    pub s0: Option<f64>,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
    pub pi_a: Option<f64>,
    pub pi_b: Option<f64>,
    pub rhat_threshold: Option<f64>,
    pub occupancy: Option<f64>,
    pub max_assignment_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub categorical: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub levels: BTreeMap<String, Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`; map entries merge by key.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            input, out, outcome, delimiter, model, kmax, iters, burnin, thin, chains, seed, adapt,
            target_accept, alpha0, m0, s0, a0, b0, pi_a, pi_b, rhat_threshold, occupancy,
            max_assignment_draws
        );
        self.categorical.extend(over.categorical);
        self.levels.extend(over.levels);
        self
    }

    pub fn resolve(&self) -> CliResult<FitPlan> {
        let usage = |m: String| CliError::Usage(m);
        let input = self.input.clone().ok_or_else(|| usage("an input file is required".into()))?;
        let out = self.out.clone().ok_or_else(|| usage("an output directory is required".into()))?;
        let hd = Hyperparams::default();
        let hyper = Hyperparams {
            alpha0: self.alpha0.unwrap_or(hd.alpha0),
            m0: self.m0.unwrap_or(hd.m0),
            s0: self.s0.unwrap_or(hd.s0),
            a0: self.a0.unwrap_or(hd.a0),
            b0: self.b0.unwrap_or(hd.b0),
            k_max: self.kmax.unwrap_or(hd.k_max),
        };
        let mut spec = match self.model.unwrap_or(Variant::Nb) {
            Variant::Nb => ModelSpec::nb(hyper),
            Variant::Zinb => ModelSpec::zinb(hyper),
        };
        spec.pi_prior = (
            self.pi_a.unwrap_or(spec.pi_prior.0),
            self.pi_b.unwrap_or(spec.pi_prior.1),
        );
        spec.validate().map_err(|e| usage(e.to_string()))?;

        let sd = SamplerConfig::default();
        let iterations = self.iters.unwrap_or(sd.iterations);
        let burn_in = self.burnin.unwrap_or(iterations / 2);
        let sampler = SamplerConfig {
            iterations,
            burn_in,
            thin: self.thin.unwrap_or(sd.thin),
            chains: self.chains.unwrap_or(sd.chains),
            master_seed: self.seed.unwrap_or(sd.master_seed),
            adapt_window: self.adapt.unwrap_or(burn_in),
            target_accept: self.target_accept.unwrap_or(sd.target_accept),
        };
        sampler.validate().map_err(|e| usage(e.to_string()))?;

        let rhat_threshold = self.rhat_threshold.unwrap_or(DEFAULT_RHAT_THRESHOLD);
        let occupancy = self.occupancy.unwrap_or(DEFAULT_OCCUPANCY);
        if !(rhat_threshold >= 1.0) {
            return Err(usage("rhat threshold must be at least 1".into()));
        }
        if !(occupancy > 0.0 && occupancy < 1.0) {
            return Err(usage("occupancy threshold must lie in (0, 1)".into()));
        }
        Ok(FitPlan {
            input,
            out,
            encoding: Encoding {
                outcome: self.outcome.clone().unwrap_or_else(|| DEFAULT_OUTCOME.into()),
                delimiter: self.delimiter,
                categorical: self.categorical.clone(),
                levels: self.levels.clone(),
            },
            spec,
            sampler,
            rhat_threshold,
            occupancy,
            max_assignment_draws: self.max_assignment_draws.unwrap_or(DEFAULT_MAX_ASSIGNMENT_DRAWS),
        })
    }
}

/// A fully resolved fit, persisted as `run.toml` next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPlan {
    pub input: PathBuf,
    pub out: PathBuf,
    pub encoding: Encoding,
    pub spec: ModelSpec,
    pub sampler: SamplerConfig,
    pub rhat_threshold: f64,
    pub occupancy: f64,
    pub max_assignment_draws: usize,
}

impl FitPlan {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}
