//! Blocked Gibbs sampler for the finite symmetric-Dirichlet mixture, with
//! adaptive random-walk Metropolis steps for coefficients and precisions,
//! and a multi-chain driver.

mod updates;

pub use updates::{
    responsibilities, sweep, update_assignments, update_coefficients, update_latent_zeros,
    update_precisions, update_weights, update_zero_inflation, update_zero_probabilities,
    MoveFlag, ProposalScales, SweepStats,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coefficients, Dataset, MixtureParams, ModelSpec, ParamState};

/// Robbins–Monro step exponent for proposal adaptation.
const ADAPT_DECAY: f64 = 0.6;
const INITIAL_BETA_SCALE: f64 = 0.1;
const INITIAL_LOG_PSI_SCALE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub master_seed: u64,
    /// Number of initial burn-in sweeps during which proposal scales adapt.
    pub adapt_window: usize,
    pub target_accept: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 5_000,
            thin: 1,
            chains: 4,
            master_seed: 1,
            adapt_window: 5_000,
            target_accept: 0.3,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return bad("burn_in must be smaller than iterations");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.chains == 0 {
            return bad("chains must be at least 1");
        }
        if self.adapt_window > self.burn_in {
            return bad("adaptation must be confined to burn-in");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        Ok(())
    }

    /// Number of stored draws per chain.
    pub fn stored_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// A stored post-burn-in state. Assignments are summarized by per-component
/// counts; the full `z` vector is not retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub params: MixtureParams,
    pub counts: Vec<usize>,
    /// Structural zeros per component (zero-inflated variant only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_zeros: Option<Vec<usize>>,
}

impl Draw {
    pub fn from_state(state: &ParamState) -> Self {
        let structural_zeros = state.w.as_ref().map(|w| {
            let mut s = vec![0; state.params.k()];
            for (&z, &wi) in state.z.iter().zip(w) {
                s[z] += usize::from(wi);
            }
            s
        });
        Self {
            params: state.params.clone(),
            counts: state.counts(),
            structural_zeros,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.params.validate()?;
        if self.counts.len() != self.params.k() || self.counts.iter().sum::<usize>() != n {
            return Err(Error::InvalidState("component counts do not cover the data".into()));
        }
        Ok(())
    }

    /// Reorders components; see [`MixtureParams::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            params: self.params.permuted(perm),
            counts: perm.iter().map(|&o| self.counts[o]).collect(),
            structural_zeros: self
                .structural_zeros
                .as_ref()
                .map(|s| perm.iter().map(|&o| s[o]).collect()),
        }
    }
}

/// Accepted and proposed Metropolis moves, counted per component.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub beta_accepted: Vec<usize>,
    pub beta_proposed: Vec<usize>,
    pub psi_accepted: Vec<usize>,
    pub psi_proposed: Vec<usize>,
}

impl AcceptanceStats {
    pub fn new(k: usize) -> Self {
        Self {
            beta_accepted: vec![0; k],
            beta_proposed: vec![0; k],
            psi_accepted: vec![0; k],
            psi_proposed: vec![0; k],
        }
    }

    fn record(&mut self, stats: &SweepStats, d: usize) {
        for (idx, flag) in stats.beta.iter().enumerate() {
            if let Some(acc) = flag {
                self.beta_proposed[idx / d] += 1;
                self.beta_accepted[idx / d] += usize::from(*acc);
            }
        }
        for (k, flag) in stats.psi.iter().enumerate() {
            if let Some(acc) = flag {
                self.psi_proposed[k] += 1;
                self.psi_accepted[k] += usize::from(*acc);
            }
        }
    }

    fn rate(acc: &[usize], prop: &[usize]) -> Option<f64> {
        let p: usize = prop.iter().sum();
        (p > 0).then(|| acc.iter().sum::<usize>() as f64 / p as f64)
    }

    pub fn beta_rate(&self) -> Option<f64> {
        Self::rate(&self.beta_accepted, &self.beta_proposed)
    }

    pub fn psi_rate(&self) -> Option<f64> {
        Self::rate(&self.psi_accepted, &self.psi_proposed)
    }

    pub fn beta_rate_of(&self, k: usize) -> Option<f64> {
        Self::rate(&self.beta_accepted[k..=k], &self.beta_proposed[k..=k])
    }

    pub fn psi_rate_of(&self, k: usize) -> Option<f64> {
        Self::rate(&self.psi_accepted[k..=k], &self.psi_proposed[k..=k])
    }
}

/// Post-burn-in output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub chain_id: usize,
    pub seed: u64,
    pub draws: Vec<Draw>,
    /// Post-burn-in acceptance counts.
    pub acceptance: AcceptanceStats,
    pub clamped_predictors: usize,
    pub nonfinite_rejections: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn k(&self) -> usize {
        self.draws.first().map_or(0, |d| d.params.k())
    }
}

/// Chain-specific random stream: the master seed selects the key, the chain
/// index selects the stream.
pub fn chain_rng(master_seed: u64, chain_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(chain_id as u64);
    rng
}

/// Starting state: observations sorted by count and cut into `k_max`
/// near-equal bins, bin `b` labelled `(b + chain_id) mod k_max`.
pub fn initial_state(data: &Dataset, spec: &ModelSpec, chain_id: usize) -> ParamState {
    let k = spec.k_max();
    let n = data.n();
    let d = data.d();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (data.y()[i], i));
    let mut z = vec![0; n];
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (rank, &i) in order.iter().enumerate() {
        let bin = rank * k / n;
        let label = (bin + chain_id) % k;
        z[i] = label;
        sums[label] += data.y()[i] as f64;
        counts[label] += 1;
    }
    let overall = data.y().iter().sum::<u64>() as f64 / n as f64;
    let mut beta = Coefficients::zeros(k, d);
    for j in 0..k {
        let mean = if counts[j] > 0 {
            sums[j] / counts[j] as f64
        } else {
            overall
        };
        beta.set(j, 0, (mean + 0.5).ln());
    }
    let (a, b) = spec.pi_prior;
    ParamState {
        params: MixtureParams {
            c: vec![1.0 / k as f64; k],
            beta,
            psi: vec![1.0; k],
            pi: spec.is_zinb().then(|| vec![a / (a + b); k]),
        },
        z,
        w: spec.is_zinb().then(|| vec![false; n]),
    }
}

/// One Robbins–Monro step on the log proposal widths.
pub fn adapt_scales(scales: &mut ProposalScales, stats: &SweepStats, target: f64, step: usize) {
    let gain = 1.0 / (step as f64).powf(ADAPT_DECAY);
    let nudge = |s: &mut f64, flag: &MoveFlag| {
        if let Some(acc) = flag {
            let a = if *acc { 1.0 } else { 0.0 };
            *s = (s.ln() + gain * (a - target)).exp();
        }
    };
    for (s, f) in scales.beta.iter_mut().zip(&stats.beta) {
        nudge(s, f);
    }
    for (s, f) in scales.log_psi.iter_mut().zip(&stats.psi) {
        nudge(s, f);
    }
}

fn check_finite(state: &ParamState, chain: usize, sweep: usize) -> Result<()> {
    let p = &state.params;
    let ok = p.c.iter().all(|v| v.is_finite())
        && p.beta.values().iter().all(|v| v.is_finite())
        && p.psi.iter().all(|v| v.is_finite() && *v > 0.0)
        && p.pi.as_ref().is_none_or(|pi| pi.iter().all(|v| v.is_finite()));
    if ok {
        Ok(())
    } else {
        Err(Error::NumericFault {
            chain,
            sweep,
            detail: format!("{p:?}"),
        })
    }
}

/// Runs one chain; the result is a pure function of `(spec, data, config, chain_id)`.
pub fn run_chain(
    spec: &ModelSpec,
    data: &Dataset,
    config: &SamplerConfig,
    chain_id: usize,
) -> Result<Trace> {
    spec.validate()?;
    config.validate()?;
    let k = spec.k_max();
    let d = data.d();
    let mut rng = chain_rng(config.master_seed, chain_id);
    let mut state = initial_state(data, spec, chain_id);
    state.validate(data)?;
    let mut scales = ProposalScales::uniform(k, d, INITIAL_BETA_SCALE, INITIAL_LOG_PSI_SCALE);
    let mut acceptance = AcceptanceStats::new(k);
    let mut draws = Vec::with_capacity(config.stored_draws());
    let mut clamped = 0;
    let mut nonfinite = 0;
    for t in 0..config.iterations {
        let stats = sweep(&mut state, data, spec, &scales, &mut rng).map_err(|e| match e {
            Error::NumericFault { .. } => e,
            other => Error::NumericFault {
                chain: chain_id,
                sweep: t,
                detail: other.to_string(),
            },
        })?;
        check_finite(&state, chain_id, t)?;
        if t < config.adapt_window {
            adapt_scales(&mut scales, &stats, config.target_accept, t + 1);
        }
        if t >= config.burn_in {
            acceptance.record(&stats, d);
            clamped += stats.clamped;
            nonfinite += stats.nonfinite;
            if (t - config.burn_in + 1) % config.thin == 0 {
                draws.push(Draw::from_state(&state));
            }
        }
    }
    Ok(Trace {
        chain_id,
        seed: config.master_seed,
        draws,
        acceptance,
        clamped_predictors: clamped,
        nonfinite_rejections: nonfinite,
    })
}

/// Runs `config.chains` chains on separate threads. Results match running
/// each chain sequentially with [`run_chain`].
pub fn run_chains(spec: &ModelSpec, data: &Dataset, config: &SamplerConfig) -> Result<Vec<Trace>> {
    config.validate()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chains)
            .map(|chain| scope.spawn(move || run_chain(spec, data, config, chain)))
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(chain, h)| {
                h.join().unwrap_or_else(|_| {
                    Err(Error::NumericFault {
                        chain,
                        sweep: 0,
                        detail: "chain thread panicked".into(),
                    })
                })
            })
            .collect()
    })
}

/// Runs chains one after another on the calling thread.
pub fn run_chains_sequential(
    spec: &ModelSpec,
    data: &Dataset,
    config: &SamplerConfig,
) -> Result<Vec<Trace>> {
    config.validate()?;
    (0..config.chains)
        .map(|chain| run_chain(spec, data, config, chain))
        .collect()
}
