//! Single-block conditional updates. Each update leaves the joint posterior
//! invariant on its own; [`sweep`] composes them into one Gibbs scan.

use rand::Rng;

use crate::distributions::{
    self, categorical_index, dirichlet_unchecked, ln_factorial, ln_rising, sample_log_gamma,
    standard_normal,
};
use crate::error::{Error, Result};
use crate::model::{clamp_predictor, dot, Dataset, Hyperparams, MixtureParams, ModelSpec, ParamState};

/// Random-walk proposal widths, one per coefficient and one per log-precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalScales {
    /// Row-major `k_max x d`.
    pub beta: Vec<f64>,
    pub log_psi: Vec<f64>,
}

impl ProposalScales {
    pub fn uniform(k: usize, d: usize, beta: f64, log_psi: f64) -> Self {
        Self {
            beta: vec![beta; k * d],
            log_psi: vec![log_psi; k],
        }
    }
}

/// Outcome of one Metropolis proposal; `None` means the block was refreshed
/// from the prior because its component was empty.
pub type MoveFlag = Option<bool>;

/// Per-sweep bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepStats {
    pub beta: Vec<MoveFlag>,
    pub psi: Vec<MoveFlag>,
    /// Linear predictors that hit the clamp during the sweep.
    pub clamped: usize,
    /// Proposals rejected because the acceptance ratio was not finite.
    pub nonfinite: usize,
}

/// Per-component quantities that depend only on `(c_k, psi_k, pi_k)`.
struct ComponentTable {
    log_c: f64,
    psi: f64,
    psi_ln_psi: f64,
    log_pi: f64,
    log_1m_pi: f64,
    /// `ln_rising(psi, y) - ln y!` for `y = 0..=y_max`.
    count_term: Vec<f64>,
}

fn component_tables(p: &MixtureParams, spec: &ModelSpec, log_fact: &[f64]) -> Vec<ComponentTable> {
    (0..p.k())
        .map(|k| {
            let psi = p.psi[k];
            let pi = if spec.is_zinb() { p.pi_k(k) } else { 0.0 };
            ComponentTable {
                log_c: p.c[k].ln(),
                psi,
                psi_ln_psi: psi * psi.ln(),
                log_pi: pi.ln(),
                log_1m_pi: (-pi).ln_1p(),
                count_term: log_fact
                    .iter()
                    .enumerate()
                    .map(|(y, lf)| ln_rising(psi, y as u64) - lf)
                    .collect(),
            }
        })
        .collect()
}

fn log_factorials(y_max: u64) -> Vec<f64> {
    (0..=y_max).map(ln_factorial).collect()
}

/// NB log mass from cached terms: `psi ln psi + y eta - (psi + y) ln(psi + mu)`.
#[inline]
fn cached_nb(table: &ComponentTable, y: u64, eta: f64) -> f64 {
    let yf = y as f64;
    table.count_term[y as usize] + table.psi_ln_psi + yf * eta
        - (table.psi + yf) * (table.psi + eta.exp()).ln()
}

#[inline]
fn cached_mass(table: &ComponentTable, zinb: bool, y: u64, eta: f64) -> f64 {
    let nb = cached_nb(table, y, eta);
    if !zinb || table.log_pi == f64::NEG_INFINITY {
        return nb;
    }
    if y > 0 {
        table.log_1m_pi + nb
    } else {
        distributions::log_add_exp(table.log_pi, table.log_1m_pi + nb)
    }
}

/// Writes into `out` the posterior assignment probabilities of observation `i`
/// and returns how many linear predictors were clamped.
fn fill_responsibilities(
    params: &MixtureParams,
    data: &Dataset,
    tables: &[ComponentTable],
    zinb: bool,
    i: usize,
    out: &mut [f64],
) -> usize {
    let x = data.row(i);
    let y = data.y()[i];
    let mut clamped = 0;
    let mut top = f64::NEG_INFINITY;
    for (k, slot) in out.iter_mut().enumerate() {
        let t = &tables[k];
        if t.log_c == f64::NEG_INFINITY {
            *slot = f64::NEG_INFINITY;
            continue;
        }
        let (eta, hit) = clamp_predictor(dot(params.beta.row(k), x));
        clamped += usize::from(hit);
        *slot = t.log_c + cached_mass(t, zinb, y, eta);
        top = top.max(*slot);
    }
    let mut total = 0.0;
    for slot in out.iter_mut() {
        *slot = (*slot - top).exp();
        total += *slot;
    }
    for slot in out.iter_mut() {
        *slot /= total;
    }
    clamped
}

/// Posterior assignment probabilities `r_nk` of every observation under the
/// current parameters, row-major `n x k`.
pub fn responsibilities(params: &MixtureParams, data: &Dataset, spec: &ModelSpec) -> Vec<f64> {
    let k = params.k();
    let log_fact = log_factorials(data.y_max());
    let tables = component_tables(params, spec, &log_fact);
    let mut out = vec![0.0; data.n() * k];
    for (i, row) in out.chunks_mut(k).enumerate() {
        fill_responsibilities(params, data, &tables, spec.is_zinb(), i, row);
    }
    out
}

/// Gibbs draw of every `z_n` from `r_nk ∝ c_k f(y_n | mu_k(x_n), psi_k)`.
///
/// In the zero-inflated variant `f` is the ZINB mass, i.e. the latent zero
/// indicator is integrated out; redraw it with [`update_latent_zeros`] before
/// any update that conditions on it. Returns the number of clamped predictors.
pub fn update_assignments<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<usize> {
    let k = state.params.k();
    let log_fact = log_factorials(data.y_max());
    let tables = component_tables(&state.params, spec, &log_fact);
    let zinb = spec.is_zinb();
    let mut r = vec![0.0; k];
    let mut clamped = 0;
    for i in 0..data.n() {
        clamped += fill_responsibilities(&state.params, data, &tables, zinb, i, &mut r);
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidState(format!(
                "responsibilities of observation {i} are not finite"
            )));
        }
        let u: f64 = rng.random();
        state.z[i] = categorical_index(&r, u);
    }
    Ok(clamped)
}

/// Conjugate draw `c ~ Dirichlet(alpha0 + n_1, ..., alpha0 + n_K)`.
pub fn update_weights<R: Rng + ?Sized>(counts: &[usize], hyper: &Hyperparams, rng: &mut R) -> Vec<f64> {
    let alphas: Vec<f64> = counts.iter().map(|&n| hyper.alpha0 + n as f64).collect();
    dirichlet_unchecked(&alphas, rng)
}

/// Draws the structural-zero indicators given `z`.
///
/// `P(w_n = 1) = pi_k / (pi_k + (1 - pi_k) NB(0 | mu_k, psi_k))` for `y_n = 0`;
/// positive counts are never structural.
pub fn update_latent_zeros<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    rng: &mut R,
) -> Result<()> {
    let pi = state
        .params
        .pi
        .as_ref()
        .ok_or_else(|| Error::InvalidState("zero-inflation update on an NB state".into()))?;
    let mut w = state.w.take().unwrap_or_else(|| vec![false; data.n()]);
    for i in 0..data.n() {
        if data.y()[i] > 0 {
            w[i] = false;
            continue;
        }
        let k = state.z[i];
        let p = pi[k];
        w[i] = if p == 0.0 {
            false
        } else {
            let mu = state.params.mean_at(k, data.row(i));
            let psi = state.params.psi[k];
            let nb0 = (-psi * (mu / psi).ln_1p()).exp();
            let prob = p / (p + (1.0 - p) * nb0);
            rng.random::<f64>() < prob
        };
    }
    state.w = Some(w);
    Ok(())
}

/// Conjugate draw `pi_k ~ Beta(a + s_k, b + n_k - s_k)` with `s_k` the
/// structural zeros in component `k`.
pub fn update_zero_probabilities<R: Rng + ?Sized>(
    state: &mut ParamState,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<()> {
    let k = state.params.k();
    let w = state
        .w
        .as_ref()
        .ok_or_else(|| Error::InvalidState("latent zeros missing".into()))?;
    let mut assigned = vec![0usize; k];
    let mut structural = vec![0usize; k];
    for (&z, &wi) in state.z.iter().zip(w) {
        assigned[z] += 1;
        structural[z] += usize::from(wi);
    }
    let (a, b) = spec.pi_prior;
    let pi: Vec<f64> = (0..k)
        .map(|j| {
            let s = structural[j] as f64;
            sample_beta(a + s, b + (assigned[j] as f64 - s), rng)
        })
        .collect();
    state.params.pi = Some(pi);
    Ok(())
}

/// Latent-zero indicators followed by the zero-inflation probabilities.
pub fn update_zero_inflation<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<()> {
    if !spec.is_zinb() {
        return Err(Error::InvalidConfig("zero inflation requires the zinb variant".into()));
    }
    update_latent_zeros(state, data, rng)?;
    update_zero_probabilities(state, spec, rng)
}

fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let la = sample_log_gamma(a, rng);
    let lb = sample_log_gamma(b, rng);
    let m = la.max(lb);
    let ea = (la - m).exp();
    ea / (ea + (lb - m).exp())
}

/// Assigned counts per component and the observations whose NB term
/// enters each component's likelihood (structural zeros excluded).
fn members_by_component(state: &ParamState) -> (Vec<usize>, Vec<Vec<usize>>) {
    let k = state.params.k();
    let mut assigned = vec![0; k];
    let mut members = vec![Vec::new(); k];
    for (i, &z) in state.z.iter().enumerate() {
        assigned[z] += 1;
        if !state.w.as_ref().is_some_and(|w| w[i]) {
            members[z].push(i);
        }
    }
    (assigned, members)
}

/// Per-coordinate random-walk Metropolis on every `beta_kd`.
///
/// Empty components are refreshed from the `N(m0, s0^2)` prior.
pub fn update_coefficients<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    spec: &ModelSpec,
    scales: &ProposalScales,
    rng: &mut R,
) -> Result<SweepStats> {
    let (assigned, members) = members_by_component(state);
    coefficients_with_members(state, data, spec, scales, &assigned, &members, rng)
}

fn coefficients_with_members<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    spec: &ModelSpec,
    scales: &ProposalScales,
    assigned: &[usize],
    members: &[Vec<usize>],
    rng: &mut R,
) -> Result<SweepStats> {
    let h = &spec.hyper;
    let d = data.d();
    let k_max = state.params.k();
    let mut stats = SweepStats {
        beta: vec![None; k_max * d],
        ..Default::default()
    };
    let inv_var = 1.0 / (h.s0 * h.s0);
    let mut eta = Vec::new();
    let mut log_denom = Vec::new();
    let mut proposed = Vec::new();
    for k in 0..k_max {
        if assigned[k] == 0 {
            for j in 0..d {
                let draw = h.m0 + h.s0 * standard_normal(rng);
                state.params.beta.set(k, j, draw);
            }
            continue;
        }
        let psi = state.params.psi[k];
        let idx = &members[k];
        // Raw linear predictors and ln(psi + mu) for every member.
        eta.clear();
        log_denom.clear();
        for &i in idx {
            let e = dot(state.params.beta.row(k), data.row(i));
            let (ec, hit) = clamp_predictor(e);
            stats.clamped += usize::from(hit);
            eta.push(e);
            log_denom.push((psi + ec.exp()).ln());
        }
        for j in 0..d {
            let scale = scales.beta[k * d + j];
            let current = state.params.beta.get(k, j);
            let step = scale * standard_normal(rng);
            let candidate = current + step;
            let mut delta = 0.5 * inv_var * ((current - h.m0).powi(2) - (candidate - h.m0).powi(2));
            proposed.clear();
            for (m, &i) in idx.iter().enumerate() {
                let xij = data.x()[i * d + j];
                if xij == 0.0 {
                    proposed.push(log_denom[m]);
                    continue;
                }
                let y = data.y()[i] as f64;
                let old = clamp_predictor(eta[m]).0;
                let (new, hit) = clamp_predictor(eta[m] + step * xij);
                stats.clamped += usize::from(hit);
                let ld = (psi + new.exp()).ln();
                delta += y * (new - old) - (psi + y) * (ld - log_denom[m]);
                proposed.push(ld);
            }
            let u: f64 = rng.random();
            let accept = if delta.is_finite() {
                u.ln() < delta
            } else {
                stats.nonfinite += 1;
                false
            };
            if accept {
                state.params.beta.set(k, j, candidate);
                for (m, &i) in idx.iter().enumerate() {
                    eta[m] += step * data.x()[i * d + j];
                }
                std::mem::swap(&mut log_denom, &mut proposed);
            }
            stats.beta[k * d + j] = Some(accept);
        }
    }
    Ok(stats)
}

/// Random-walk Metropolis on `ln psi_k`, whose prior is `N(a0, b0^2)`.
///
/// Empty components are refreshed from the prior.
pub fn update_precisions<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    spec: &ModelSpec,
    scales: &ProposalScales,
    rng: &mut R,
) -> Result<SweepStats> {
    let (assigned, members) = members_by_component(state);
    precisions_with_members(state, data, spec, scales, &assigned, &members, rng)
}

fn precisions_with_members<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    spec: &ModelSpec,
    scales: &ProposalScales,
    assigned: &[usize],
    members: &[Vec<usize>],
    rng: &mut R,
) -> Result<SweepStats> {
    let h = &spec.hyper;
    let k_max = state.params.k();
    let mut stats = SweepStats {
        psi: vec![None; k_max],
        ..Default::default()
    };
    let mut hist: Vec<u32> = vec![0; data.y_max() as usize + 1];
    let mut mus = Vec::new();
    for k in 0..k_max {
        if assigned[k] == 0 {
            state.params.psi[k] = (h.a0 + h.b0 * standard_normal(rng)).exp();
            continue;
        }
        let idx = &members[k];
        mus.clear();
        let mut distinct = Vec::new();
        for &i in idx {
            let (e, hit) = clamp_predictor(dot(state.params.beta.row(k), data.row(i)));
            stats.clamped += usize::from(hit);
            mus.push(e.exp());
            let y = data.y()[i];
            if hist[y as usize] == 0 {
                distinct.push(y);
            }
            hist[y as usize] += 1;
        }
        let log_lik = |psi: f64| -> f64 {
            let mut ll = idx.len() as f64 * psi * psi.ln();
            for &y in &distinct {
                ll += f64::from(hist[y as usize]) * ln_rising(psi, y);
            }
            for (m, &i) in idx.iter().enumerate() {
                let y = data.y()[i] as f64;
                ll -= (psi + y) * (psi + mus[m]).ln();
            }
            ll
        };
        let current = state.params.psi[k].ln();
        let candidate = current + scales.log_psi[k] * standard_normal(rng);
        let inv_var = 1.0 / (h.b0 * h.b0);
        let mut delta = 0.5 * inv_var * ((current - h.a0).powi(2) - (candidate - h.a0).powi(2));
        if !idx.is_empty() {
            delta += log_lik(candidate.exp()) - log_lik(current.exp());
        }
        for &y in &distinct {
            hist[y as usize] = 0;
        }
        let u: f64 = rng.random();
        let accept = if delta.is_finite() {
            u.ln() < delta
        } else {
            stats.nonfinite += 1;
            false
        };
        if accept {
            state.params.psi[k] = candidate.exp();
        }
        stats.psi[k] = Some(accept);
    }
    Ok(stats)
}

/// One full scan: assignments, latent zeros, weights, coefficients,
/// precisions, zero-inflation probabilities.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ParamState,
    data: &Dataset,
    spec: &ModelSpec,
    scales: &ProposalScales,
    rng: &mut R,
) -> Result<SweepStats> {
    let clamped = update_assignments(state, data, spec, rng)?;
    if spec.is_zinb() {
        update_latent_zeros(state, data, rng)?;
    }
    let (assigned, members) = members_by_component(state);
    state.params.c = update_weights(&assigned, &spec.hyper, rng);
    let beta = coefficients_with_members(state, data, spec, scales, &assigned, &members, rng)?;
    let psi = precisions_with_members(state, data, spec, scales, &assigned, &members, rng)?;
    if spec.is_zinb() {
        update_zero_probabilities(state, spec, rng)?;
    }
    Ok(SweepStats {
        clamped: clamped + beta.clamped + psi.clamped,
        nonfinite: beta.nonfinite + psi.nonfinite,
        beta: beta.beta,
        psi: psi.psi,
    })
}
