//! Pooled posterior summaries of relabeled traces.

use serde::{Deserialize, Serialize};

use super::convergence::{ess, rhat, Diagnostic};
use super::hpdi::hpdi;
use super::relabel::RelabeledTrace;
use crate::distributions::{nb_lpmf, zinb_lpmf, Count};
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelSpec, Variant};
use crate::sampler::{responsibilities, Draw};

/// Extra counts scanned past the largest observation for predictive pmfs.
pub const PMF_PADDING: Count = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryOptions {
    /// Minimum posterior mean weight for a component to count as occupied.
    pub occupancy_threshold: f64,
    pub hpdi_prob: f64,
    /// Defaults to the column means of the design matrix.
    pub reference_x: Option<Vec<f64>>,
    /// Upper bound on draws used for responsibility and pmf averages; draws
    /// are thinned evenly within each chain.
    pub max_draws: Option<usize>,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            occupancy_threshold: 0.01,
            hpdi_prob: 0.95,
            reference_x: None,
            max_draws: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    fn from_samples(samples: &[f64], prob: f64) -> Result<Self> {
        let iv = hpdi(samples, prob)?;
        Ok(Self {
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            lo: iv.lo,
            hi: iv.hi,
        })
    }
}

/// Incidence rate ratio `exp(beta_kd)` of one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrEstimate {
    pub covariate: String,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub excludes_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: usize,
    pub occupied: bool,
    pub prevalence: Estimate,
    pub mean_at_reference: Estimate,
    pub psi: Estimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Estimate>,
    /// Coefficients on the linear-predictor scale, intercept first.
    pub coefficients: Vec<Estimate>,
    /// IRRs for the non-intercept columns.
    pub irr: Vec<IrrEstimate>,
    /// Mode of the posterior-mean predictive pmf at the reference row. For
    /// the zero-inflated variant the zero mode is omitted.
    pub count_mode: Count,
    /// Mode of the observed counts hard-assigned to this component.
    pub empirical_mode: Option<Count>,
    pub assigned: usize,
    /// Posterior-mean predictive pmf at the reference row, `y = 0..`; empty
    /// for unoccupied components.
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub variant: Variant,
    pub n: usize,
    pub columns: Vec<String>,
    pub chains: usize,
    pub draws: usize,
    pub reference_x: Vec<f64>,
    /// Posterior mode of the per-draw occupied-component count.
    pub occupied_count: usize,
    /// `occupied_distribution[m]` is the posterior probability of `m` occupied components.
    pub occupied_distribution: Vec<f64>,
    pub components: Vec<ComponentSummary>,
    pub zero_fraction_data: f64,
    pub zero_fraction_predictive: f64,
    #[serde(skip)]
    pub assignments: Vec<usize>,
}

impl FitSummary {
    pub fn occupied(&self) -> impl Iterator<Item = &ComponentSummary> {
        self.components.iter().filter(|c| c.occupied)
    }
}

fn sorted_by_chain(traces: &[RelabeledTrace]) -> Vec<&RelabeledTrace> {
    let mut sorted: Vec<&RelabeledTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| t.chain_id);
    sorted
}

/// All draws, chains in ascending `chain_id` order.
pub fn pooled(traces: &[RelabeledTrace]) -> Vec<&Draw> {
    sorted_by_chain(traces)
        .into_iter()
        .flat_map(|t| t.draws.iter())
        .collect()
}

/// Evenly thinned draws, at most `max_draws` in total.
pub fn thinned(traces: &[RelabeledTrace], max_draws: Option<usize>) -> Vec<&Draw> {
    let Some(limit) = max_draws else {
        return pooled(traces);
    };
    let per_chain = (limit / traces.len().max(1)).max(1);
    sorted_by_chain(traces)
        .into_iter()
        .flat_map(|t| {
            let stride = t.draws.len().div_ceil(per_chain).max(1);
            t.draws.iter().step_by(stride)
        })
        .collect()
}

/// Responsibilities averaged over draws, row-major `n x k`.
pub fn mean_responsibilities(draws: &[&Draw], data: &Dataset, spec: &ModelSpec) -> Vec<f64> {
    let k = draws.first().map_or(0, |d| d.params.k());
    let mut acc = vec![0.0; data.n() * k];
    for d in draws {
        for (a, r) in acc.iter_mut().zip(responsibilities(&d.params, data, spec)) {
            *a += r;
        }
    }
    let m = draws.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

/// Argmax of each row; ties go to the lower index.
pub fn argmax_rows(resp: &[f64], k: usize) -> Vec<usize> {
    resp.chunks(k)
        .map(|row| {
            let mut best = 0;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Hard assignment of every observation to its highest trace-averaged
/// responsibility, using every stored draw.
pub fn hard_assignments(traces: &[RelabeledTrace], data: &Dataset, spec: &ModelSpec) -> Vec<usize> {
    let draws = pooled(traces);
    let k = draws.first().map_or(1, |d| d.params.k());
    argmax_rows(&mean_responsibilities(&draws, data, spec), k)
}

/// Number of components with weight at least `threshold`, per pooled draw.
pub fn occupied_counts(traces: &[RelabeledTrace], threshold: f64) -> Vec<usize> {
    pooled(traces)
        .iter()
        .map(|d| d.params.c.iter().filter(|&&c| c >= threshold).count())
        .collect()
}

/// Posterior predictive probability of a zero count, averaged over observations.
pub fn predictive_zero_fraction(draws: &[&Draw], data: &Dataset) -> f64 {
    let mut total = 0.0;
    for d in draws {
        let p = &d.params;
        let mut sum = 0.0;
        for i in 0..data.n() {
            let x = data.row(i);
            for k in 0..p.k() {
                if p.c[k] > 0.0 {
                    sum += p.c[k] * zinb_lpmf(0, p.pi_k(k), p.mean_at(k, x), p.psi[k]).exp();
                }
            }
        }
        total += sum / data.n() as f64;
    }
    total / draws.len().max(1) as f64
}

fn empirical_mode(counts: impl Iterator<Item = Count>, skip_zero: bool) -> Option<Count> {
    let mut hist: std::collections::BTreeMap<Count, usize> = Default::default();
    for y in counts.filter(|&y| !(skip_zero && y == 0)) {
        *hist.entry(y).or_default() += 1;
    }
    // Ties go to the smaller count.
    hist.into_iter()
        .fold(None, |best: Option<(Count, usize)>, (y, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((y, c)),
        })
        .map(|(y, _)| y)
}

/// Per-component posterior summaries, occupancy, hard assignments and
/// predictive zero fractions.
pub fn summarize(
    traces: &[RelabeledTrace],
    data: &Dataset,
    spec: &ModelSpec,
    options: &SummaryOptions,
) -> Result<FitSummary> {
    let draws = pooled(traces);
    let Some(first) = draws.first() else {
        return Err(Error::Degenerate("no stored draws".into()));
    };
    let k = first.params.k();
    let d = data.d();
    let prob = options.hpdi_prob;
    let reference_x = options
        .reference_x
        .clone()
        .unwrap_or_else(|| data.column_means());
    if reference_x.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: reference_x.len(),
        });
    }

    let mut distribution = vec![0.0; k + 1];
    for m in occupied_counts(traces, options.occupancy_threshold) {
        distribution[m] += 1.0;
    }
    distribution.iter_mut().for_each(|p| *p /= draws.len() as f64);
    let occupied_count = distribution
        .iter()
        .enumerate()
        .fold(0, |best, (m, &p)| if p > distribution[best] { m } else { best });

    let subset = thinned(traces, options.max_draws);
    let resp = mean_responsibilities(&subset, data, spec);
    let assignments = argmax_rows(&resp, k);
    let zinb = spec.is_zinb();
    let y_top = data.y_max() + PMF_PADDING;

    let column = |f: &dyn Fn(&Draw) -> f64| -> Vec<f64> { draws.iter().map(|dr| f(dr)).collect() };
    let mut components = Vec::with_capacity(k);
    for j in 0..k {
        let prevalence = Estimate::from_samples(&column(&|dr| dr.params.c[j]), prob)?;
        let occupied = prevalence.mean >= options.occupancy_threshold;
        let mean_at_reference =
            Estimate::from_samples(&column(&|dr| dr.params.mean_at(j, &reference_x)), prob)?;
        let psi = Estimate::from_samples(&column(&|dr| dr.params.psi[j]), prob)?;
        let pi = if zinb {
            Some(Estimate::from_samples(&column(&|dr| dr.params.pi_k(j)), prob)?)
        } else {
            None
        };
        let mut coefficients = Vec::with_capacity(d);
        let mut irr = Vec::with_capacity(d.saturating_sub(1));
        for col in 0..d {
            let b = column(&|dr| dr.params.beta.get(j, col));
            coefficients.push(Estimate::from_samples(&b, prob)?);
            if col > 0 {
                let ratios: Vec<f64> = b.iter().map(|v| v.exp()).collect();
                let e = Estimate::from_samples(&ratios, prob)?;
                irr.push(IrrEstimate {
                    covariate: data.column_names()[col].clone(),
                    mean: e.mean,
                    lo: e.lo,
                    hi: e.hi,
                    excludes_one: e.lo > 1.0 || e.hi < 1.0,
                });
            }
        }
        let pmf = if occupied {
            let mut acc = vec![0.0; y_top as usize + 1];
            for dr in &subset {
                let p = &dr.params;
                let mu = p.mean_at(j, &reference_x);
                for (y, a) in acc.iter_mut().enumerate() {
                    let lp = if zinb {
                        zinb_lpmf(y as Count, p.pi_k(j), mu, p.psi[j])
                    } else {
                        nb_lpmf(y as Count, mu, p.psi[j])
                    };
                    *a += lp.exp();
                }
            }
            acc.iter_mut().for_each(|a| *a /= subset.len() as f64);
            acc
        } else {
            Vec::new()
        };
        let start = usize::from(zinb);
        let count_mode = pmf
            .iter()
            .enumerate()
            .skip(start)
            .fold(None, |best: Option<(usize, f64)>, (y, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((y, p)),
            })
            .map_or(0, |(y, _)| y as Count);
        let members = assignments.iter().enumerate().filter(|(_, &a)| a == j);
        let assigned = members.clone().count();
        let empirical = empirical_mode(members.map(|(i, _)| data.y()[i]), zinb);
        components.push(ComponentSummary {
            component: j,
            occupied,
            prevalence,
            mean_at_reference,
            psi,
            pi,
            coefficients,
            irr,
            count_mode,
            empirical_mode: empirical,
            assigned,
            pmf,
        });
    }
    if !components.iter().any(|c| c.occupied) {
        return Err(Error::Degenerate(format!(
            "no component reaches the occupancy threshold {}",
            options.occupancy_threshold
        )));
    }

    let zeros = data.y().iter().filter(|&&y| y == 0).count();
    Ok(FitSummary {
        variant: spec.variant,
        n: data.n(),
        columns: data.column_names().to_vec(),
        chains: traces.len(),
        draws: draws.len(),
        reference_x,
        occupied_count,
        occupied_distribution: distribution,
        components,
        zero_fraction_data: zeros as f64 / data.n() as f64,
        zero_fraction_predictive: predictive_zero_fraction(&subset, data),
        assignments,
    })
}

/// Convergence of one tracked scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamConvergence {
    pub parameter: String,
    pub rhat: Diagnostic,
    /// Sum of per-chain effective sample sizes.
    pub ess: f64,
}

/// Split R-hat and ESS for the weights, coefficients and log precisions of
/// the occupied components. Needs at least two chains.
pub fn tracked_convergence(
    traces: &[RelabeledTrace],
    summary: &FitSummary,
) -> Result<Vec<ParamConvergence>> {
    let chains = sorted_by_chain(traces);
    let mut out = Vec::new();
    let mut track = |name: String, f: &dyn Fn(&Draw) -> f64| -> Result<()> {
        let series: Vec<Vec<f64>> = chains
            .iter()
            .map(|t| t.draws.iter().map(f).collect())
            .collect();
        let r = rhat(&series)?;
        let mut total = 0.0;
        for s in &series {
            total += ess(s)?.value;
        }
        out.push(ParamConvergence {
            parameter: name,
            rhat: r,
            ess: total,
        });
        Ok(())
    };
    for comp in summary.occupied() {
        let j = comp.component;
        track(format!("c[{j}]"), &|d| d.params.c[j])?;
        for (col, name) in summary.columns.iter().enumerate() {
            track(format!("beta[{j},{name}]"), &|d| d.params.beta.get(j, col))?;
        }
        track(format!("log_psi[{j}]"), &|d| d.params.psi[j].ln())?;
        if summary.variant == Variant::Zinb {
            track(format!("pi[{j}]"), &|d| d.params.pi_k(j))?;
        }
    }
    Ok(out)
}
