use nbmix::diagnostics::{relabel_with, summarize, tracked_convergence, FitSummary, RelabeledTrace, SummaryOptions};
use nbmix::model::{Hyperparams, MixtureParams};
use nbmix::sampler::run_chains;
use nbmix::{Dataset, ModelSpec, SamplerConfig, Trace, Variant};
use nbmix_cli::simulate::{demo_truth, DEMO_N};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Check;

const OCCUPANCY: f64 = 0.01;

/// The four-chain headline fit, kept for the label-switching checks.
pub struct Fit {
    pub data: Dataset,
    pub traces: Vec<Trace>,
    pub relabeled: Vec<RelabeledTrace>,
    pub summary: FitSummary,
}

fn fit(variant: Variant, seed: u64) -> (MixtureParams, Vec<usize>, Fit) {
    let truth = demo_truth(variant);
    let params = truth.params().unwrap();
    let syn = truth.generate(DEMO_N, seed).unwrap();
    let spec = match variant {
        Variant::Nb => ModelSpec::nb(Hyperparams::default()),
        Variant::Zinb => ModelSpec::zinb(Hyperparams::default()),
    };
    let config = SamplerConfig {
        master_seed: seed,
        ..Default::default()
    };
    assert_eq!((config.chains, config.iterations, spec.k_max()), (4, 10_000, 10));
    let traces = run_chains(&spec, &syn.data, &config).unwrap();
    let relabeled = relabel_with(&traces, &syn.data.column_means(), OCCUPANCY);
    let options = SummaryOptions {
        occupancy_threshold: OCCUPANCY,
        max_draws: Some(1000),
        ..Default::default()
    };
    let summary = summarize(&relabeled, &syn.data, &spec, &options).unwrap();
    let fit = Fit {
        data: syn.data,
        traces,
        relabeled,
        summary,
    };
    (params, syn.z, fit)
}

/// Injective map from true to fitted labels maximizing agreement, found by
/// exhaustive search. Returns the map and the number of agreeing rows.
fn best_matching(truth: &[usize], fitted: &[usize], k_true: usize, k_fit: usize) -> (Vec<usize>, usize) {
    let mut table = vec![vec![0usize; k_fit]; k_true];
    for (&t, &f) in truth.iter().zip(fitted) {
        table[t][f] += 1;
    }
    fn search(table: &[Vec<usize>], row: usize, used: &mut Vec<bool>, map: &mut Vec<usize>, best: &mut (Vec<usize>, usize)) {
        if row == table.len() {
            let score = map.iter().enumerate().map(|(t, &f)| table[t][f]).sum();
            if score > best.1 {
                *best = (map.clone(), score);
            }
            return;
        }
        for f in 0..used.len() {
            if !used[f] {
                used[f] = true;
                map.push(f);
                search(table, row + 1, used, map, best);
                map.pop();
                used[f] = false;
            }
        }
    }
    let mut best = ((0..k_true).collect(), 0);
    search(&table, 0, &mut vec![false; k_fit], &mut Vec::new(), &mut best);
    best
}

pub fn headline() -> (Vec<Check>, Fit) {
    let (truth, z, fit) = fit(Variant::Nb, 1);
    let s = &fit.summary;
    let k = truth.k();
    let (map, agree) = best_matching(&z, &s.assignments, k, s.components.len());
    let mut checks = vec![Check::new(format!("occupied mode {}", s.occupied_count), s.occupied_count == 3)];

    let prevalence_gap = (0..k)
        .map(|j| (s.components[map[j]].prevalence.mean - truth.c[j]).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(format!("prevalence gap {prevalence_gap:.3} <= 0.03"), prevalence_gap <= 0.03));

    let d = truth.d();
    let covered = (0..k)
        .flat_map(|j| (0..d).map(move |c| (j, c)))
        .filter(|&(j, c)| {
            let e = &s.components[map[j]].coefficients[c];
            (e.lo..=e.hi).contains(&truth.beta.get(j, c))
        })
        .count();
    let share = covered as f64 / (k * d) as f64;
    checks.push(Check::new(format!("{covered}/{} beta in 95% HPDI", k * d), share >= 0.9));

    let accuracy = agree as f64 / z.len() as f64;
    checks.push(Check::new(format!("accuracy {accuracy:.3} >= 0.85"), accuracy >= 0.85));

    let rhat = tracked_convergence(&fit.relabeled, s)
        .unwrap()
        .into_iter()
        .filter(|p| p.parameter.starts_with("beta"))
        .map(|p| if p.rhat.value.is_nan() { f64::INFINITY } else { p.rhat.value })
        .fold(0.0, f64::max);
    checks.push(Check::new(format!("max beta R-hat {rhat:.3} < 1.1"), rhat < 1.1));
    checks.push(Check::new(format!("per-chain occupied counts {:?}", chain_occupancy(&fit.relabeled)), true));
    (checks, fit)
}

pub fn zero_inflated() -> Vec<Check> {
    let (truth, z, fit) = fit(Variant::Zinb, 1);
    let s = &fit.summary;
    let (map, _) = best_matching(&z, &s.assignments, truth.k(), s.components.len());
    let true_pi = truth.pi.as_ref().unwrap();
    let mut checks: Vec<Check> = (0..truth.k())
        .map(|j| {
            let got = s.components[map[j]].pi.map_or(f64::NAN, |e| e.mean);
            Check::new(
                format!("pi{j} {got:.3} vs {}", true_pi[j]),
                (got - true_pi[j]).abs() <= 0.05,
            )
        })
        .collect();
    let gap = (s.zero_fraction_predictive - s.zero_fraction_data).abs();
    checks.push(Check::new(
        format!(
            "predictive zero share {:.4} vs data {:.4}",
            s.zero_fraction_predictive, s.zero_fraction_data
        ),
        gap <= 0.01,
    ));
    checks
}

/// Components with chain-mean weight at least `OCCUPANCY`, per chain.
fn chain_occupancy(traces: &[RelabeledTrace]) -> Vec<usize> {
    traces
        .iter()
        .map(|t| {
            (0..t.k())
                .filter(|&k| t.draws.iter().map(|d| d.params.c[k]).sum::<f64>() / t.len() as f64 >= OCCUPANCY)
                .count()
        })
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn label_switching(fit: &Fit) -> Vec<Check> {
    let reference = fit.data.column_means();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut scrambled = fit.traces.clone();
    for t in &mut scrambled {
        for d in &mut t.draws {
            let mut perm: Vec<usize> = (0..d.params.k()).collect();
            perm.shuffle(&mut rng);
            *d = d.permuted(&perm);
        }
    }
    let again = relabel_with(&scrambled, &reference, OCCUPANCY);
    let exact = again.iter().zip(&fit.relabeled).all(|(a, b)| a.draws == b.draws);
    let mut checks = vec![Check::new("scrambled trace relabels exactly", exact)];

    let mut worst: f64 = 0.0;
    for c in fit.summary.occupied() {
        let chains: Vec<Vec<f64>> = fit
            .relabeled
            .iter()
            .map(|t| t.draws.iter().map(|d| d.params.beta.get(c.component, 0)).collect())
            .collect();
        let pooled: Vec<f64> = chains.concat();
        let (_, sd) = mean_sd(&pooled);
        let means: Vec<f64> = chains.iter().map(|v| mean_sd(v).0).collect();
        let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - means.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(spread / sd);
    }
    checks.push(Check::new(
        format!("intercept chain means within {worst:.2} pooled SD"),
        worst < 2.0,
    ));
    checks
}
