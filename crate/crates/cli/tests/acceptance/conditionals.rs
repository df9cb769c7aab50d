//! Long-run Metropolis draws under frozen assignments against a numerically
//! integrated conditional density.

use nbmix::distributions::{negbin_log_pmf, NegBinParams};
use nbmix::model::{generate_synthetic, Coefficients, CovariateLaw, Hyperparams, MixtureParams};
use nbmix::sampler::{update_coefficients, update_precisions, ProposalScales};
use nbmix::{Dataset, ModelSpec, ParamState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Check;

const DRAWS: usize = 50_000;
const THIN: usize = 4;
const BURN: usize = 2_000;

fn instance() -> (Dataset, MixtureParams) {
    let truth = MixtureParams {
        c: vec![1.0],
        beta: Coefficients::from_rows(&[vec![1.4, 0.35]]).unwrap(),
        psi: vec![3.0],
        pi: None,
    };
    let syn = generate_synthetic(&truth, 50, &CovariateLaw::standard(1, 0), 11).unwrap();
    (syn.data, truth)
}

fn log_lik(data: &Dataset, beta: &[f64], psi: f64) -> f64 {
    (0..data.n())
        .map(|i| {
            let x = data.row(i);
            let mu = (beta[0] * x[0] + beta[1] * x[1]).exp();
            negbin_log_pmf(data.y()[i], &NegBinParams::new(mu, psi).unwrap())
        })
        .sum()
}

/// KS distance between samples and the density `exp(log_density)`, integrated
/// by the trapezoid rule on a grid adapted to where the mass lies.
fn ks_against_grid(samples: &mut [f64], log_density: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let coarse: Vec<(f64, f64)> = (0..=4000)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / 4000.0;
            (t, log_density(t))
        })
        .collect();
    let top = coarse.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let live: Vec<f64> = coarse.iter().filter(|p| p.1 > top - 40.0).map(|p| p.0).collect();
    let step = (hi - lo) / 4000.0;
    let (a, b) = (live[0] - step, live[live.len() - 1] + step);
    let m = 40_000;
    let grid: Vec<f64> = (0..=m).map(|i| a + (b - a) * i as f64 / m as f64).collect();
    let dens: Vec<f64> = grid.iter().map(|&t| (log_density(t) - top).exp()).collect();
    let mut cdf = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let total = cdf[m];
    let f = |x: f64| -> f64 {
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        let pos = (x - a) / (b - a) * m as f64;
        let i = (pos.floor() as usize).min(m - 1);
        let w = pos - i as f64;
        (cdf[i] * (1.0 - w) + cdf[i + 1] * w) / total
    };
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let fs = f(s);
            (fs - i as f64 / n).abs().max(((i + 1) as f64 / n - fs).abs())
        })
        .fold(0.0, f64::max)
}

fn frozen_state(data: &Dataset, truth: &MixtureParams) -> ParamState {
    ParamState {
        params: truth.clone(),
        z: vec![0; data.n()],
        w: None,
    }
}

fn intercept_ks() -> f64 {
    let (data, truth) = instance();
    let spec = ModelSpec::nb(Hyperparams { k_max: 1, ..Default::default() });
    let mut state = frozen_state(&data, &truth);
    // A zero-width proposal holds the slope at its true value.
    let scales = ProposalScales {
        beta: vec![0.15, 0.0],
        log_psi: vec![0.0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples = Vec::with_capacity(DRAWS);
    for t in 0..BURN + DRAWS * THIN {
        update_coefficients(&mut state, &data, &spec, &scales, &mut rng).unwrap();
        if t >= BURN && (t - BURN) % THIN == 0 {
            samples.push(state.params.beta.get(0, 0));
        }
    }
    assert_eq!(state.params.beta.get(0, 1), 0.35);
    let h = spec.hyper;
    let slope = truth.beta.get(0, 1);
    let psi = truth.psi[0];
    let log_density = |b: f64| -0.5 * ((b - h.m0) / h.s0).powi(2) + log_lik(&data, &[b, slope], psi);
    ks_against_grid(&mut samples, log_density, -3.0, 5.0)
}

fn log_precision_ks() -> f64 {
    let (data, truth) = instance();
    let spec = ModelSpec::nb(Hyperparams { k_max: 1, ..Default::default() });
    let mut state = frozen_state(&data, &truth);
    let scales = ProposalScales {
        beta: vec![0.0, 0.0],
        log_psi: vec![0.8],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut samples = Vec::with_capacity(DRAWS);
    for t in 0..BURN + DRAWS * THIN {
        update_precisions(&mut state, &data, &spec, &scales, &mut rng).unwrap();
        if t >= BURN && (t - BURN) % THIN == 0 {
            samples.push(state.params.psi[0].ln());
        }
    }
    let h = spec.hyper;
    let beta = truth.beta.row(0).to_vec();
    // Density of eta = ln psi: normal prior in eta times the likelihood.
    let log_density = |eta: f64| -0.5 * ((eta - h.a0) / h.b0).powi(2) + log_lik(&data, &beta, eta.exp());
    ks_against_grid(&mut samples, log_density, -6.0, 12.0)
}

pub fn criterion() -> Vec<Check> {
    let b = intercept_ks();
    let p = log_precision_ks();
    vec![
        Check::new(format!("intercept KS {b:.4} < 0.02"), b < 0.02),
        Check::new(format!("ln psi KS {p:.4} < 0.02"), p < 0.02),
    ]
}
