use nbmix::distributions::{log_gamma, negbin_log_pmf, NegBinParams};
use nbmix::model::Hyperparams;
use nbmix::sampler::update_weights;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Check;

/// Pmf total up to the point where a geometric bound on the remaining
/// tail falls below 1e-13.
fn truncated_total(mu: f64, psi: f64) -> f64 {
    let p = NegBinParams::new(mu, psi).unwrap();
    let q = mu / (psi + mu);
    let mut total = 0.0;
    let mut y = 0u64;
    loop {
        let term = negbin_log_pmf(y, &p).exp();
        total += term;
        let ratio = ((y as f64 + 1.0 + psi) / (y as f64 + 2.0) * q).max(q);
        if y as f64 > mu && ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-13 {
            return total;
        }
        y += 1;
    }
}

pub fn distributions() -> Vec<Check> {
    let mus = [0.1, 1.0, 10.0, 100.0, 300.0];
    let psis = [0.1, 1.0, 10.0, 100.0];
    let worst_sum = mus
        .iter()
        .flat_map(|&mu| psis.iter().map(move |&psi| (truncated_total(mu, psi) - 1.0).abs()))
        .fold(0.0, f64::max);

    let mut worst_geo: f64 = 0.0;
    for &mu in &[0.1, 0.7, 3.0, 42.0, 300.0] {
        let p = NegBinParams::new(mu, 1.0).unwrap();
        let r = mu / (1.0 + mu);
        for y in 0..200u64 {
            let geometric = (1.0 - r).ln() + y as f64 * r.ln();
            worst_geo = worst_geo.max((negbin_log_pmf(y, &p) - geometric).abs());
        }
    }

    let mut worst_rec: f64 = 0.0;
    let mut x: f64 = 1e-6;
    while x <= 1e4 {
        let step = log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap();
        worst_rec = worst_rec.max((step - x.ln()).abs());
        x *= 1.07;
    }

    vec![
        Check::new(format!("20 pmf totals off by at most {worst_sum:.1e}"), worst_sum < 1e-8),
        Check::new(format!("geometric gap {worst_geo:.1e}"), worst_geo < 1e-12),
        Check::new(format!("log-gamma recurrence gap {worst_rec:.1e}"), worst_rec < 1e-10),
    ]
}

pub fn weights() -> Vec<Check> {
    let counts = [420usize, 4091, 2607];
    let hyper = Hyperparams {
        alpha0: 0.1,
        k_max: 3,
        ..Default::default()
    };
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(420);
    let mut sums = [0.0; 3];
    for _ in 0..draws {
        let c = update_weights(&counts, &hyper, &mut rng);
        for (s, v) in sums.iter_mut().zip(c) {
            *s += v;
        }
    }
    let alphas = counts.map(|n| n as f64 + 0.1);
    let total: f64 = alphas.iter().sum();
    (0..3)
        .map(|k| {
            let mean = alphas[k] / total;
            let var = alphas[k] * (total - alphas[k]) / (total * total * (total + 1.0));
            let z = (sums[k] / draws as f64 - mean) / (var / draws as f64).sqrt();
            Check::new(format!("c{k} {z:+.2} SE"), z.abs() < 3.0)
        })
        .collect()
}
