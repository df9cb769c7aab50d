//! Joint-distribution check: independent prior-then-generate draws against
//! a chain alternating a Gibbs sweep with regeneration of the data.

use nbmix::diagnostics::ess;
use nbmix::distributions::{sample_categorical, sample_dirichlet, sample_negbin, NegBinParams};
use nbmix::model::{generate_synthetic, Coefficients, CovariateLaw, Hyperparams, MixtureParams};
use nbmix::sampler::{sweep, ProposalScales};
use nbmix::{Dataset, ModelSpec, ParamState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::Check;

const N: usize = 20;

fn hyper() -> Hyperparams {
    Hyperparams {
        alpha0: 1.0,
        m0: 0.0,
        s0: 1.0,
        a0: 1.0,
        b0: 0.5,
        k_max: 2,
    }
}

fn design() -> Dataset {
    let truth = MixtureParams {
        c: vec![1.0],
        beta: Coefficients::from_rows(&[vec![0.0, 0.0]]).unwrap(),
        psi: vec![1.0],
        pi: None,
    };
    generate_synthetic(&truth, N, &CovariateLaw::standard(1, 0), 3).unwrap().data
}

fn prior_draw(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> MixtureParams {
    let h = spec.hyper;
    let k = h.k_max;
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let mut beta = Coefficients::zeros(k, 2);
    for j in 0..k {
        for d in 0..2 {
            beta.set(j, d, h.m0 + h.s0 * normal(rng));
        }
    }
    let psi = (0..k).map(|_| (h.a0 + h.b0 * normal(rng)).exp()).collect();
    let pi = spec.is_zinb().then(|| {
        let b = Beta::new(spec.pi_prior.0, spec.pi_prior.1).unwrap();
        (0..k).map(|_| b.sample(rng)).collect()
    });
    MixtureParams {
        c: sample_dirichlet(&vec![h.alpha0; k], rng).unwrap(),
        beta,
        psi,
        pi,
    }
}

/// Draws `(y, w)` given parameters and assignments.
fn generate(p: &MixtureParams, z: &[usize], x: &Dataset, rng: &mut ChaCha8Rng) -> (Vec<u64>, Option<Vec<bool>>) {
    let mut y = Vec::with_capacity(N);
    let mut w = p.pi.as_ref().map(|_| Vec::with_capacity(N));
    for (i, &k) in z.iter().enumerate() {
        let structural = match (&p.pi, w.as_mut()) {
            (Some(pi), Some(w)) => {
                let s = rng.random::<f64>() < pi[k];
                w.push(s);
                s
            }
            _ => false,
        };
        let mu = p.mean_at(k, x.row(i));
        y.push(if structural {
            0
        } else {
            sample_negbin(&NegBinParams::new(mu, p.psi[k]).unwrap(), rng).unwrap()
        });
    }
    (y, w)
}

fn with_counts(x: &Dataset, y: Vec<u64>) -> Dataset {
    Dataset::new(y, x.x().to_vec(), x.column_names().to_vec()).unwrap()
}

fn tracked(p: &MixtureParams, y: &[u64]) -> Vec<f64> {
    let mut v = vec![
        p.c[0],
        p.beta.get(0, 0),
        p.beta.get(0, 1),
        p.psi[0].ln(),
        p.beta.get(0, 0).powi(2),
        y.iter().map(|&v| (v as f64 + 1.0).ln()).sum::<f64>() / y.len() as f64,
        y.iter().filter(|&&v| v == 0).count() as f64 / y.len() as f64,
    ];
    if let Some(pi) = &p.pi {
        v.push(pi[0]);
    }
    v
}

/// Largest |z| over the tracked moments, with the moment's name.
fn geweke(spec: ModelSpec, seed: u64) -> (f64, &'static str) {
    const NAMES: [&str; 8] = ["c0", "b00", "b01", "lnpsi0", "b00^2", "mean ln(y+1)", "zero share", "pi0"];
    let x = design();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let marginal_draws = 100_000;
    let mut marginal: Vec<Vec<f64>> = Vec::new();
    for _ in 0..marginal_draws {
        let p = prior_draw(&spec, &mut rng);
        let z: Vec<usize> = (0..N).map(|_| sample_categorical(&p.c, &mut rng).unwrap()).collect();
        let (y, _) = generate(&p, &z, &x, &mut rng);
        marginal.push(tracked(&p, &y));
    }

    let p = prior_draw(&spec, &mut rng);
    let z: Vec<usize> = (0..N).map(|_| sample_categorical(&p.c, &mut rng).unwrap()).collect();
    let (y, w) = generate(&p, &z, &x, &mut rng);
    let mut data = with_counts(&x, y);
    let mut state = ParamState { params: p, z, w };
    let scales = ProposalScales::uniform(2, 2, 0.9, 0.7);
    let sweeps = 300_000;
    let mut successive: Vec<Vec<f64>> = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        sweep(&mut state, &data, &spec, &scales, &mut rng).unwrap();
        let (y, w) = generate(&state.params, &state.z, &x, &mut rng);
        successive.push(tracked(&state.params, &y));
        data = with_counts(&x, y);
        state.w = w;
    }

    let dims = marginal[0].len();
    let mut worst = (0.0, NAMES[0]);
    for j in 0..dims {
        let a: Vec<f64> = marginal.iter().map(|v| v[j]).collect();
        let b: Vec<f64> = successive.iter().map(|v| v[j]).collect();
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let eff = ess(&b).unwrap().value;
        let z = (ma - mb) / (va / a.len() as f64 + vb / eff).sqrt();
        if z.abs() > worst.0 {
            worst = (z.abs(), NAMES[j]);
        }
    }
    worst
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

pub fn criterion() -> Vec<Check> {
    [("nb", ModelSpec::nb(hyper()), 101), ("zinb", ModelSpec::zinb(hyper()), 202)]
        .into_iter()
        .map(|(name, spec, seed)| {
            let (z, moment) = geweke(spec, seed);
            Check::new(format!("{name} max |z| {z:.2} ({moment}) < 4"), z < 4.0)
        })
        .collect()
}
