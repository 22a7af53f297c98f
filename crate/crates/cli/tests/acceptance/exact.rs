use melodikit::rng;
use melodikit::tcrbm::{ExactModel, GibbsSampler, HiddenState};
use melodikit::{PredictionProtocol, Symbol, TcRbm64};
use rand::Rng;

use crate::Verdict;

const A: usize = 3;
const T: usize = 4;
const TAU: usize = 2;
const H: usize = 2;

fn tiny(seed: u64) -> TcRbm64 {
    let mut m = TcRbm64::zeros(H, TAU, A).unwrap();
    let mut r = rng::seeded(seed);
    for i in 0..A {
        for j in 0..H {
            for k in 0..TAU {
                m.set_weight(i, j, k, r.random_range(-1.5..1.5));
            }
        }
    }
    for b in m.hidden_bias_mut() {
        *b = r.random_range(-1.0..1.0);
    }
    for c in m.visible_bias_mut() {
        *c = r.random_range(-1.0..1.0);
    }
    m
}

fn decode(mut s: usize, len: usize) -> Vec<Symbol> {
    let mut v = vec![Symbol::new(0); len];
    for t in (0..len).rev() {
        v[t] = Symbol::new((s % A) as u8);
        s /= A;
    }
    v
}

/// Energy written out term by term from the weights.
fn energy(m: &TcRbm64, v: &[Symbol], h: &[Vec<bool>]) -> f64 {
    let mut e = 0.0;
    for (t, col) in h.iter().enumerate() {
        for (j, &on) in col.iter().enumerate() {
            if on {
                let mut x = m.hidden_bias()[j];
                for k in 0..TAU {
                    x += m.weight(v[t + k].index(), j, k);
                }
                e -= x;
            }
        }
    }
    e - v.iter().map(|s| m.visible_bias()[s.index()]).sum::<f64>()
}

fn hidden_configs() -> Vec<Vec<Vec<bool>>> {
    let th = T - TAU + 1;
    (0..1usize << (th * H))
        .map(|bits| {
            (0..th)
                .map(|t| (0..H).map(|j| bits >> (t * H + j) & 1 == 1).collect())
                .collect()
        })
        .collect()
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn tiny_model_exactness() -> Verdict {
    let mut v = Verdict::new();
    let m = tiny(11);
    let exact = ExactModel::new(&m, T).unwrap();
    let states = A.pow(T as u32);

    // (a) energies and partition function by brute force over (V, H)
    let mut worst_energy: f64 = 0.0;
    let mut joint = 0.0;
    for s in 0..states {
        let vis = decode(s, T);
        for h in hidden_configs() {
            let mut hs = HiddenState::zeros(H, T - TAU + 1);
            for (t, col) in h.iter().enumerate() {
                for (j, &on) in col.iter().enumerate() {
                    hs.set(j, t, on);
                }
            }
            let e = energy(&m, &vis, &h);
            worst_energy = worst_energy.max((m.energy(&vis, &hs).unwrap() - e).abs());
            joint += (-e).exp();
        }
    }
    let ratio = joint / exact.log_partition().exp();
    let mass: f64 = exact.probabilities().iter().sum();
    v.check(worst_energy < 1e-12, format!("energy matches term-by-term sum (max diff {worst_energy:.1e})"));
    v.check(
        (ratio - 1.0).abs() < 1e-10,
        format!("sum exp(-E)/Z = 1 + {:.1e}", ratio - 1.0),
    );
    v.check((mass - 1.0).abs() < 1e-10, format!("visible marginal mass 1 + {:.1e}", mass - 1.0));

    // (b) exact gradient against central differences of the log-likelihood
    let mut r = rng::seeded(12);
    let data: Vec<Vec<Symbol>> = (0..6)
        .map(|_| (0..T).map(|_| Symbol::new(r.random_range(0..A) as u8)).collect())
        .collect();
    let g = exact.gradient(&data).unwrap();
    let ll = |m: &TcRbm64| ExactModel::new(m, T).unwrap().log_likelihood(&data).unwrap();
    let step = 1e-4;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut check = |analytic: f64, perturb: &dyn Fn(&mut TcRbm64, f64)| {
        let mut up = m.clone();
        perturb(&mut up, step);
        let mut down = m.clone();
        perturb(&mut down, -step);
        let fd = (ll(&up) - ll(&down)) / (2.0 * step);
        worst = worst.max((analytic - fd).abs() / fd.abs().max(analytic.abs()).max(1e-3));
        count += 1;
    };
    for i in 0..A {
        for j in 0..H {
            for k in 0..TAU {
                // gradient weights use the model's internal [k][j][i] order
                let analytic = g.weights[(k * H + j) * A + i];
                check(analytic, &|m, d| m.set_weight(i, j, k, m.weight(i, j, k) + d));
            }
        }
    }
    for j in 0..H {
        check(g.hidden_bias[j], &|m, d| m.hidden_bias_mut()[j] += d);
    }
    for i in 0..A {
        check(g.visible_bias[i], &|m, d| m.visible_bias_mut()[i] += d);
    }
    v.check(
        worst < 1e-5,
        format!("{count} gradient entries vs central differences, worst rel. err {worst:.1e}"),
    );

    // (c) long-run block Gibbs against enumerated marginals
    let sweeps = 1_000_000;
    let mut sampler = GibbsSampler::new(&m, T).unwrap();
    let mut r = rng::seeded(13);
    let mut vis: Vec<Symbol> = (0..T).map(|_| Symbol::new(r.random_range(0..A) as u8)).collect();
    for _ in 0..1000 {
        sampler.sample_hidden(&vis, &mut r);
        sampler.sample_visible(&mut vis, 0, &mut r);
    }
    let mut visits = vec![0u64; states];
    for _ in 0..sweeps {
        sampler.sample_hidden(&vis, &mut r);
        sampler.sample_visible(&mut vis, 0, &mut r);
        visits[exact.index(&vis)] += 1;
    }
    let freq: Vec<f64> = visits.iter().map(|&c| c as f64 / sweeps as f64).collect();
    let probs = exact.probabilities();
    let mut worst_step: f64 = 0.0;
    for t in 0..T {
        let mut f = vec![0.0; A];
        for (s, p) in freq.iter().enumerate() {
            f[decode(s, T)[t].index()] += p;
        }
        worst_step = worst_step.max(tv(&f, exact.step_marginal(t).probs()));
    }
    v.check(
        worst_step < 0.01,
        format!("{sweeps} Gibbs sweeps: worst per-step marginal TV {worst_step:.4}"),
    );
    v.note(format!("joint TV over all {states} sequences {:.4}", tv(&freq, &probs)));
    v
}

pub fn clamped_prediction() -> Verdict {
    let mut v = Verdict::new();
    let m = tiny(21);
    let exact = ExactModel::new(&m, T).unwrap();
    // paper chain shape (15 sweeps, first 10 dropped), 2000 chains
    let protocol = PredictionProtocol {
        chains: 2000,
        iterations: 15,
        burn_in: 10,
    };
    v.note(format!("{} retained samples per prediction", protocol.retained()));
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for ctx_len in 1..T {
        let horizon = T - ctx_len;
        for s in 0..A.pow(ctx_len as u32) {
            let ctx = decode(s, ctx_len);
            let seed = rng::derive_seed(22, (ctx_len * 100 + s) as u64);
            let est = m.predictive_distribution(&ctx, horizon, &protocol, seed).unwrap();
            for (k, d) in est.iter().enumerate() {
                let truth = exact.conditional(&ctx, ctx_len + k).unwrap();
                worst = worst.max(tv(d.probs(), truth.probs()));
                cases += 1;
            }
        }
    }
    v.check(
        worst < 0.02,
        format!("{cases} (context, horizon) cases: worst TV to enumerated conditional {worst:.4}"),
    );
    v
}
