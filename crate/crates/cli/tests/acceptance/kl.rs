use melodikit::eval::{bootstrap_kl, kl_divergence, paper_statistics, EventDistribution};
use melodikit::{rng, Corpus};
use rand::Rng;

use crate::Verdict;

/// Random distribution over `n` events with some exact zeros.
fn random_dist<R: Rng>(r: &mut R, n: usize, zeros: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if r.random::<f64>() < zeros { 0.0 } else { r.random::<f64>().powi(3) })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[r.random_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// KL written as cross-entropy minus entropy over dense vectors.
fn direct(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let support = p.iter().zip(q).filter(|(a, b)| **a > 0.0 || **b > 0.0).count() as f64;
    let mut entropy = 0.0;
    let mut cross = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 {
            entropy -= a * a.ln();
            cross -= a * ((b + eps) / (1.0 + eps * support)).ln();
        }
    }
    cross - entropy
}

pub fn kl_machinery() -> Verdict {
    let mut v = Verdict::new();
    let mut r = rng::seeded(51);

    let mut worst: f64 = 0.0;
    for i in 0..2000 {
        let n = r.random_range(1..60);
        let p = random_dist(&mut r, n, 0.3);
        let mut q = random_dist(&mut r, n, 0.3);
        let eps = if i % 2 == 0 {
            // full support so the unsmoothed divergence is finite
            q.iter_mut().for_each(|x| *x = (*x + 0.01) / (1.0 + 0.01 * n as f64));
            0.0
        } else {
            10f64.powf(r.random_range(-6.0..-1.0))
        };
        let got = kl_divergence(&EventDistribution::from_dense(&p), &EventDistribution::from_dense(&q), eps);
        worst = worst.max((got - direct(&p, &q, eps)).abs());
    }
    v.check(worst <= 1e-12, format!("2000 random pairs vs direct summation, max diff {worst:.1e}"));

    let missing = kl_divergence(
        &EventDistribution::from_dense(&[0.5, 0.5]),
        &EventDistribution::from_dense(&[1.0, 0.0]),
        0.0,
    );
    v.check(missing.is_infinite(), "unsmoothed divergence is infinite when Q misses an event of P");

    let mut lowest = f64::INFINITY;
    for _ in 0..10_000 {
        let n = r.random_range(1..40);
        let p = random_dist(&mut r, n, 0.4);
        let q = random_dist(&mut r, n, 0.4);
        let eps = 10f64.powf(r.random_range(-8.0..0.0));
        let d = kl_divergence(&EventDistribution::from_dense(&p), &EventDistribution::from_dense(&q), eps);
        lowest = lowest.min(d);
        // P against itself: zero up to rounding
        let same = kl_divergence(&EventDistribution::from_dense(&p), &EventDistribution::from_dense(&p), 0.0);
        lowest = lowest.min(same);
    }
    v.check(
        lowest >= -1e-12,
        format!("10^4 random pairs (plus self pairs): smallest KL {lowest:.2e} (float tolerance 1e-12)"),
    );

    let corpus = |seed: u64, n: usize| {
        let mut r = rng::seeded(seed);
        let seqs: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let len = r.random_range(20..80);
                (0..len).map(|_| r.random_range(0..5) as u8).collect()
            })
            .collect();
        Corpus::from_indices(5, &seqs).unwrap()
    };
    let test = corpus(52, 15);
    let samples = corpus(53, 15);
    let specs = paper_statistics();
    let run = |threads: usize, seed: u64| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_kl(&test, &samples, &specs, 40, seed, "m").unwrap())
    };
    let a = run(1, 7);
    let b = run(3, 7);
    let c = run(2, 8);
    v.check(a == b, "bootstrap mean/variance identical across reruns and thread counts");
    v.check(a != c, "a different seed gives different resamples");
    v.check(
        a.rows.iter().all(|row| row.mean > 0.0 && row.variance > 0.0),
        "every statistic has positive mean and variance",
    );
    v
}
