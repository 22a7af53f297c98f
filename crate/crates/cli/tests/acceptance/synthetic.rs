use std::time::Instant;

use melodikit::eval::{
    next_step_loglik, prediction_loglik, MarginalPredictor, PathPredictor, PredictionConfig,
    Predictor, RbmPredictor,
};
use melodikit::tuning::{grid_search, GridSpec, ModelKind, TuningResult};
use melodikit::{
    eval::smoothed_marginal, rng, ContextTree, Corpus, DirichletVmm64, NextSymbolModel,
    PredictionProtocol, TcRbm64, TrainConfig, Vmm64,
};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::reels::tuned_summary;
use crate::Verdict;

const A: usize = 8;
const LEN: usize = 200;
const SEED: u64 = 808;

/// `kernel[a * A + b]` is `P(· | x_{t-2} = a, x_{t-1} = b)`.
struct Source {
    kernel: Vec<[f64; A]>,
}

impl Source {
    fn new(seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let g = Gamma::new(0.3, 1.0).unwrap();
        let kernel = (0..A * A)
            .map(|_| {
                let w: [f64; A] = std::array::from_fn(|_| g.sample(&mut r) + 1e-12);
                let s: f64 = w.iter().sum();
                w.map(|x| x / s)
            })
            .collect();
        Self { kernel }
    }

    fn sequence<R: Rng>(&self, r: &mut R) -> Vec<u8> {
        let mut v = vec![r.random_range(0..A) as u8, r.random_range(0..A) as u8];
        while v.len() < LEN {
            let row = &self.kernel[v[v.len() - 2] as usize * A + v[v.len() - 1] as usize];
            let u: f64 = r.random();
            let mut acc = 0.0;
            let next = (0..A)
                .find(|&k| {
                    acc += row[k];
                    u < acc
                })
                .unwrap_or(A - 1);
            v.push(next as u8);
        }
        v
    }

    /// Entropy rate in nats from the stationary distribution over pairs.
    fn entropy_rate(&self) -> f64 {
        let mut pi = vec![1.0 / (A * A) as f64; A * A];
        for _ in 0..5000 {
            let mut next = vec![0.0; A * A];
            for (ab, p) in pi.iter().enumerate() {
                for c in 0..A {
                    next[(ab % A) * A + c] += p * self.kernel[ab][c];
                }
            }
            pi = next;
        }
        pi.iter()
            .zip(&self.kernel)
            .map(|(p, row)| -p * row.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>())
            .sum()
    }
}

fn mean_next_step<M: NextSymbolModel<f64>>(m: &M, test: &Corpus) -> f64 {
    let (sum, n) = test
        .sequences
        .iter()
        .map(|s| next_step_loglik(m, s))
        .fold((0.0, 0), |(a, b), (c, d)| (a + c, b + d));
    sum / n as f64
}

fn tree_of(r: &TuningResult, train: &Corpus) -> ContextTree {
    ContextTree::grow(train, r.best.params.tree().unwrap()).unwrap()
}

pub fn order2_source() -> Verdict {
    let mut v = Verdict::new();
    let source = Source::new(SEED);
    let rate = source.entropy_rate();
    let mut r = rng::seeded(rng::derive_seed(SEED, 1));
    let train: Vec<Vec<u8>> = (0..200).map(|_| source.sequence(&mut r)).collect();
    let test: Vec<Vec<u8>> = (0..50).map(|_| source.sequence(&mut r)).collect();
    let train = Corpus::from_indices(A, &train).unwrap();
    let test = Corpus::from_indices(A, &test).unwrap();
    v.note(format!(
        "alphabet {A}, Dirichlet(0.3) kernel rows, entropy rate {rate:.4} nats; 200 train / 50 test x {LEN} steps"
    ));

    let vt = grid_search(
        ModelKind::Vmm,
        &train,
        &GridSpec {
            max_depth: 100,
            c_min: vec![20, 50, 100, 200],
            eps_min: vec![1.05, 1.5],
            smoothing: vec![0.001, 0.01, 0.03],
        },
    )
    .unwrap();
    let dt = grid_search(
        ModelKind::Dvmm,
        &train,
        &GridSpec {
            max_depth: 100,
            c_min: vec![5, 20, 50, 100],
            eps_min: vec![1.05, 1.5],
            smoothing: vec![5.0, 20.0, 50.0, 100.0],
        },
    )
    .unwrap();
    v.note(tuned_summary(&vt, "gamma_min"));
    v.note(tuned_summary(&dt, "alpha"));
    v.check(vt.best.depth >= 2, format!("vmm grid search selects depth {}", vt.best.depth));
    v.check(dt.best.depth >= 2, format!("dvmm grid search selects depth {}", dt.best.depth));

    let vmm = Vmm64::smooth(tree_of(&vt, &train), vt.best.params.smoothing).unwrap();
    let dvmm = DirichletVmm64::from_tree(tree_of(&dt, &train), dt.best.params.smoothing).unwrap();

    let start = Instant::now();
    let config = TrainConfig {
        seed: SEED,
        ..TrainConfig::default()
    };
    let (rbm, diag) = TcRbm64::train(&train, &config).unwrap();
    v.note(format!(
        "tcrbm {} epochs in {:.0}s, final recon {:.3}",
        config.epochs,
        start.elapsed().as_secs_f64(),
        diag.last().unwrap().recon_ce
    ));

    // the TC-RBM has no exact conditional: its next step is the first point
    // of the clamped-sampling prediction curve, scored like the reels curves
    let rbm_pred = RbmPredictor {
        model: &rbm,
        protocol: PredictionProtocol::default(),
    };
    let vmm_pred = PathPredictor { model: &vmm, n_paths: 100 };
    let dvmm_pred = PathPredictor { model: &dvmm, n_paths: 100 };
    let base = MarginalPredictor {
        marginal: smoothed_marginal(&train, 1.0).unwrap(),
    };
    let predictors: [(&str, &dyn Predictor<f64>); 4] =
        [("vmm", &vmm_pred), ("dvmm", &dvmm_pred), ("tcrbm", &rbm_pred), ("baseline", &base)];
    let report = prediction_loglik(
        &predictors,
        &test,
        &PredictionConfig {
            seed: SEED,
            ..PredictionConfig::default()
        },
    )
    .unwrap();
    let first = |m: &str| {
        let c = report.curve(m).unwrap();
        (c.mean_loglik[0], c.stderr[0])
    };

    for (name, ll) in [("vmm", mean_next_step(&vmm, &test)), ("dvmm", mean_next_step(&dvmm, &test))] {
        let (curve, se) = first(name);
        v.check(
            (-ll - rate).abs() <= 0.05,
            format!(
                "{name} next-step loglik over all test steps {ll:.4} (gap {:.4}); curve tau=1 {curve:.4} +- {se:.4}",
                -ll - rate
            ),
        );
    }
    let (ll, se) = first("tcrbm");
    v.check(
        (-ll - rate).abs() <= 0.05,
        format!("tcrbm next-step loglik {ll:.4} +- {se:.4} (gap {:.4})", -ll - rate),
    );
    let (b, _) = first("baseline");
    v.note(format!("baseline (train marginal) {b:.4}"));
    v
}
