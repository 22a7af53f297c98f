use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use melodikit::eval::{
    bootstrap_kl, smoothed_marginal, paper_statistics, prediction_loglik, train_vs_test_reference,
    KlReport, MarginalPredictor, PathPredictor, PredictionConfig, PredictionReport, Predictor,
    RbmPredictor, StatisticSpec,
};
use melodikit::tuning::{grid_search, GridSpec, ModelKind, TuningResult};
use melodikit::{
    corpus, rng, AnyModel, Corpus, DirichletVmm64, PredictionProtocol, TcRbm64, TrainConfig,
    Vmm64,
};
use rand::seq::SliceRandom;

use crate::Verdict;

const SEED: u64 = 2024;
const TEST_TUNES: usize = 24;

pub struct Trained {
    pub train: Corpus,
    pub test: Corpus,
    pub vmm: Vmm64,
    pub dvmm: DirichletVmm64,
    pub tcrbm: TcRbm64,
    pub log: Vec<String>,
}

fn reels_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/reels")
}

/// Seeded shuffle of the tunes into train and test.
pub fn split(all: &Corpus, seed: u64) -> (Corpus, Corpus) {
    let mut idx: Vec<usize> = (0..all.len()).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let (test, train) = idx.split_at(TEST_TUNES);
    let (mut test, mut train) = (test.to_vec(), train.to_vec());
    test.sort_unstable();
    train.sort_unstable();
    (all.select(&train), all.select(&test))
}

pub fn tuned_summary(r: &TuningResult, name: &str) -> String {
    let p = r.best.params;
    format!(
        "{} LOO best c_min {} eps_min {} {} {}: score {:.4}, {} nodes, depth {}",
        p.model.as_str(),
        p.c_min,
        p.eps_min,
        name,
        p.smoothing,
        r.best.score,
        r.best.nodes,
        r.best.depth
    )
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut log = Vec::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(reels_dir())
            .expect("reels corpus directory")
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "mid"))
            .collect();
        paths.sort();
        let all = corpus::load_corpus(&paths).unwrap();
        let (train, test) = split(&all, SEED);
        log.push(format!(
            "{} tunes: {} train ({} steps), {} test ({} steps)",
            all.len(),
            train.len(),
            train.total_steps(),
            test.len(),
            test.total_steps()
        ));

        let start = Instant::now();
        let vgrid = GridSpec {
            max_depth: 100,
            c_min: vec![10, 20, 30, 50],
            eps_min: vec![1.05, 1.5, 2.0],
            smoothing: vec![0.001, 0.003, 0.01, 0.03],
        };
        let vt = grid_search(ModelKind::Vmm, &train, &vgrid).unwrap();
        log.push(tuned_summary(&vt, "gamma_min"));
        let dgrid = GridSpec {
            max_depth: 100,
            c_min: vec![2, 5, 10, 20],
            eps_min: vec![1.05, 1.5],
            smoothing: vec![10.0, 20.0, 50.0, 100.0],
        };
        let dt = grid_search(ModelKind::Dvmm, &train, &dgrid).unwrap();
        log.push(tuned_summary(&dt, "alpha"));
        log.push(format!("tuning took {:.0}s", start.elapsed().as_secs_f64()));

        let vp = vt.best.params;
        let vmm = Vmm64::smooth(
            melodikit::ContextTree::grow(&train, vp.tree().unwrap()).unwrap(),
            vp.smoothing,
        )
        .unwrap();
        let dp = dt.best.params;
        let dvmm = DirichletVmm64::from_tree(
            melodikit::ContextTree::grow(&train, dp.tree().unwrap()).unwrap(),
            dp.smoothing,
        )
        .unwrap();

        // 50 hidden units, filter 8, CD-5, 500 epochs, lr 0.5 decaying, wd 2e-4, sparsity 0.1
        let start = Instant::now();
        let config = TrainConfig {
            seed: SEED,
            ..TrainConfig::default()
        };
        let (tcrbm, diag) = TcRbm64::train(&train, &config).unwrap();
        let last = diag.last().unwrap();
        log.push(format!(
            "tcrbm {} epochs in {:.0}s: recon {:.3}, hidden activity {:.3}",
            config.epochs,
            start.elapsed().as_secs_f64(),
            last.recon_ce,
            last.mean_hidden_activity
        ));
        Trained {
            train,
            test,
            vmm,
            dvmm,
            tcrbm,
            log,
        }
    })
}

pub fn kl_ordering() -> Verdict {
    let mut v = Verdict::new();
    let t = trained();
    t.log.iter().for_each(|l| v.note(l.clone()));

    // samples as large as the test set, so both frequency estimates carry similar noise
    let lengths: Vec<usize> = t.test.sequences.iter().map(|s| s.len()).collect();
    let specs = paper_statistics();
    let boot = rng::derive_seed(SEED, 0);
    let models = [
        ("vmm", AnyModel::Vmm(t.vmm.clone())),
        ("dvmm", AnyModel::Dirichlet(t.dvmm.clone())),
        ("tcrbm", AnyModel::TcRbm(t.tcrbm.clone())),
    ];
    let mut report: KlReport = train_vs_test_reference(&t.train, &t.test, &specs, 50, boot).unwrap();
    for (i, (name, m)) in models.iter().enumerate() {
        let samples = m
            .sample_corpus(&lengths, 500, rng::derive_seed(SEED, 1 + i as u64))
            .unwrap();
        report.extend(bootstrap_kl(&t.test, &samples, &specs, 50, boot, name).unwrap());
    }
    for line in report.to_table().lines() {
        v.note(line.to_string());
    }
    let kl = |m: &str, s: StatisticSpec| report.get(m, s).unwrap().mean;

    let o1 = StatisticSpec::Order(1);
    let (vmm, dvmm, rbm, base) = (kl("vmm", o1), kl("dvmm", o1), kl("tcrbm", o1), kl("trainset", o1));
    v.check(dvmm < vmm, format!("order-1: dvmm {dvmm:.4} < vmm {vmm:.4}"));
    v.check(rbm < vmm, format!("order-1: tcrbm {rbm:.4} < vmm {vmm:.4}"));
    v.check(dvmm <= 3.0 * base, format!("order-1: dvmm {dvmm:.4} <= 3 x trainset {base:.4}"));
    v.check(rbm <= 3.0 * base, format!("order-1: tcrbm {rbm:.4} <= 3 x trainset {base:.4}"));
    for lag in 1..=6 {
        let s = StatisticSpec::Lag(lag);
        let (vm, dv, rb) = (kl("vmm", s), kl("dvmm", s), kl("tcrbm", s));
        v.check(dv < vm && rb < vm, format!("lag-{lag}: dvmm {dv:.4}, tcrbm {rb:.4} < vmm {vm:.4}"));
    }
    v
}

pub fn prediction_report() -> &'static PredictionReport {
    static CELL: OnceLock<PredictionReport> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = trained();
        let vmm = PathPredictor { model: &t.vmm, n_paths: 100 };
        let dvmm = PathPredictor { model: &t.dvmm, n_paths: 100 };
        let rbm = RbmPredictor {
            model: &t.tcrbm,
            protocol: PredictionProtocol::default(),
        };
        let base = MarginalPredictor {
            marginal: smoothed_marginal(&t.train, 1.0).unwrap(),
        };
        let predictors: [(&str, &dyn Predictor<f64>); 4] =
            [("vmm", &vmm), ("dvmm", &dvmm), ("tcrbm", &rbm), ("baseline", &base)];
        let config = PredictionConfig {
            seed: SEED,
            ..PredictionConfig::default()
        };
        prediction_loglik(&predictors, &t.test, &config).unwrap()
    })
}

pub fn prediction_curves() -> Verdict {
    let mut v = Verdict::new();
    let report = prediction_report();
    let curve = |m: &str| report.curve(m).unwrap().mean_loglik.clone();
    let (vmm, dvmm, rbm, base) = (curve("vmm"), curve("dvmm"), curve("tcrbm"), curve("baseline"));
    v.note(format!("{} configurations, tau = 1..{}", report.configurations.len(), vmm.len()));
    v.note("tau      vmm     dvmm    tcrbm baseline".to_string());
    for k in 0..vmm.len() {
        v.note(format!(
            "{:>3} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            k + 1,
            vmm[k],
            dvmm[k],
            rbm[k],
            base[k]
        ));
    }
    v.check(dvmm[0] > vmm[0], format!("next step: dvmm {:.4} > vmm {:.4}", dvmm[0], vmm[0]));
    v.check(rbm[0] > vmm[0], format!("next step: tcrbm {:.4} > vmm {:.4}", rbm[0], vmm[0]));
    let last = vmm.len() - 1;
    for (name, c) in [("vmm", &vmm), ("dvmm", &dvmm), ("tcrbm", &rbm)] {
        let (gap0, gap_end) = ((c[0] - base[0]).abs(), (c[last] - base[last]).abs());
        v.check(
            c[last] < c[0] && gap_end < gap0,
            format!(
                "{name} decays toward baseline: loglik {:.4} -> {:.4}, |gap| {gap0:.4} -> {gap_end:.4}",
                c[0], c[last]
            ),
        );
    }
    let cross = (0..vmm.len()).find(|&k| vmm[k] < base[k]).map(|k| k + 1);
    v.check(
        cross.is_some_and(|tau| tau <= 8),
        format!(
            "vmm first below baseline at tau {}",
            cross.map_or("never".to_string(), |t| t.to_string())
        ),
    );
    deeper_vmm_note(&mut v, &base);
    v
}

/// How the crossing point moves when the VMM is allowed a much deeper tree
/// than leave-one-out tuning picks. Informational only.
fn deeper_vmm_note(v: &mut Verdict, base: &[f64]) {
    let t = trained();
    let tree = melodikit::ContextTree::grow(&t.train, melodikit::TreeParams::new(100, 3, 1.05).unwrap()).unwrap();
    let depth = tree.depth();
    let deep = Vmm64::smooth(tree, 0.001).unwrap();
    let pred = PathPredictor { model: &deep, n_paths: 100 };
    let config = PredictionConfig {
        seed: SEED,
        ..PredictionConfig::default()
    };
    let r = prediction_loglik(&[("deep", &pred as &dyn Predictor<f64>)], &t.test, &config).unwrap();
    let c = &r.curve("deep").unwrap().mean_loglik;
    let cross = (0..c.len()).find(|&k| c[k] < base[k]).map_or("never".to_string(), |k| (k + 1).to_string());
    let shown: Vec<String> = c.iter().map(|x| format!("{x:.3}")).collect();
    v.note(format!("vmm c_min 3 eps_min 1.05 gamma 0.001 (depth {depth}): {}", shown.join(" ")));
    v.note(format!("  deeper vmm first below baseline at tau {cross}"));
}
