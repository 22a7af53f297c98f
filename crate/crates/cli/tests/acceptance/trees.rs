use std::collections::{BTreeMap, BTreeSet};

use melodikit::eval::vmm_predictive_distribution;
use melodikit::{
    rng, ContextTree, Corpus, DirichletVmm64, NextSymbolModel, Symbol, TreeParams, Vmm64,
};
use rand::Rng;

use crate::Verdict;

const A: usize = 3;

/// Corpus from a random first-order chain, so contexts carry information.
fn random_corpus<R: Rng>(r: &mut R) -> Vec<Vec<u8>> {
    let rows: Vec<[f64; A]> = (0..A)
        .map(|_| {
            let w: [f64; A] = std::array::from_fn(|_| r.random::<f64>().powi(2) + 0.02);
            let s: f64 = w.iter().sum();
            w.map(|x| x / s)
        })
        .collect();
    let n = r.random_range(1..=3);
    (0..n)
        .map(|_| {
            let len = r.random_range(1..=200);
            let mut seq = vec![r.random_range(0..A) as u8];
            while seq.len() < len {
                let row = &rows[*seq.last().unwrap() as usize];
                let u: f64 = r.random();
                let mut acc = 0.0;
                let next = (0..A)
                    .find(|&k| {
                        acc += row[k];
                        u < acc
                    })
                    .unwrap_or(A - 1);
                seq.push(next as u8);
            }
            seq
        })
        .collect()
}

/// Next-symbol counts after `ctx` by scanning every sequence.
fn brute_counts(data: &[Vec<u8>], ctx: &[u8]) -> [u64; A] {
    let mut c = [0u64; A];
    for seq in data {
        for p in ctx.len()..seq.len() {
            if seq[p - ctx.len()..p] == *ctx {
                c[seq[p] as usize] += 1;
            }
        }
    }
    c
}

/// Some next symbol is at least `num/den` times more probable after `child`
/// than after `parent`, compared in exact integer arithmetic.
fn ratio_ok(child: &[u64; A], parent: &[u64; A], num: u128, den: u128) -> bool {
    let ct: u128 = child.iter().map(|&x| x as u128).sum();
    let pt: u128 = parent.iter().map(|&x| x as u128).sum();
    ct > 0
        && (0..A).any(|k| parent[k] > 0 && child[k] as u128 * pt * den >= num * parent[k] as u128 * ct)
}

/// Expected node set: every context occurring at least `c_min` times whose
/// distribution passes the ratio test against its one-shorter suffix, plus
/// all suffixes of such contexts.
fn expected_nodes(data: &[Vec<u8>], depth: usize, c_min: u64, eps: (u128, u128)) -> BTreeMap<Vec<u8>, [u64; A]> {
    let mut nodes = BTreeMap::new();
    nodes.insert(Vec::new(), brute_counts(data, &[]));
    let mut frontier = vec![Vec::<u8>::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for ctx in &frontier {
            let parent = brute_counts(data, ctx);
            for s in 0..A as u8 {
                let mut longer = vec![s];
                longer.extend_from_slice(ctx);
                let c = brute_counts(data, &longer);
                if c.iter().sum::<u64>() < c_min.max(1) {
                    continue;
                }
                if ratio_ok(&c, &parent, eps.0, eps.1) {
                    for cut in 0..longer.len() {
                        let suffix = longer[cut..].to_vec();
                        let counts = brute_counts(data, &suffix);
                        nodes.insert(suffix, counts);
                    }
                }
                next.push(longer);
            }
        }
        frontier = next;
    }
    nodes
}

fn syms(v: &[u8]) -> Vec<Symbol> {
    v.iter().map(|&s| Symbol::new(s)).collect()
}

fn exact_path_sum<M: NextSymbolModel<f64>>(m: &M, ctx: &[Symbol], horizon: usize) -> Vec<f64> {
    fn go<M: NextSymbolModel<f64>>(m: &M, path: &mut Vec<Symbol>, left: usize, w: f64, out: &mut [f64]) {
        let d = m.predict_next(path).probs().to_vec();
        if left == 1 {
            for (o, p) in out.iter_mut().zip(&d) {
                *o += w * p;
            }
            return;
        }
        for (s, p) in d.iter().enumerate() {
            path.push(Symbol::new(s as u8));
            go(m, path, left - 1, w * p, out);
            path.pop();
        }
    }
    let mut out = vec![0.0; m.alphabet_size()];
    go(m, &mut ctx.to_vec(), horizon, 1.0, &mut out);
    out
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn context_tree() -> Verdict {
    let mut v = Verdict::new();
    let mut r = rng::seeded(31);
    let thresholds: [(f64, (u128, u128)); 5] =
        [(0.0, (0, 1)), (1.0, (1, 1)), (1.2, (6, 5)), (1.5, (3, 2)), (2.0, (2, 1))];
    let trials = 300;
    let (mut shape_bad, mut count_bad, mut cond_bad, mut lookup_bad) = (0, 0, 0, 0);
    let mut stored = 0;
    for _ in 0..trials {
        let data = random_corpus(&mut r);
        let corpus = Corpus::from_indices(A, &data).unwrap();
        let depth = r.random_range(1..=5);
        let c_min = r.random_range(1..=6);
        let (eps, rational) = thresholds[r.random_range(0..thresholds.len())];
        let tree = ContextTree::grow(&corpus, TreeParams::new(depth, c_min, eps).unwrap()).unwrap();
        let want = expected_nodes(&data, depth, c_min, rational);
        let got: BTreeSet<Vec<u8>> = tree
            .nodes()
            .iter()
            .map(|n| n.context().iter().map(|s| s.index() as u8).collect())
            .collect();
        if got != want.keys().cloned().collect::<BTreeSet<_>>() {
            shape_bad += 1;
        }
        let vmm = Vmm64::smooth(tree.clone(), 0.0).unwrap();
        for (id, node) in tree.nodes().iter().enumerate() {
            stored += 1;
            let ctx: Vec<u8> = node.context().iter().map(|s| s.index() as u8).collect();
            let bc = brute_counts(&data, &ctx);
            if node.counts() != bc {
                count_bad += 1;
            }
            let total: u64 = bc.iter().sum();
            let d = vmm.node_distribution(id);
            if (0..A).any(|k| d.prob(k) != bc[k] as f64 / total as f64) {
                cond_bad += 1;
            }
        }
        // predict_next uses the longest stored suffix of the history
        for _ in 0..20 {
            let len = r.random_range(0..8);
            let hist: Vec<u8> = (0..len).map(|_| r.random_range(0..A) as u8).collect();
            let longest = (0..=hist.len())
                .map(|cut| hist[cut..].to_vec())
                .find(|s| want.contains_key(s))
                .unwrap();
            let bc = want[&longest];
            let total: u64 = bc.iter().sum();
            let d = vmm.predict_next(&syms(&hist));
            if (0..A).any(|k| d.prob(k) != bc[k] as f64 / total as f64) {
                lookup_bad += 1;
            }
        }
    }
    v.check(shape_bad == 0, format!("{trials} random corpora: node sets match brute force ({shape_bad} mismatches)"));
    v.check(count_bad == 0, format!("{stored} stored contexts: counts exact ({count_bad} mismatches)"));
    v.check(cond_bad == 0, format!("unsmoothed conditionals exact ({cond_bad} mismatches)"));
    v.check(lookup_bad == 0, format!("longest-suffix lookup ({lookup_bad} mismatches)"));

    // sampled-path marginalization at horizon 3 against the exact path sum
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for trial in 0..10 {
        let data = loop {
            let d = random_corpus(&mut r);
            if d.iter().map(|s| s.len()).sum::<usize>() > 150 {
                break d;
            }
        };
        let corpus = Corpus::from_indices(A, &data).unwrap();
        let tree = ContextTree::grow(&corpus, TreeParams::new(4, 2, 1.05).unwrap()).unwrap();
        let vmm = Vmm64::smooth(tree.clone(), 0.05).unwrap();
        let dvmm = DirichletVmm64::from_tree(tree, 2.0).unwrap();
        let ctx = syms(&data[0][..data[0].len().min(6)]);
        for k in 0..2 {
            let seed = rng::derive_seed(32, (trial * 2 + k) as u64);
            let (est, exact) = if k == 0 {
                (
                    vmm_predictive_distribution(&vmm, &ctx, 3, 10_000, seed).unwrap(),
                    exact_path_sum(&vmm, &ctx, 3),
                )
            } else {
                (
                    vmm_predictive_distribution(&dvmm, &ctx, 3, 10_000, seed).unwrap(),
                    exact_path_sum(&dvmm, &ctx, 3),
                )
            };
            worst = worst.max(tv(est[2].probs(), &exact));
            cases += 1;
        }
    }
    v.check(
        worst < 0.02,
        format!("{cases} horizon-3 forecasts from 10^4 paths: worst TV to exact path sum {worst:.4}"),
    );
    v
}

/// Posterior means written out top-down from the counts.
fn oracle_means(tree: &ContextTree, alpha: f64) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(tree.len());
    for node in tree.nodes() {
        let prior: Vec<f64> = match node.parent() {
            None => vec![1.0 / A as f64; A],
            Some(p) => means[p].clone(),
        };
        let n: f64 = node.counts().iter().sum::<u64>() as f64;
        means.push(
            (0..A)
                .map(|k| (alpha * prior[k] + node.counts()[k] as f64) / (alpha + n))
                .collect(),
        );
    }
    means
}

pub fn dirichlet_conjugacy() -> Verdict {
    let mut v = Verdict::new();
    let mut r = rng::seeded(41);
    // symbol 2 never occurs, so contexts containing it have zero counts
    let data: Vec<Vec<u8>> = (0..4)
        .map(|_| (0..150).map(|_| r.random_range(0..2) as u8).collect())
        .collect();
    let corpus = Corpus::from_indices(A, &data).unwrap();
    let mut contexts: Vec<Vec<Symbol>> = Vec::new();
    for len in 1..=3 {
        for s in 0..A.pow(len) {
            let mut x = s;
            let ctx: Vec<u8> = (0..len)
                .map(|_| {
                    let d = (x % A) as u8;
                    x /= A;
                    d
                })
                .collect();
            contexts.push(syms(&ctx));
        }
    }
    let tree = ContextTree::with_contexts(&corpus, &contexts).unwrap();
    let zero_nodes = tree.nodes().iter().filter(|n| n.total() == 0).count();

    let mut worst_zero: f64 = 0.0;
    let mut worst_formula: f64 = 0.0;
    for alpha in [0.3, 1.0, 7.5] {
        let m = DirichletVmm64::from_tree(tree.clone(), alpha).unwrap();
        let oracle = oracle_means(&tree, alpha);
        for (id, node) in tree.nodes().iter().enumerate() {
            let d = m.node_distribution(id).probs();
            for k in 0..A {
                worst_formula = worst_formula.max((d[k] - oracle[id][k]).abs());
            }
            if let (0, Some(p)) = (node.total(), node.parent()) {
                let pd = m.node_distribution(p).probs();
                for k in 0..A {
                    worst_zero = worst_zero.max((d[k] - pd[k]).abs());
                }
            }
        }
    }
    v.check(
        zero_nodes > 0 && worst_zero <= 1e-12,
        format!("{zero_nodes} zero-count nodes equal their parent's mean (max diff {worst_zero:.1e})"),
    );
    v.check(
        worst_formula <= 1e-12,
        format!("posterior means match top-down recursion (max diff {worst_formula:.1e})"),
    );

    let tiny = DirichletVmm64::from_tree(tree.clone(), 1e-9).unwrap();
    let mut worst_emp: f64 = 0.0;
    for (id, node) in tree.nodes().iter().enumerate() {
        if node.total() > 0 {
            for k in 0..A {
                let emp = node.counts()[k] as f64 / node.total() as f64;
                worst_emp = worst_emp.max((tiny.node_distribution(id).prob(k) - emp).abs());
            }
        }
    }
    v.check(worst_emp <= 1e-6, format!("alpha 1e-9 recovers empirical conditionals (max diff {worst_emp:.1e})"));

    let huge = DirichletVmm64::from_tree(tree.clone(), 1e12).unwrap();
    let mut spread: f64 = 0.0;
    for a in 0..tree.len() {
        for k in 0..A {
            spread = spread.max((huge.node_distribution(a).prob(k) - 1.0 / A as f64).abs());
        }
    }
    v.check(
        spread <= 0.5e-6,
        format!("alpha 1e12 puts every node within {spread:.1e} of uniform (so within 1e-6 of each other)"),
    );
    v
}
