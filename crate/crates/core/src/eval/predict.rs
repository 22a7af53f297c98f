use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Symbol, SymbolSequence};
use crate::distribution::Categorical;
use crate::error::{Error, Result};
use crate::model::NextSymbolModel;
use crate::rng;
use crate::scalar::Real;
use crate::tcrbm::{PredictionProtocol, TcRbm};

/// Pooled symbol frequencies of a corpus.
pub fn empirical_marginal<F: Real>(corpus: &Corpus) -> Result<Categorical<F>> {
    if corpus.total_steps() == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(Categorical::from_counts(&corpus.histogram()))
}

/// Pooled frequencies with `pseudo` added to every symbol count. With a
/// positive pseudo-count no symbol gets zero probability, so the baseline
/// stays finite on test symbols the training set never used.
pub fn smoothed_marginal<F: Real>(corpus: &Corpus, pseudo: f64) -> Result<Categorical<F>> {
    if corpus.total_steps() == 0 {
        return Err(Error::EmptyCorpus);
    }
    if !(pseudo >= 0.0 && pseudo.is_finite()) {
        return Err(Error::InvalidParameter(format!("pseudo-count must be finite and >= 0, got {pseudo}")));
    }
    let pseudo = F::from_f64(pseudo).expect("finite pseudo-count");
    Ok(Categorical::from_weights(
        corpus.histogram().iter().map(|&c| F::from_count(c) + pseudo).collect(),
    ))
}

/// Something that can forecast the next `horizon` steps after a context.
pub trait Predictor<F: Real>: Sync {
    fn alphabet_size(&self) -> usize;

    /// `P(v_{t+τ} | context)` for `τ = 1..=horizon`.
    fn predict(&self, context: &[Symbol], horizon: usize, seed: u64) -> Result<Vec<Categorical<F>>>;
}

/// Multi-step forecasts of `P(v_{t+τ} | context)`. Step one is the model's
/// exact conditional; later steps average the exact conditional over
/// `n_paths` ancestrally sampled intermediate paths.
pub fn vmm_predictive_distribution<F: Real, M: NextSymbolModel<F>>(
    model: &M,
    context: &[Symbol],
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Categorical<F>>> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let first = model.predict_next(context).clone();
    if horizon == 1 {
        return Ok(vec![first]);
    }
    if n_paths < 1 {
        return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
    }
    let a = model.alphabet_size();
    let mut acc = vec![F::zero(); (horizon - 1) * a];
    let mut path = context.to_vec();
    for p in 0..n_paths {
        let mut r = rng::substream(seed, p as u64);
        path.truncate(context.len());
        let mut d = &first;
        for step in 1..horizon {
            path.push(Symbol::new(d.sample(&mut r) as u8));
            d = model.predict_next(&path);
            for (x, y) in acc[(step - 1) * a..step * a].iter_mut().zip(d.probs()) {
                *x += *y;
            }
        }
    }
    let mut out = vec![first];
    out.extend(acc.chunks(a).map(|c| Categorical::from_weights(c.to_vec())));
    Ok(out)
}

/// Sampled-path forecasts from a context-tree model.
pub struct PathPredictor<'a, M> {
    pub model: &'a M,
    pub n_paths: usize,
}

impl<F: Real, M: NextSymbolModel<F>> Predictor<F> for PathPredictor<'_, M> {
    fn alphabet_size(&self) -> usize {
        self.model.alphabet_size()
    }

    fn predict(&self, context: &[Symbol], horizon: usize, seed: u64) -> Result<Vec<Categorical<F>>> {
        vmm_predictive_distribution(self.model, context, horizon, self.n_paths, seed)
    }
}

/// Clamped Gibbs forecasts from a TC-RBM.
pub struct RbmPredictor<'a, F> {
    pub model: &'a TcRbm<F>,
    pub protocol: PredictionProtocol,
}

impl<F: Real> Predictor<F> for RbmPredictor<'_, F> {
    fn alphabet_size(&self) -> usize {
        self.model.alphabet()
    }

    fn predict(&self, context: &[Symbol], horizon: usize, seed: u64) -> Result<Vec<Categorical<F>>> {
        self.model.predictive_distribution(context, horizon, &self.protocol, seed)
    }
}

/// Context-free baseline: the same distribution at every step.
pub struct MarginalPredictor<F> {
    pub marginal: Categorical<F>,
}

impl<F: Real> Predictor<F> for MarginalPredictor<F> {
    fn alphabet_size(&self) -> usize {
        self.marginal.len()
    }

    fn predict(&self, _: &[Symbol], horizon: usize, _: u64) -> Result<Vec<Categorical<F>>> {
        Ok(vec![self.marginal.clone(); horizon])
    }
}

/// Settings of the prediction protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionConfig {
    pub tau_max: usize,
    pub n_configs: usize,
    /// Shortest context a configuration may have.
    pub min_context: usize,
    pub seed: u64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            tau_max: 15,
            n_configs: 2000,
            min_context: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCurve {
    pub model: String,
    /// Mean log-probability of the true symbol at `τ = 1..=tau_max` (nats).
    pub mean_loglik: Vec<f64>,
    /// Standard error of each mean.
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub config: PredictionConfig,
    /// Sampled `(sequence, context length)` pairs, in draw order.
    pub configurations: Vec<(usize, usize)>,
    pub curves: Vec<PredictionCurve>,
}

impl PredictionReport {
    pub fn curve(&self, model: &str) -> Option<&PredictionCurve> {
        self.curves.iter().find(|c| c.model == model)
    }
}

/// Scores every predictor on the same `n_configs` configurations, drawn
/// uniformly with replacement from all `(sequence, t)` with
/// `t >= min_context` and `t + tau_max <= len`. Configuration `c` gives
/// every predictor the seed substream `c`.
pub fn prediction_loglik<F: Real>(
    predictors: &[(&str, &dyn Predictor<F>)],
    test: &Corpus,
    config: &PredictionConfig,
) -> Result<PredictionReport> {
    if config.tau_max < 1 || config.n_configs < 1 || config.min_context < 1 {
        return Err(Error::InvalidParameter(
            "tau_max, n_configs and min_context must be >= 1".into(),
        ));
    }
    for (_, p) in predictors {
        if p.alphabet_size() != test.alphabet_size {
            return Err(Error::AlphabetMismatch {
                model: p.alphabet_size(),
                data: test.alphabet_size,
            });
        }
    }
    let valid: Vec<(usize, usize)> = test
        .sequences
        .iter()
        .enumerate()
        .flat_map(|(n, s)| {
            let hi = s.len().saturating_sub(config.tau_max);
            (config.min_context..=hi).map(move |t| (n, t))
        })
        .collect();
    if valid.is_empty() {
        return Err(Error::NoWindows(format!(
            "no test sequence has {} context steps plus {} future steps",
            config.min_context, config.tau_max
        )));
    }
    let mut draw = rng::seeded(rng::derive_seed(config.seed, 0));
    let configurations: Vec<(usize, usize)> = (0..config.n_configs)
        .map(|_| valid[draw.random_range(0..valid.len())])
        .collect();
    let seeds = rng::derive_seed(config.seed, 1);

    let mut curves = Vec::with_capacity(predictors.len());
    for (name, p) in predictors {
        let scores = configurations
            .par_iter()
            .enumerate()
            .map(|(c, &(n, t))| {
                let steps = test.sequences[n].steps();
                let seed = rng::derive_seed(seeds, c as u64);
                let dists = p.predict(&steps[..t], config.tau_max, seed)?;
                Ok(dists
                    .iter()
                    .enumerate()
                    .map(|(k, d)| d.ln_prob(steps[t + k].index()).as_f64())
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        curves.push(summarize(name, &scores, config.tau_max));
    }
    Ok(PredictionReport {
        config: *config,
        configurations,
        curves,
    })
}

fn summarize(name: &str, scores: &[Vec<f64>], tau_max: usize) -> PredictionCurve {
    let n = scores.len() as f64;
    let mut mean_loglik = Vec::with_capacity(tau_max);
    let mut stderr = Vec::with_capacity(tau_max);
    for k in 0..tau_max {
        let m = scores.iter().map(|s| s[k]).sum::<f64>() / n;
        let var = if scores.len() > 1 {
            scores.iter().map(|s| (s[k] - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean_loglik.push(m);
        stderr.push((var / n).sqrt());
    }
    PredictionCurve {
        model: name.to_string(),
        mean_loglik,
        stderr,
    }
}

/// Sum of `log P(v_t | v_1..v_{t-1})` over every step of `seq` that has at
/// least one step of context, and the number of such steps.
pub fn next_step_loglik<F: Real, M: NextSymbolModel<F>>(model: &M, seq: &SymbolSequence) -> (f64, usize) {
    let steps = seq.steps();
    let total = (1..steps.len())
        .map(|t| model.predict_next(&steps[..t]).ln_prob(steps[t].index()).as_f64())
        .sum();
    (total, steps.len().saturating_sub(1))
}
