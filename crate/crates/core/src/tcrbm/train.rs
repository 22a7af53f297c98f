use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GibbsSampler, TcRbm};
use crate::corpus::{Corpus, Symbol};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// How the learning rate moves across epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant,
    /// Linear from `lr0` at the first epoch to `lr0 * final_fraction` at the last.
    Linear { final_fraction: f64 },
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Linear { final_fraction: 0.1 }
    }
}

impl LrSchedule {
    pub fn rate(&self, lr0: f64, epoch: usize, epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => lr0,
            LrSchedule::Linear { final_fraction } => {
                if epochs <= 1 {
                    return lr0;
                }
                let x = epoch as f64 / (epochs - 1) as f64;
                lr0 * (1.0 - (1.0 - final_fraction) * x)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub filter: usize,
    pub cd_k: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub lr_schedule: LrSchedule,
    pub weight_decay: f64,
    pub sparsity_target: f64,
    pub sparsity_weight: f64,
    pub minibatch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 50,
            filter: 8,
            cd_k: 5,
            epochs: 500,
            lr0: 0.5,
            lr_schedule: LrSchedule::default(),
            weight_decay: 0.0002,
            sparsity_target: 0.1,
            sparsity_weight: 1.0,
            minibatch: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.hidden < 1 || self.filter < 1 {
            return bad(format!("hidden ({}) and filter ({}) must be >= 1", self.hidden, self.filter));
        }
        if self.cd_k < 1 || self.epochs < 1 || self.minibatch < 1 {
            return bad(format!(
                "cd_k ({}), epochs ({}) and minibatch ({}) must be >= 1",
                self.cd_k, self.epochs, self.minibatch
            ));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if let LrSchedule::Linear { final_fraction } = self.lr_schedule {
            if !(final_fraction.is_finite() && final_fraction > 0.0) {
                return bad(format!("final_fraction must be positive, got {final_fraction}"));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.sparsity_target > 0.0 && self.sparsity_target < 1.0) {
            return bad(format!("sparsity_target must be in (0, 1), got {}", self.sparsity_target));
        }
        if !(self.sparsity_weight.is_finite() && self.sparsity_weight >= 0.0) {
            return bad(format!("sparsity_weight must be >= 0, got {}", self.sparsity_weight));
        }
        Ok(())
    }
}

/// Parameter-shaped accumulator (weights in the model's internal layout).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<F> {
    pub weights: Vec<F>,
    pub hidden_bias: Vec<F>,
    pub visible_bias: Vec<F>,
}

impl<F: Real> Gradient<F> {
    pub fn zeros(model: &TcRbm<F>) -> Self {
        Self {
            weights: vec![F::zero(); model.weights.len()],
            hidden_bias: vec![F::zero(); model.hidden],
            visible_bias: vec![F::zero(); model.alphabet],
        }
    }

    /// Adds `scale * Σ_t h[t, j] [v_{t+k} = i]` and friends, where `h` are
    /// hidden statistics (position-major).
    pub(crate) fn accumulate(&mut self, model: &TcRbm<F>, v: &[Symbol], h: &[F], scale: F) {
        let (a, nh) = (model.alphabet, model.hidden);
        let th = v.len() + 1 - model.filter;
        for t in 0..th {
            for j in 0..nh {
                let p = h[t * nh + j] * scale;
                self.hidden_bias[j] += p;
                for k in 0..model.filter {
                    self.weights[(k * nh + j) * a + v[t + k].index()] += p;
                }
            }
        }
        for s in v {
            self.visible_bias[s.index()] += scale;
        }
    }

    fn add(&mut self, other: &Self) {
        for (x, y) in self.weights.iter_mut().zip(&other.weights) {
            *x += *y;
        }
        for (x, y) in self.hidden_bias.iter_mut().zip(&other.hidden_bias) {
            *x += *y;
        }
        for (x, y) in self.visible_bias.iter_mut().zip(&other.visible_bias) {
            *x += *y;
        }
    }

    pub fn scaled(mut self, s: F) -> Self {
        self.weights.iter_mut().for_each(|x| *x *= s);
        self.hidden_bias.iter_mut().for_each(|x| *x *= s);
        self.visible_bias.iter_mut().for_each(|x| *x *= s);
        self
    }

    pub fn max_abs(&self) -> F {
        self.weights
            .iter()
            .chain(&self.hidden_bias)
            .chain(&self.visible_bias)
            .fold(F::zero(), |m, x| m.max(x.abs()))
    }
}

/// Summed contrastive-divergence statistics of a minibatch.
#[derive(Debug, Clone)]
pub struct BatchStats<F> {
    pub positive: Gradient<F>,
    pub negative: Gradient<F>,
    /// Σ p(1 - p) of the positive hidden probabilities, shaped like the
    /// hidden part of a gradient (visible part unused).
    pub slope: Gradient<F>,
    /// Σ p of the positive hidden probabilities, per unit.
    pub activity: Vec<F>,
    pub sequences: usize,
    pub hidden_positions: usize,
    pub visible_positions: usize,
    /// Σ -log P(v_t = data | H_1) after the first Gibbs half-sweep.
    pub recon_nll: F,
}

impl<F: Real> BatchStats<F> {
    pub fn zeros(model: &TcRbm<F>) -> Self {
        Self {
            positive: Gradient::zeros(model),
            negative: Gradient::zeros(model),
            slope: Gradient::zeros(model),
            activity: vec![F::zero(); model.hidden],
            sequences: 0,
            hidden_positions: 0,
            visible_positions: 0,
            recon_nll: F::zero(),
        }
    }

    /// Statistics of one sequence: positive phase from `P(H | V)`, negative
    /// phase from `P(H | V_k)` after `cd_k` block Gibbs sweeps from the data.
    pub fn collect<R: Rng + ?Sized>(
        model: &TcRbm<F>,
        v: &[Symbol],
        cd_k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        model.check_visible(v)?;
        let th = model.hidden_len(v.len())?;
        let mut s = Self::zeros(model);
        let mut sampler = GibbsSampler::new(model, v.len())?;

        let pos = sampler.hidden_probs(v).to_vec();
        s.positive.accumulate(model, v, &pos, F::one());
        for t in 0..th {
            for j in 0..model.hidden {
                let p = pos[t * model.hidden + j];
                s.activity[j] += p;
            }
        }
        let slope: Vec<F> = pos.iter().map(|&p| p * (F::one() - p)).collect();
        s.slope.accumulate(model, v, &slope, F::one());

        let mut vk = v.to_vec();
        sampler.sample_hidden_from(&pos, rng);
        for t in 0..v.len() {
            let d = sampler.visible_dist(t);
            s.recon_nll -= d.ln_prob(v[t].index());
        }
        sampler.sample_visible(&mut vk, 0, rng);
        for _ in 1..cd_k {
            sampler.sample_hidden(&vk, rng);
            sampler.sample_visible(&mut vk, 0, rng);
        }
        let neg = sampler.hidden_probs(&vk).to_vec();
        s.negative.accumulate(model, &vk, &neg, F::one());

        s.sequences = 1;
        s.hidden_positions = th;
        s.visible_positions = v.len();
        Ok(s)
    }

    pub fn merge(&mut self, other: &Self) {
        self.positive.add(&other.positive);
        self.negative.add(&other.negative);
        self.slope.add(&other.slope);
        for (x, y) in self.activity.iter_mut().zip(&other.activity) {
            *x += *y;
        }
        self.sequences += other.sequences;
        self.hidden_positions += other.hidden_positions;
        self.visible_positions += other.visible_positions;
        self.recon_nll += other.recon_nll;
    }

    /// `(positive - negative) / sequences`: a CD estimate of the gradient of
    /// the mean per-sequence log-likelihood.
    pub fn mean_per_sequence(&self) -> Gradient<F> {
        let mut g = self.positive.clone();
        g.add(&self.negative.clone().scaled(-F::one()));
        g.scaled(F::one() / F::from_count(self.sequences.max(1) as u64))
    }

    /// Mean hidden activation per unit over all hidden positions.
    pub fn mean_activity(&self) -> Vec<F> {
        let n = F::from_count(self.hidden_positions.max(1) as u64);
        self.activity.iter().map(|&a| a / n).collect()
    }

    /// One parameter step. Weight and hidden-bias statistics are divided by
    /// the number of hidden positions, visible-bias statistics by the number
    /// of visible positions.
    pub fn apply_update(&self, model: &mut TcRbm<F>, lr: F, config: &TrainConfig) {
        let nh = F::from_count(self.hidden_positions.max(1) as u64);
        let nv = F::from_count(self.visible_positions.max(1) as u64);
        let wd = F::lit(config.weight_decay);
        let lambda = F::lit(config.sparsity_weight);
        let target = F::lit(config.sparsity_target);
        let two = F::lit(2.0);
        // d/dq of λ (q - target)²
        let pull: Vec<F> = self
            .mean_activity()
            .iter()
            .map(|&q| two * lambda * (q - target))
            .collect();
        let (a, h) = (model.alphabet, model.hidden);
        for (idx, w) in model.weights.iter_mut().enumerate() {
            let j = (idx / a) % h;
            let cd = (self.positive.weights[idx] - self.negative.weights[idx]) / nh;
            let sp = pull[j] * self.slope.weights[idx] / nh;
            *w += lr * (cd - sp) - lr * wd * *w;
        }
        for j in 0..h {
            let cd = (self.positive.hidden_bias[j] - self.negative.hidden_bias[j]) / nh;
            let sp = pull[j] * self.slope.hidden_bias[j] / nh;
            model.hidden_bias[j] += lr * (cd - sp);
        }
        for i in 0..a {
            let cd = (self.positive.visible_bias[i] - self.negative.visible_bias[i]) / nv;
            model.visible_bias[i] += lr * cd;
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDiagnostics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-step reconstruction cross-entropy (nats).
    pub recon_ce: f64,
    /// Mean hidden activation over all units and positions.
    pub mean_hidden_activity: f64,
}

impl<F: Real> TcRbm<F> {
    /// CD statistics of a minibatch; sequence `n` of the batch draws from
    /// substream `stream + n` of `seed`.
    pub fn cd_statistics(
        &self,
        batch: &[&[Symbol]],
        cd_k: usize,
        seed: u64,
        stream: u64,
    ) -> Result<BatchStats<F>> {
        let parts = batch
            .par_iter()
            .enumerate()
            .map(|(n, v)| {
                let mut r = rng::substream(seed, stream + n as u64);
                BatchStats::collect(self, v, cd_k, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = BatchStats::zeros(self);
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }

    /// One CD-k parameter update on a minibatch.
    pub fn cd_update(
        &mut self,
        batch: &[&[Symbol]],
        lr: F,
        config: &TrainConfig,
        seed: u64,
    ) -> Result<BatchStats<F>> {
        let stats = self.cd_statistics(batch, config.cd_k, seed, 0)?;
        stats.apply_update(self, lr, config);
        Ok(stats)
    }

    /// Trains a fresh model on `corpus`.
    pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<(Self, Vec<EpochDiagnostics>)> {
        Self::train_with(corpus, config, |_| {})
    }

    /// As [`TcRbm::train`], reporting each epoch as it finishes.
    pub fn train_with(
        corpus: &Corpus,
        config: &TrainConfig,
        mut on_epoch: impl FnMut(&EpochDiagnostics),
    ) -> Result<(Self, Vec<EpochDiagnostics>)> {
        config.validate()?;
        if corpus.sequences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some(s) = corpus.sequences.iter().find(|s| s.len() < config.filter) {
            return Err(Error::SequenceTooShort {
                len: s.len(),
                filter: config.filter,
            });
        }
        let mut model = Self::init(
            config.hidden,
            config.filter,
            corpus.alphabet_size,
            rng::derive_seed(config.seed, 1),
        )?;
        let data: Vec<&[Symbol]> = corpus.sequences.iter().map(|s| s.steps()).collect();
        for v in &data {
            model.check_visible(v)?;
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut shuffle = rng::seeded(rng::derive_seed(config.seed, 2));
        let cd_seed = rng::derive_seed(config.seed, 3);
        let mut log = Vec::with_capacity(config.epochs);
        let mut stream = 0u64;
        for epoch in 0..config.epochs {
            order.shuffle(&mut shuffle);
            let lr = config.lr_schedule.rate(config.lr0, epoch, config.epochs);
            let mut recon = 0.0;
            let mut steps = 0usize;
            let mut activity = 0.0;
            let mut positions = 0usize;
            for chunk in order.chunks(config.minibatch) {
                let batch: Vec<&[Symbol]> = chunk.iter().map(|&n| data[n]).collect();
                let stats = model.cd_statistics(&batch, config.cd_k, cd_seed, stream)?;
                stream += batch.len() as u64;
                stats.apply_update(&mut model, F::lit(lr), config);
                recon += stats.recon_nll.as_f64();
                steps += stats.visible_positions;
                activity += stats.activity.iter().map(|a| a.as_f64()).sum::<f64>();
                positions += stats.hidden_positions * model.hidden;
            }
            let d = EpochDiagnostics {
                epoch,
                lr,
                recon_ce: recon / steps as f64,
                mean_hidden_activity: activity / positions as f64,
            };
            on_epoch(&d);
            log.push(d);
        }
        Ok((model, log))
    }
}
