use rand::Rng;
use rayon::prelude::*;

use super::{softmax, HiddenState, TcRbm};
use crate::corpus::{Symbol, SymbolSequence, ALPHABET_SIZE};
use crate::distribution::Categorical;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{logistic, Real};

/// Block Gibbs sampler over sequences of a fixed length, reusing buffers.
pub struct GibbsSampler<'a, F> {
    model: &'a TcRbm<F>,
    len: usize,
    h: HiddenState,
    act: Vec<F>,
    vis: Vec<F>,
}

impl<'a, F: Real> GibbsSampler<'a, F> {
    pub fn new(model: &'a TcRbm<F>, len: usize) -> Result<Self> {
        let th = model.hidden_len(len)?;
        Ok(Self {
            model,
            len,
            h: HiddenState::zeros(model.hidden, th),
            act: Vec::with_capacity(th * model.hidden),
            vis: vec![F::zero(); model.alphabet],
        })
    }

    pub fn hidden_state(&self) -> &HiddenState {
        &self.h
    }

    /// Computes `P(H | V)` into the internal buffer and returns it
    /// (position-major).
    pub fn hidden_probs(&mut self, v: &[Symbol]) -> &[F] {
        debug_assert_eq!(v.len(), self.len);
        self.model.hidden_activations(v, &mut self.act);
        for a in &mut self.act {
            *a = logistic(*a);
        }
        &self.act
    }

    /// Draws `H ~ P(H | V)`.
    pub fn sample_hidden<R: Rng + ?Sized>(&mut self, v: &[Symbol], rng: &mut R) {
        self.hidden_probs(v);
        for (bit, &p) in self.h.bits.iter_mut().zip(&self.act) {
            *bit = F::lit(rng.random::<f64>()) < p;
        }
    }

    /// Sets the hidden state from probabilities already held by the caller.
    pub fn sample_hidden_from<R: Rng + ?Sized>(&mut self, probs: &[F], rng: &mut R) {
        for (bit, &p) in self.h.bits.iter_mut().zip(probs) {
            *bit = F::lit(rng.random::<f64>()) < p;
        }
    }

    /// `P(v_t | H)` under the current hidden state.
    pub fn visible_dist(&mut self, t: usize) -> Categorical<F> {
        self.model.visible_activation(&self.h, t, &mut self.vis);
        softmax(&self.vis)
    }

    /// Draws `v_t ~ P(v_t | H)` for `t >= from`, leaving `v[..from]` untouched.
    pub fn sample_visible<R: Rng + ?Sized>(&mut self, v: &mut [Symbol], from: usize, rng: &mut R) {
        debug_assert_eq!(v.len(), self.len);
        for t in from..self.len {
            self.model.visible_activation(&self.h, t, &mut self.vis);
            let m = self.vis.iter().copied().fold(F::neg_infinity(), F::max);
            let mut total = F::zero();
            for a in &mut self.vis {
                *a = (*a - m).exp();
                total += *a;
            }
            let u = F::lit(rng.random::<f64>()) * total;
            let mut acc = F::zero();
            let mut pick = self.vis.len() - 1;
            for (i, &w) in self.vis.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            v[t] = Symbol::new(pick as u8);
        }
    }
}

/// Settings of the clamped-context prediction sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionProtocol {
    /// Independent chains.
    pub chains: usize,
    /// Gibbs sweeps per chain.
    pub iterations: usize,
    /// Leading hidden samples discarded per chain.
    pub burn_in: usize,
}

impl Default for PredictionProtocol {
    /// 100 chains of 15 sweeps, first 10 discarded: 500 retained samples.
    fn default() -> Self {
        Self {
            chains: 100,
            iterations: 15,
            burn_in: 10,
        }
    }
}

impl PredictionProtocol {
    pub fn retained(&self) -> usize {
        self.chains * self.iterations.saturating_sub(self.burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iterations <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "prediction protocol retains no samples ({} chains, {} iterations, {} burn-in)",
                self.chains, self.iterations, self.burn_in
            )));
        }
        Ok(())
    }
}

fn random_symbols<R: Rng + ?Sized>(n: usize, alphabet: usize, rng: &mut R) -> Vec<Symbol> {
    (0..n)
        .map(|_| Symbol::new(rng.random_range(0..alphabet) as u8))
        .collect()
}

impl<F: Real> TcRbm<F> {
    /// Estimates `P(v_{t+τ} | v_1..v_t)` for `τ = 1..=horizon` by clamped
    /// block Gibbs sampling.
    ///
    /// Each chain starts from a random future, and after every sweep the
    /// context is clamped back to the observation. Every retained hidden
    /// sample contributes `P(v_{t+τ} | H)`; the result is their average over
    /// all chains. Only the last `τ - 1` context steps interact with the
    /// future, so older context is dropped without changing the target
    /// distribution.
    pub fn predictive_distribution(
        &self,
        context: &[Symbol],
        horizon: usize,
        protocol: &PredictionProtocol,
        seed: u64,
    ) -> Result<Vec<Categorical<F>>> {
        if horizon < 1 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        if context.is_empty() {
            return Err(Error::InvalidParameter("context must not be empty".into()));
        }
        protocol.validate()?;
        self.check_visible(context)?;

        let keep = context.len().min(self.filter - 1);
        let ctx = &context[context.len() - keep..];
        let future = horizon.max(self.filter.saturating_sub(keep));
        let len = keep + future;
        let alphabet = self.alphabet;

        let sums: Vec<Vec<F>> = (0..protocol.chains)
            .into_par_iter()
            .map(|chain| -> Result<Vec<F>> {
                let mut rng = rng::substream(seed, chain as u64);
                let mut v = ctx.to_vec();
                v.extend(random_symbols(future, alphabet, &mut rng));
                let mut sampler = GibbsSampler::new(self, len)?;
                let mut acc = vec![F::zero(); horizon * alphabet];
                for it in 0..protocol.iterations {
                    sampler.sample_hidden(&v, &mut rng);
                    if it >= protocol.burn_in {
                        for step in 0..horizon {
                            let d = sampler.visible_dist(keep + step);
                            for (a, p) in acc[step * alphabet..(step + 1) * alphabet]
                                .iter_mut()
                                .zip(d.probs())
                            {
                                *a += *p;
                            }
                        }
                    }
                    sampler.sample_visible(&mut v, keep, &mut rng);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut total = vec![F::zero(); horizon * alphabet];
        for s in &sums {
            for (t, x) in total.iter_mut().zip(s) {
                *t += *x;
            }
        }
        Ok(total
            .chunks(alphabet)
            .map(|c| Categorical::from_weights(c.to_vec()))
            .collect())
    }

    /// Free-running sample: random start, `burn_in` Gibbs sweeps. Over the
    /// melody alphabet a leading continuation is redrawn from the remaining
    /// symbols.
    pub fn sample_free(&self, length: usize, burn_in: usize, seed: u64) -> Result<SymbolSequence> {
        let mut rng = rng::seeded(seed);
        self.sample_free_with(length, burn_in, &mut rng)
    }

    pub fn sample_free_with<R: Rng + ?Sized>(
        &self,
        length: usize,
        burn_in: usize,
        rng: &mut R,
    ) -> Result<SymbolSequence> {
        let mut sampler = GibbsSampler::new(self, length)?;
        let mut v = random_symbols(length, self.alphabet, rng);
        for _ in 0..burn_in {
            sampler.sample_hidden(&v, rng);
            sampler.sample_visible(&mut v, 0, rng);
        }
        if self.alphabet == ALPHABET_SIZE && v[0] == Symbol::CONTINUATION {
            let dist = if burn_in > 0 {
                sampler.visible_dist(0)
            } else {
                Categorical::uniform(self.alphabet)
            };
            v[0] = Symbol::new(dist.without(Symbol::CONTINUATION.index()).sample(rng) as u8);
        }
        SymbolSequence::new("sample", v)
    }
}
