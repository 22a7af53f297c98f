//! Time-convolutional restricted Boltzmann machine.
//!
//! Visible units are one-hot symbols per time-step; each hidden feature sees
//! a window of `τ` consecutive visible steps and is replicated along time
//! (valid convolution, `T - τ + 1` hidden steps). With weight slices `W_k`
//! the energy is
//!
//! ```text
//! E(V, H) = -Σ_t c·v_t - Σ_t ( b·h_t + Σ_{k<τ} v_{t+k}ᵀ W_k h_t )
//! ```
//!
//! where the visible bias runs over all `T` steps and the hidden terms over
//! the `T - τ + 1` hidden steps.

mod exact;
mod filters;
mod sampler;
mod train;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::Symbol;
use crate::distribution::Categorical;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{logistic, Real};

pub use exact::ExactModel;
pub use filters::{filters_from_csv, filters_to_csv, Filter};
pub use sampler::{GibbsSampler, PredictionProtocol};
pub use train::{BatchStats, EpochDiagnostics, Gradient, LrSchedule, TrainConfig};

/// Binary hidden configuration, `hidden` features by `steps` positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenState {
    hidden: usize,
    steps: usize,
    // position-major: bits[t * hidden + j]
    bits: Vec<bool>,
}

impl HiddenState {
    pub fn zeros(hidden: usize, steps: usize) -> Self {
        Self {
            hidden,
            steps,
            bits: vec![false; hidden * steps],
        }
    }

    /// From position-major bits.
    pub fn from_bits(hidden: usize, steps: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != hidden * steps {
            return Err(Error::Shape(format!(
                "{} bits for {hidden} x {steps} hidden units",
                bits.len()
            )));
        }
        Ok(Self {
            hidden,
            steps,
            bits,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn get(&self, j: usize, t: usize) -> bool {
        self.bits[t * self.hidden + j]
    }

    #[inline]
    pub fn set(&mut self, j: usize, t: usize, on: bool) {
        self.bits[t * self.hidden + j] = on;
    }

    /// Units that are on at position `t`.
    pub fn column(&self, t: usize) -> &[bool] {
        &self.bits[t * self.hidden..(t + 1) * self.hidden]
    }
}

/// Bernoulli means of the hidden units, position-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenProbs<F> {
    pub hidden: usize,
    pub steps: usize,
    pub probs: Vec<F>,
}

impl<F: Real> HiddenProbs<F> {
    #[inline]
    pub fn get(&self, j: usize, t: usize) -> F {
        self.probs[t * self.hidden + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcRbm<F> {
    alphabet: usize,
    hidden: usize,
    filter: usize,
    // weights[(k * hidden + j) * alphabet + i] = W[i, j, k]
    weights: Vec<F>,
    hidden_bias: Vec<F>,
    visible_bias: Vec<F>,
}

impl<F: Real> TcRbm<F> {
    /// All-zero parameters.
    pub fn zeros(hidden: usize, filter: usize, alphabet: usize) -> Result<Self> {
        if hidden < 1 || filter < 1 || alphabet < 1 {
            return Err(Error::InvalidParameter(format!(
                "dimensions must be positive (hidden {hidden}, filter {filter}, alphabet {alphabet})"
            )));
        }
        Ok(Self {
            alphabet,
            hidden,
            filter,
            weights: vec![F::zero(); alphabet * hidden * filter],
            hidden_bias: vec![F::zero(); hidden],
            visible_bias: vec![F::zero(); alphabet],
        })
    }

    /// Weights drawn from N(0, 0.01²), zero biases.
    pub fn init(hidden: usize, filter: usize, alphabet: usize, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(hidden, filter, alphabet)?;
        let mut rng = rng::seeded(seed);
        for w in &mut model.weights {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = F::lit(0.01 * z);
        }
        Ok(model)
    }

    /// Builds a model from weights in `alphabet × hidden × filter` order
    /// (`W[i, j, k]` at `(i * hidden + j) * filter + k`).
    pub fn from_parts(
        alphabet: usize,
        hidden: usize,
        filter: usize,
        weights: Vec<F>,
        hidden_bias: Vec<F>,
        visible_bias: Vec<F>,
    ) -> Result<Self> {
        let mut model = Self::zeros(hidden, filter, alphabet)?;
        if weights.len() != alphabet * hidden * filter
            || hidden_bias.len() != hidden
            || visible_bias.len() != alphabet
        {
            return Err(Error::Shape("parameter lengths do not match dimensions".into()));
        }
        if weights
            .iter()
            .chain(&hidden_bias)
            .chain(&visible_bias)
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        for i in 0..alphabet {
            for j in 0..hidden {
                for k in 0..filter {
                    model.set_weight(i, j, k, weights[(i * hidden + j) * filter + k]);
                }
            }
        }
        model.hidden_bias = hidden_bias;
        model.visible_bias = visible_bias;
        Ok(model)
    }

    /// Weights in `alphabet × hidden × filter` order, see [`Self::from_parts`].
    pub fn weights_ijk(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.weights.len());
        for i in 0..self.alphabet {
            for j in 0..self.hidden {
                for k in 0..self.filter {
                    out.push(self.weight(i, j, k));
                }
            }
        }
        out
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn filter(&self) -> usize {
        self.filter
    }

    #[inline]
    fn widx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.hidden + j) * self.alphabet + i
    }

    /// `W[i, j, k]`: symbol `i`, hidden feature `j`, offset `k`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize, k: usize) -> F {
        self.weights[self.widx(i, j, k)]
    }

    #[inline]
    pub fn set_weight(&mut self, i: usize, j: usize, k: usize, w: F) {
        let idx = self.widx(i, j, k);
        self.weights[idx] = w;
    }

    pub fn hidden_bias(&self) -> &[F] {
        &self.hidden_bias
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [F] {
        &mut self.hidden_bias
    }

    pub fn visible_bias(&self) -> &[F] {
        &self.visible_bias
    }

    pub fn visible_bias_mut(&mut self) -> &mut [F] {
        &mut self.visible_bias
    }

    /// Number of hidden positions for a visible sequence of `len` steps.
    pub fn hidden_len(&self, len: usize) -> Result<usize> {
        if len < self.filter {
            return Err(Error::SequenceTooShort {
                len,
                filter: self.filter,
            });
        }
        Ok(len - self.filter + 1)
    }

    fn check_visible(&self, v: &[Symbol]) -> Result<()> {
        if let Some(s) = v.iter().find(|s| s.index() >= self.alphabet) {
            return Err(Error::AlphabetMismatch {
                model: self.alphabet,
                data: s.index() + 1,
            });
        }
        Ok(())
    }

    /// Energy of a joint configuration.
    pub fn energy(&self, v: &[Symbol], h: &HiddenState) -> Result<F> {
        self.check_visible(v)?;
        let th = self.hidden_len(v.len())?;
        if h.steps != th || h.hidden != self.hidden {
            return Err(Error::Shape(format!(
                "hidden state is {} x {}, expected {} x {th}",
                h.hidden, h.steps, self.hidden
            )));
        }
        let mut e = F::zero();
        for s in v {
            e -= self.visible_bias[s.index()];
        }
        for t in 0..th {
            for j in 0..self.hidden {
                if h.get(j, t) {
                    e -= self.hidden_bias[j];
                    for k in 0..self.filter {
                        e -= self.weight(v[t + k].index(), j, k);
                    }
                }
            }
        }
        Ok(e)
    }

    /// Writes the hidden pre-activations `b_j + Σ_k W[v_{t+k}, j, k]`
    /// (position-major) into `out`.
    pub(crate) fn hidden_activations(&self, v: &[Symbol], out: &mut Vec<F>) {
        let th = v.len() + 1 - self.filter;
        out.clear();
        out.reserve(th * self.hidden);
        for t in 0..th {
            for j in 0..self.hidden {
                let mut a = self.hidden_bias[j];
                for k in 0..self.filter {
                    a += self.weights[(k * self.hidden + j) * self.alphabet + v[t + k].index()];
                }
                out.push(a);
            }
        }
    }

    /// Writes the visible pre-activations for step `t` into `out`
    /// (length `alphabet`). Hidden positions outside the sequence are skipped.
    pub(crate) fn visible_activation(&self, h: &HiddenState, t: usize, out: &mut [F]) {
        out.copy_from_slice(&self.visible_bias);
        for k in 0..self.filter {
            if t < k || t - k >= h.steps {
                continue;
            }
            let col = h.column(t - k);
            for (j, &on) in col.iter().enumerate() {
                if on {
                    let base = (k * self.hidden + j) * self.alphabet;
                    for (o, w) in out.iter_mut().zip(&self.weights[base..base + self.alphabet]) {
                        *o += *w;
                    }
                }
            }
        }
    }

    /// `P(h_{j,t} = 1 | V)` for every hidden unit.
    pub fn hidden_probs(&self, v: &[Symbol]) -> Result<HiddenProbs<F>> {
        self.check_visible(v)?;
        let steps = self.hidden_len(v.len())?;
        let mut probs = Vec::new();
        self.hidden_activations(v, &mut probs);
        for p in &mut probs {
            *p = logistic(*p);
        }
        Ok(HiddenProbs {
            hidden: self.hidden,
            steps,
            probs,
        })
    }

    /// `P(v_t | H)` for every step of a sequence of `len` steps.
    pub fn visible_probs(&self, h: &HiddenState, len: usize) -> Result<Vec<Categorical<F>>> {
        let th = self.hidden_len(len)?;
        if h.steps != th || h.hidden != self.hidden {
            return Err(Error::Shape(format!(
                "hidden state is {} x {}, expected {} x {th}",
                h.hidden, h.steps, self.hidden
            )));
        }
        let mut act = vec![F::zero(); self.alphabet];
        Ok((0..len)
            .map(|t| {
                self.visible_activation(h, t, &mut act);
                softmax(&act)
            })
            .collect())
    }

    /// One block Gibbs sweep: `H' ~ P(H | V)`, then `V' ~ P(V | H')`.
    pub fn gibbs_step<R: Rng + ?Sized>(
        &self,
        v: &[Symbol],
        rng: &mut R,
    ) -> Result<(Vec<Symbol>, HiddenState)> {
        self.check_visible(v)?;
        self.hidden_len(v.len())?;
        let mut sampler = GibbsSampler::new(self, v.len())?;
        let mut vis = v.to_vec();
        sampler.sample_hidden(&vis, rng);
        sampler.sample_visible(&mut vis, 0, rng);
        Ok((vis, sampler.hidden_state().clone()))
    }

    /// Per-unit filters `W[·, j, ·]`.
    pub fn filters(&self) -> Vec<Filter<F>> {
        (0..self.hidden)
            .map(|j| Filter {
                unit: j,
                matrix: (0..self.alphabet)
                    .map(|i| (0..self.filter).map(|k| self.weight(i, j, k)).collect())
                    .collect(),
            })
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn weights_raw(&self) -> &[F] {
        &self.weights
    }

    #[cfg(test)]
    pub(crate) fn weights_raw_mut(&mut self) -> &mut [F] {
        &mut self.weights
    }
}

/// Softmax of pre-activations, shifted by the maximum for stability.
pub(crate) fn softmax<F: Real>(act: &[F]) -> Categorical<F> {
    let m = act.iter().copied().fold(F::neg_infinity(), F::max);
    Categorical::from_weights(act.iter().map(|&a| (a - m).exp()).collect())
}
