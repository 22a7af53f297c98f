use super::train::Gradient;
use super::{HiddenState, TcRbm};
use crate::corpus::Symbol;
use crate::distribution::Categorical;
use crate::error::{Error, Result};
use crate::scalar::{logistic, softplus, Real};

/// Largest visible configuration space [`ExactModel`] will enumerate.
pub const MAX_STATES: usize = 1 << 22;

/// Brute-force distribution of a small TC-RBM over all visible sequences of
/// a fixed length. Hidden units are summed out analytically.
#[derive(Debug, Clone)]
pub struct ExactModel<'a, F> {
    model: &'a TcRbm<F>,
    len: usize,
    // log of the unnormalized marginal exp(-free energy), by state index
    log_weight: Vec<F>,
    log_z: F,
}

impl<'a, F: Real> ExactModel<'a, F> {
    pub fn new(model: &'a TcRbm<F>, len: usize) -> Result<Self> {
        model.hidden_len(len)?;
        let states = (model.alphabet as u128).pow(len as u32);
        if states > MAX_STATES as u128 {
            return Err(Error::InvalidParameter(format!(
                "{states} visible states are too many to enumerate"
            )));
        }
        let mut act = Vec::new();
        let log_weight: Vec<F> = (0..states as usize)
            .map(|s| {
                let v = Self::decode_with(model.alphabet, len, s);
                Self::neg_free_energy(model, &v, &mut act)
            })
            .collect();
        let log_z = log_sum_exp(&log_weight);
        Ok(Self {
            model,
            len,
            log_weight,
            log_z,
        })
    }

    fn neg_free_energy(model: &TcRbm<F>, v: &[Symbol], act: &mut Vec<F>) -> F {
        model.hidden_activations(v, act);
        let mut x = v.iter().map(|s| model.visible_bias[s.index()]).sum::<F>();
        for &a in act.iter() {
            x += softplus(a);
        }
        x
    }

    fn decode_with(alphabet: usize, len: usize, mut s: usize) -> Vec<Symbol> {
        let mut v = vec![Symbol::new(0); len];
        for t in (0..len).rev() {
            v[t] = Symbol::new((s % alphabet) as u8);
            s /= alphabet;
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn states(&self) -> usize {
        self.log_weight.len()
    }

    /// State index of a visible sequence; the first step is most significant.
    pub fn index(&self, v: &[Symbol]) -> usize {
        v.iter()
            .fold(0, |acc, s| acc * self.model.alphabet + s.index())
    }

    pub fn decode(&self, state: usize) -> Vec<Symbol> {
        Self::decode_with(self.model.alphabet, self.len, state)
    }

    pub fn log_partition(&self) -> F {
        self.log_z
    }

    /// `log Z` by direct summation of `exp(-E(V, H))` over every joint state.
    /// Exponential in the number of hidden units; only for tiny models.
    pub fn log_partition_joint(&self) -> Result<F> {
        let th = self.len + 1 - self.model.filter;
        let bits = th * self.model.hidden;
        if bits > 20 {
            return Err(Error::InvalidParameter(format!(
                "{bits} hidden units are too many to enumerate"
            )));
        }
        let mut terms = Vec::with_capacity(self.states() << bits);
        for s in 0..self.states() {
            let v = self.decode(s);
            for hb in 0..1usize << bits {
                let h = HiddenState::from_bits(
                    self.model.hidden,
                    th,
                    (0..bits).map(|b| hb >> b & 1 == 1).collect(),
                )?;
                terms.push(-self.model.energy(&v, &h)?);
            }
        }
        Ok(log_sum_exp(&terms))
    }

    /// `P(V)` for every state.
    pub fn probabilities(&self) -> Vec<F> {
        self.log_weight
            .iter()
            .map(|&w| (w - self.log_z).exp())
            .collect()
    }

    pub fn log_prob(&self, v: &[Symbol]) -> Result<F> {
        self.check(v)?;
        Ok(self.log_weight[self.index(v)] - self.log_z)
    }

    /// Mean log-probability of a data set.
    pub fn log_likelihood(&self, data: &[Vec<Symbol>]) -> Result<F> {
        let mut total = F::zero();
        for v in data {
            total += self.log_prob(v)?;
        }
        Ok(total / F::from_count(data.len().max(1) as u64))
    }

    /// Gradient of [`ExactModel::log_likelihood`]: data expectation of the
    /// sufficient statistics minus the model expectation.
    pub fn gradient(&self, data: &[Vec<Symbol>]) -> Result<Gradient<F>> {
        let mut g = Gradient::zeros(self.model);
        let mut act = Vec::new();
        let n = F::from_count(data.len().max(1) as u64);
        for v in data {
            self.check(v)?;
            self.stats_into(v, F::one() / n, &mut act, &mut g);
        }
        for (s, p) in self.probabilities().into_iter().enumerate() {
            if p > F::zero() {
                let v = self.decode(s);
                self.stats_into(&v, -p, &mut act, &mut g);
            }
        }
        Ok(g)
    }

    fn stats_into(&self, v: &[Symbol], scale: F, act: &mut Vec<F>, g: &mut Gradient<F>) {
        self.model.hidden_activations(v, act);
        for a in act.iter_mut() {
            *a = logistic(*a);
        }
        g.accumulate(self.model, v, act, scale);
    }

    /// Distribution of `v_t` marginalized over the rest of the sequence.
    pub fn step_marginal(&self, t: usize) -> Categorical<F> {
        let mut w = vec![F::zero(); self.model.alphabet];
        for (s, p) in self.probabilities().into_iter().enumerate() {
            w[self.decode(s)[t].index()] += p;
        }
        Categorical::from_weights(w)
    }

    /// `P(v_t | v_0..v_{c-1})` for a clamped prefix of length `c < t + 1`,
    /// marginalizing every other unclamped step.
    pub fn conditional(&self, prefix: &[Symbol], t: usize) -> Result<Categorical<F>> {
        if prefix.is_empty() || t < prefix.len() || t >= self.len {
            return Err(Error::InvalidParameter(format!(
                "step {t} is not in the unclamped range {}..{}",
                prefix.len(),
                self.len
            )));
        }
        self.model.check_visible(prefix)?;
        let mut w = vec![F::zero(); self.model.alphabet];
        let free = self.len - prefix.len();
        let base = self.index(prefix) * self.model.alphabet.pow(free as u32);
        let m = self.log_weight[base..base + self.model.alphabet.pow(free as u32)]
            .iter()
            .copied()
            .fold(F::neg_infinity(), F::max);
        for s in base..base + self.model.alphabet.pow(free as u32) {
            w[self.decode(s)[t].index()] += (self.log_weight[s] - m).exp();
        }
        Ok(Categorical::from_weights(w))
    }

    fn check(&self, v: &[Symbol]) -> Result<()> {
        if v.len() != self.len {
            return Err(Error::Shape(format!(
                "sequence has {} steps, expected {}",
                v.len(),
                self.len
            )));
        }
        self.model.check_visible(v)
    }
}

fn log_sum_exp<F: Real>(xs: &[F]) -> F {
    let m = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<F>().ln()
}
