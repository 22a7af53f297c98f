use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Probability vector over the alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Categorical<F> {
    probs: Vec<F>,
}

impl<F: Real> Categorical<F> {
    pub fn uniform(size: usize) -> Self {
        let p = F::one() / F::lit(size as f64);
        Self { probs: vec![p; size] }
    }

    pub fn one_hot(size: usize, index: usize) -> Self {
        let mut probs = vec![F::zero(); size];
        probs[index] = F::one();
        Self { probs }
    }

    /// Checks that `probs` is nonnegative and sums to one within `1e-6`.
    pub fn new(probs: Vec<F>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if probs.iter().any(|p| !(*p >= F::zero()) || !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: F = probs.iter().copied().sum();
        if (total - F::one()).abs() > F::lit(1e-6) {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights. All-zero weights give the uniform distribution.
    pub fn from_weights(weights: Vec<F>) -> Self {
        let total: F = weights.iter().copied().sum();
        if total <= F::zero() {
            return Self::uniform(weights.len());
        }
        Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        Self::from_weights(counts.iter().map(|&c| F::from_count(c)).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn prob(&self, index: usize) -> F {
        self.probs[index]
    }

    #[inline]
    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<F> {
        self.probs
    }

    pub fn ln_prob(&self, index: usize) -> F {
        self.probs[index].ln()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = F::lit(rng.random::<f64>());
        let mut acc = F::zero();
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > F::zero() {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        // rounding left u beyond the accumulated mass
        last
    }

    /// Copy with `index` removed and the rest renormalized. Falls back to the
    /// original distribution if `index` carried all the mass.
    pub fn without(&self, index: usize) -> Self {
        let mut w = self.probs.clone();
        w[index] = F::zero();
        if w.iter().all(|p| *p <= F::zero()) {
            return self.clone();
        }
        Self::from_weights(w)
    }

    /// Total variation distance.
    pub fn total_variation(&self, other: &Self) -> F {
        let s: F = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (*a - *b).abs())
            .sum();
        s * F::lit(0.5)
    }

    /// Elementwise average of equally sized distributions.
    pub fn mean<'a, I>(items: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Self>,
        F: 'a,
    {
        let mut iter = items.into_iter();
        let first = iter.next()?;
        let mut acc = first.probs.clone();
        let mut n = 1usize;
        for d in iter {
            for (a, p) in acc.iter_mut().zip(&d.probs) {
                *a += *p;
            }
            n += 1;
        }
        let n = F::lit(n as f64);
        Some(Self {
            probs: acc.into_iter().map(|a| a / n).collect(),
        })
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> F {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (*a - *b).abs())
            .fold(F::zero(), F::max)
    }
}
