//! Behaviour shared by the context-tree models.

use rand::Rng;

use crate::corpus::{Symbol, SymbolSequence, ALPHABET_SIZE};
use crate::distribution::Categorical;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// A model that gives an exact next-symbol distribution for any history.
pub trait NextSymbolModel<F: Real>: Sync {
    fn alphabet_size(&self) -> usize;

    /// Distribution of the symbol following `context` (oldest first).
    fn predict_next(&self, context: &[Symbol]) -> &Categorical<F>;

    /// Ancestral sampling, reproducible from `seed`.
    fn sample_sequence(&self, length: usize, seed: u64) -> Result<SymbolSequence>
    where
        Self: Sized,
    {
        self.sample_sequence_with(length, &mut rng::seeded(seed))
    }

    /// Ancestral sampling from a caller-supplied stream. Over the melody
    /// alphabet the first step never draws the continuation symbol.
    fn sample_sequence_with<R: Rng + ?Sized>(
        &self,
        length: usize,
        rng: &mut R,
    ) -> Result<SymbolSequence>
    where
        Self: Sized,
    {
        if length < 1 {
            return Err(Error::InvalidParameter("sample length must be >= 1".into()));
        }
        let mut steps: Vec<Symbol> = Vec::with_capacity(length);
        for t in 0..length {
            let dist = self.predict_next(&steps);
            let idx = if t == 0 && self.alphabet_size() == ALPHABET_SIZE {
                dist.without(Symbol::CONTINUATION.index()).sample(rng)
            } else {
                dist.sample(rng)
            };
            steps.push(Symbol::new(idx as u8));
        }
        SymbolSequence::new("sample", steps)
    }
}
