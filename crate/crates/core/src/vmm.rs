//! Variable length Markov model: a context tree with additive smoothing.

use crate::corpus::{Corpus, Symbol};
use crate::distribution::Categorical;
use crate::error::{Error, Result};
use crate::model::NextSymbolModel;
use crate::scalar::Real;
use crate::tree::{ContextTree, TreeParams};

/// Growth criteria plus the smoothing constant `γ_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmmParams {
    pub tree: TreeParams,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Vmm<F> {
    tree: ContextTree,
    gamma: F,
    cond: Vec<Categorical<F>>,
}

/// Adds `gamma` to every symbol of the empirical distribution and
/// renormalizes: `(p + γ) / (1 + |A| γ)`. Unobserved contexts become uniform.
pub fn smooth_counts<F: Real>(counts: &[u64], gamma: F) -> Categorical<F> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Categorical::uniform(counts.len());
    }
    let t = F::from_count(total);
    let norm = F::one() + F::lit(counts.len() as f64) * gamma;
    // already normalized; renormalizing would perturb the last bits
    Categorical::new(
        counts
            .iter()
            .map(|&c| (F::from_count(c) / t + gamma) / norm)
            .collect(),
    )
    .expect("smoothed counts form a distribution")
}

impl<F: Real> Vmm<F> {
    pub fn train(corpus: &Corpus, params: VmmParams) -> Result<Self> {
        let tree = ContextTree::grow(corpus, params.tree)?;
        Self::smooth(tree, F::lit(params.gamma))
    }

    /// Smooths every node of a grown tree.
    pub fn smooth(tree: ContextTree, gamma: F) -> Result<Self> {
        if !(gamma >= F::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "smoothing gamma must be finite and >= 0, got {gamma}"
            )));
        }
        let cond = tree
            .nodes()
            .iter()
            .map(|n| smooth_counts(n.counts(), gamma))
            .collect();
        Ok(Self { tree, gamma, cond })
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn node_distribution(&self, node: usize) -> &Categorical<F> {
        &self.cond[node]
    }

    pub fn distributions(&self) -> &[Categorical<F>] {
        &self.cond
    }
}

impl<F: Real> NextSymbolModel<F> for Vmm<F> {
    fn alphabet_size(&self) -> usize {
        self.tree.alphabet_size()
    }

    fn predict_next(&self, context: &[Symbol]) -> &Categorical<F> {
        &self.cond[self.tree.lookup(context)]
    }
}
