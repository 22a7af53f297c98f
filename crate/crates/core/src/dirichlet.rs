//! Dirichlet-VMM: the context tree with hierarchical conjugate smoothing.
//!
//! Each node's next-symbol distribution has a Dirichlet prior with
//! concentration `α` centred on its parent's posterior mean, so the posterior
//! mean is `(α m_parent + counts) / (α + Σ counts)`. The root is centred on the
//! uniform distribution. A node without data inherits its parent's mean.

use crate::corpus::{Corpus, Symbol};
use crate::distribution::Categorical;
use crate::error::{Error, Result};
use crate::model::NextSymbolModel;
use crate::scalar::Real;
use crate::tree::{ContextTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletParams {
    pub tree: TreeParams,
    /// Global concentration `α > 0`.
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct DirichletVmm<F> {
    tree: ContextTree,
    alpha: F,
    posterior: Vec<Categorical<F>>,
}

/// Conjugate update of a Dirichlet centred on `prior_mean` with weight `alpha`.
pub fn posterior_mean<F: Real>(
    prior_mean: &Categorical<F>,
    counts: &[u64],
    alpha: F,
) -> Categorical<F> {
    let total = F::from_count(counts.iter().sum());
    let denom = alpha + total;
    if total == F::zero() {
        return prior_mean.clone();
    }
    let probs = prior_mean
        .probs()
        .iter()
        .zip(counts)
        .map(|(&m, &c)| (alpha * m + F::from_count(c)) / denom)
        .collect();
    // already normalized up to rounding
    Categorical::from_weights(probs)
}

impl<F: Real> DirichletVmm<F> {
    pub fn train(corpus: &Corpus, params: DirichletParams) -> Result<Self> {
        let tree = ContextTree::grow(corpus, params.tree)?;
        Self::from_tree(tree, F::lit(params.alpha))
    }

    /// Computes posterior means top-down over an existing tree.
    pub fn from_tree(tree: ContextTree, alpha: F) -> Result<Self> {
        if !(alpha > F::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        let uniform = Categorical::uniform(tree.alphabet_size());
        let mut posterior: Vec<Option<Categorical<F>>> = vec![None; tree.len()];
        // parents always precede children in node order
        for (i, node) in tree.nodes().iter().enumerate() {
            let prior = match node.parent() {
                None => &uniform,
                Some(p) => posterior[p].as_ref().expect("parent computed first"),
            };
            posterior[i] = Some(posterior_mean(prior, node.counts(), alpha));
        }
        Ok(Self {
            tree,
            alpha,
            posterior: posterior.into_iter().map(Option::unwrap).collect(),
        })
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn node_distribution(&self, node: usize) -> &Categorical<F> {
        &self.posterior[node]
    }

    pub fn distributions(&self) -> &[Categorical<F>] {
        &self.posterior
    }
}

impl<F: Real> NextSymbolModel<F> for DirichletVmm<F> {
    fn alphabet_size(&self) -> usize {
        self.tree.alphabet_size()
    }

    fn predict_next(&self, context: &[Symbol]) -> &Categorical<F> {
        &self.posterior[self.tree.lookup(context)]
    }
}
