//! Leave-one-out grid search over the context-tree hyperparameters.
//!
//! Folds hold out one whole sequence. A tree is grown once per fold and
//! growth setting; every smoothing value of the grid is scored on it.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dirichlet::DirichletVmm;
use crate::error::{Error, Result};
use crate::eval::next_step_loglik;
use crate::tree::{ContextTree, TreeParams};
use crate::vmm::Vmm;

/// Context length used when the grid does not give one.
pub const DEFAULT_MAX_DEPTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Vmm,
    Dvmm,
}

impl ModelKind {
    /// Name of the smoothing parameter.
    pub fn smoothing_name(&self) -> &'static str {
        match self {
            ModelKind::Vmm => "gamma_min",
            ModelKind::Dvmm => "alpha",
        }
    }
}

/// Candidate values per parameter. `smoothing` holds `γ_min` for the VMM and
/// `α` for the Dirichlet-VMM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    pub c_min: Vec<u64>,
    pub eps_min: Vec<f64>,
    #[serde(alias = "gamma_min", alias = "alpha")]
    pub smoothing: Vec<f64>,
}

fn default_depth() -> usize {
    DEFAULT_MAX_DEPTH
}

impl GridSpec {
    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.c_min.is_empty() || self.eps_min.is_empty() || self.smoothing.is_empty() {
            return Err(Error::InvalidParameter("every grid list must be nonempty".into()));
        }
        for &c in &self.c_min {
            for &e in &self.eps_min {
                TreeParams::new(self.max_depth, c, e)?;
            }
        }
        for &s in &self.smoothing {
            let ok = match kind {
                ModelKind::Vmm => s.is_finite() && s >= 0.0,
                ModelKind::Dvmm => s.is_finite() && s > 0.0,
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "{} = {s} is out of range",
                    kind.smoothing_name()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.c_min.len() * self.eps_min.len() * self.smoothing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One grid point with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeModelParams {
    pub model: ModelKind,
    pub max_depth: usize,
    pub c_min: u64,
    pub eps_min: f64,
    pub smoothing: f64,
}

impl TreeModelParams {
    pub fn tree(&self) -> Result<TreeParams> {
        TreeParams::new(self.max_depth, self.c_min, self.eps_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: TreeModelParams,
    /// Mean over folds of the mean held-out next-step log-likelihood (nats).
    pub score: f64,
    /// Node count and depth of the tree grown on the whole corpus.
    pub nodes: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub best: GridRow,
    /// Every grid point, in grid order.
    pub rows: Vec<GridRow>,
}

impl TuningResult {
    /// `model,max_depth,c_min,eps_min,<smoothing>,score,nodes,depth`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let name = self.best.params.model_smoothing_name();
        writeln!(w, "model,max_depth,c_min,eps_min,{name},score,nodes,depth")?;
        for r in &self.rows {
            let p = &r.params;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.model.as_str(),
                p.max_depth,
                p.c_min,
                p.eps_min,
                p.smoothing,
                r.score,
                r.nodes,
                r.depth
            )?;
        }
        Ok(())
    }
}

impl TreeModelParams {
    fn model_smoothing_name(&self) -> &'static str {
        self.model.smoothing_name()
    }
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Vmm => "vmm",
            ModelKind::Dvmm => "dvmm",
        }
    }
}

/// Held-out scores of every smoothing value on one tree.
fn score_tree(kind: ModelKind, tree: &ContextTree, held_out: &Corpus, smoothing: &[f64]) -> Result<Vec<f64>> {
    smoothing
        .iter()
        .map(|&s| {
            let (total, n) = match kind {
                ModelKind::Vmm => {
                    let m = Vmm::<f64>::smooth(tree.clone(), s)?;
                    sum_loglik(&m, held_out)
                }
                ModelKind::Dvmm => {
                    let m = DirichletVmm::<f64>::from_tree(tree.clone(), s)?;
                    sum_loglik(&m, held_out)
                }
            };
            if n == 0 {
                return Err(Error::NoWindows("held-out sequence has a single step".into()));
            }
            Ok(total / n as f64)
        })
        .collect()
}

fn sum_loglik<M: crate::model::NextSymbolModel<f64>>(m: &M, c: &Corpus) -> (f64, usize) {
    c.sequences.iter().fold((0.0, 0), |(t, n), s| {
        let (a, b) = next_step_loglik(m, s);
        (t + a, n + b)
    })
}

/// Per-fold scores for one growth setting and several smoothing values.
fn loo_scores(kind: ModelKind, corpus: &Corpus, tree: TreeParams, smoothing: &[f64]) -> Result<Vec<f64>> {
    let n = corpus.sequences.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "leave-one-out needs at least 2 sequences, got {n}"
        )));
    }
    let folds = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = ContextTree::grow(&corpus.without(i), tree)?;
            score_tree(kind, &t, &corpus.select(&[i]), smoothing)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..smoothing.len())
        .map(|k| folds.iter().map(|f| f[k]).sum::<f64>() / n as f64)
        .collect())
}

/// Mean held-out next-step log-likelihood over leave-one-out folds.
pub fn loo_loglik(corpus: &Corpus, params: &TreeModelParams) -> Result<f64> {
    let s = params.smoothing;
    let valid = match params.model {
        ModelKind::Vmm => s.is_finite() && s >= 0.0,
        ModelKind::Dvmm => s.is_finite() && s > 0.0,
    };
    if !valid {
        return Err(Error::InvalidParameter(format!(
            "{} = {s} is out of range",
            params.model.smoothing_name()
        )));
    }
    Ok(loo_scores(params.model, corpus, params.tree()?, &[s])?[0])
}

/// Scores every grid point. The best point has the highest score; ties go
/// to the smaller full-corpus tree, then to the smallest
/// `(c_min, eps_min, smoothing)`.
pub fn grid_search(kind: ModelKind, corpus: &Corpus, grid: &GridSpec) -> Result<TuningResult> {
    grid.validate(kind)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &c in &grid.c_min {
        for &e in &grid.eps_min {
            let tp = TreeParams::new(grid.max_depth, c, e)?;
            let full = ContextTree::grow(corpus, tp)?;
            let scores = loo_scores(kind, corpus, tp, &grid.smoothing)?;
            for (&s, score) in grid.smoothing.iter().zip(scores) {
                rows.push(GridRow {
                    params: TreeModelParams {
                        model: kind,
                        max_depth: grid.max_depth,
                        c_min: c,
                        eps_min: e,
                        smoothing: s,
                    },
                    score,
                    nodes: full.len(),
                    depth: full.depth(),
                });
            }
        }
    }
    let best = rows
        .iter()
        .min_by(|a, b| rank(a, b))
        .cloned()
        .expect("grid is nonempty");
    Ok(TuningResult { best, rows })
}

fn rank(a: &GridRow, b: &GridRow) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.nodes.cmp(&b.nodes))
        .then(a.params.c_min.cmp(&b.params.c_min))
        .then(a.params.eps_min.total_cmp(&b.params.eps_min))
        .then(a.params.smoothing.total_cmp(&b.params.smoothing))
}
