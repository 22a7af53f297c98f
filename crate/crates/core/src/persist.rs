//! JSON model files.
//!
//! Tree models store the grown tree (node parent, symbol and counts) plus the
//! smoothing constant; the conditionals are recomputed on load, which
//! reproduces them bit for bit. TC-RBMs store their dimensions and the
//! weight tensor in `alphabet × hidden × filter` order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::corpus::{Corpus, Symbol, SymbolSequence};
use crate::dirichlet::DirichletVmm;
use crate::error::{Error, Result};
use crate::eval::{PathPredictor, Predictor, RbmPredictor};
use crate::model::NextSymbolModel;
use crate::rng;
use crate::scalar::Real;
use crate::tcrbm::{PredictionProtocol, TcRbm};
use crate::tree::{ContextTree, TreeParams};
use crate::vmm::Vmm;

pub const MODEL_FORMAT: &str = "melodikit-model";
pub const SCHEMA_VERSION: u32 = 1;

/// Any trained model.
#[derive(Debug, Clone)]
pub enum AnyModel<F> {
    Vmm(Vmm<F>),
    Dirichlet(DirichletVmm<F>),
    TcRbm(TcRbm<F>),
}

impl<F: Real> AnyModel<F> {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Vmm(_) => "vmm",
            AnyModel::Dirichlet(_) => "dvmm",
            AnyModel::TcRbm(_) => "tcrbm",
        }
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            AnyModel::Vmm(m) => m.tree().alphabet_size(),
            AnyModel::Dirichlet(m) => m.tree().alphabet_size(),
            AnyModel::TcRbm(m) => m.alphabet(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let body = match self {
            AnyModel::Vmm(m) => Body::Vmm {
                gamma: m.gamma(),
                tree: TreeRecord::from_tree(m.tree()),
            },
            AnyModel::Dirichlet(m) => Body::Dvmm {
                alpha: m.alpha(),
                tree: TreeRecord::from_tree(m.tree()),
            },
            AnyModel::TcRbm(m) => Body::Tcrbm {
                hidden: m.hidden(),
                filter: m.filter(),
                weights: m.weights_ijk(),
                hidden_bias: m.hidden_bias().to_vec(),
                visible_bias: m.visible_bias().to_vec(),
            },
        };
        let file = ModelRecord {
            format: MODEL_FORMAT.to_string(),
            schema_version: SCHEMA_VERSION,
            alphabet_size: self.alphabet_size(),
            body,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelRecord<F> = serde_json::from_str(s)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("not a model file (format {:?})", file.format)));
        }
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported schema version {}",
                file.schema_version
            )));
        }
        let a = file.alphabet_size;
        Ok(match file.body {
            Body::Vmm { gamma, tree } => AnyModel::Vmm(Vmm::smooth(tree.into_tree(a)?, gamma)?),
            Body::Dvmm { alpha, tree } => {
                AnyModel::Dirichlet(DirichletVmm::from_tree(tree.into_tree(a)?, alpha)?)
            }
            Body::Tcrbm {
                hidden,
                filter,
                weights,
                hidden_bias,
                visible_bias,
            } => AnyModel::TcRbm(TcRbm::from_parts(
                a,
                hidden,
                filter,
                weights,
                hidden_bias,
                visible_bias,
            )?),
        })
    }

    /// One sample per requested length; sample `n` draws from seed
    /// substream `n`. `burn_in` only applies to the TC-RBM.
    pub fn sample_corpus(&self, lengths: &[usize], burn_in: usize, seed: u64) -> Result<Corpus> {
        let sequences = lengths
            .par_iter()
            .enumerate()
            .map(|(n, &len)| {
                let mut r = rng::substream(seed, n as u64);
                let s = match self {
                    AnyModel::Vmm(m) => m.sample_sequence_with(len, &mut r),
                    AnyModel::Dirichlet(m) => m.sample_sequence_with(len, &mut r),
                    AnyModel::TcRbm(m) => m.sample_free_with(len, burn_in, &mut r),
                }?;
                Ok(s.with_id(format!("sample-{n:04}")))
            })
            .collect::<Result<Vec<SymbolSequence>>>()?;
        Corpus::new(self.alphabet_size(), sequences)
    }

    /// Multi-step forecaster: sampled paths for the tree models, clamped
    /// Gibbs chains for the TC-RBM.
    pub fn predictor(&self, n_paths: usize, protocol: PredictionProtocol) -> Box<dyn Predictor<F> + '_> {
        match self {
            AnyModel::Vmm(m) => Box::new(PathPredictor { model: m, n_paths }),
            AnyModel::Dirichlet(m) => Box::new(PathPredictor { model: m, n_paths }),
            AnyModel::TcRbm(m) => Box::new(RbmPredictor { model: m, protocol }),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRecord<F> {
    format: String,
    schema_version: u32,
    alphabet_size: usize,
    #[serde(flatten)]
    body: Body<F>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Body<F> {
    Vmm {
        gamma: F,
        tree: TreeRecord,
    },
    Dvmm {
        alpha: F,
        tree: TreeRecord,
    },
    Tcrbm {
        hidden: usize,
        filter: usize,
        weights: Vec<F>,
        hidden_bias: Vec<F>,
        visible_bias: Vec<F>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    params: TreeParams,
    /// `(parent, symbol, counts)`, parents before children; the root has
    /// neither parent nor symbol.
    nodes: Vec<(Option<usize>, Option<u8>, Vec<u64>)>,
}

impl TreeRecord {
    fn from_tree(tree: &ContextTree) -> Self {
        Self {
            params: *tree.params(),
            nodes: tree
                .nodes()
                .iter()
                .map(|n| {
                    (
                        n.parent(),
                        n.context().first().map(|s| s.index() as u8),
                        n.counts().to_vec(),
                    )
                })
                .collect(),
        }
    }

    fn into_tree(self, alphabet: usize) -> Result<ContextTree> {
        self.params
            .validate()
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let parts = self
            .nodes
            .into_iter()
            .map(|(p, s, c)| (p, s.map(Symbol::new), c))
            .collect();
        ContextTree::from_parts(alphabet, self.params, parts)
    }
}
