//! Probabilistic models of monophonic melodies.
//!
//! Three models share one symbolic representation (24 pitches, silence and
//! continuation on an eighth-note grid):
//!
//! * [`Vmm`]: variable length Markov model on a prediction suffix tree with
//!   additive smoothing,
//! * [`DirichletVmm`]: the same tree with hierarchical Dirichlet smoothing,
//! * [`TcRbm`]: a time-convolutional restricted Boltzmann machine.
//!
//! [`eval`] holds the multi-step prediction and KL-divergence protocols and
//! [`tuning`] the leave-one-out grid search.
//!
//! Models are generic over the scalar type; the aliases below fix it.

pub mod corpus;
pub mod dirichlet;
pub mod distribution;
pub mod error;
pub mod eval;
pub mod model;
pub mod persist;
pub mod rng;
pub mod scalar;
pub mod tcrbm;
pub mod tree;
pub mod tuning;
pub mod vmm;

pub use corpus::{Corpus, NoteEvent, Symbol, SymbolSequence, ALPHABET_SIZE};
pub use dirichlet::{DirichletParams, DirichletVmm};
pub use distribution::Categorical;
pub use error::{Error, Result};
pub use model::NextSymbolModel;
pub use persist::AnyModel;
pub use scalar::Real;
pub use tcrbm::{PredictionProtocol, TcRbm, TrainConfig};
pub use tree::{ContextTree, TreeParams};
pub use vmm::{Vmm, VmmParams};

pub type Categorical64 = Categorical<f64>;
pub type Vmm64 = Vmm<f64>;
pub type Vmm32 = Vmm<f32>;
pub type DirichletVmm64 = DirichletVmm<f64>;
pub type DirichletVmm32 = DirichletVmm<f32>;
pub type TcRbm64 = TcRbm<f64>;
pub type TcRbm32 = TcRbm<f32>;
