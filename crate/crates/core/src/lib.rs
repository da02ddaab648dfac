//! Detecting contexts that license the adverbial presupposition triggers
//! *too*, *again*, *also*, *still* and *yet*.
//!
//! The crate covers the whole pipeline: mining balanced positive/negative
//! samples from token/POS/head annotated corpora ([`corpus`]), a small
//! reverse-mode autodiff engine ([`tape`]), the attention-pooled BiLSTM and
//! its baselines ([`model`]), and training plus significance testing
//! ([`train`], [`metrics`]).

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod rng;
pub mod synthetic;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use params::{Gradients, ParamStore};
pub use rng::Rng;
pub use tape::{Axis, Tape, Var};
pub use tensor::Tensor;
