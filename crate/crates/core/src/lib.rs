//! Exact inference in discrete Bayesian networks with the junction tree
//! algorithm.
//!
//! Networks are compiled offline (moralize, triangulate, build the clique
//! tree) and every message's index arithmetic is precomputed into mapping
//! tables, so a message reduces to independent gather and scatter loops over
//! separator entries. Those loops run either sequentially or split across a
//! worker pool; both engines produce bit-identical potentials.
//!
//! ```
//! use jtprop::compile::{compile, CompileOptions};
//! use jtprop::model::{fixtures, Evidence};
//! use jtprop::propagate::{Engine, PropagationState};
//!
//! let net = fixtures::diamond();
//! let tree = compile(&net, CompileOptions::default()).unwrap();
//! let mut state = PropagationState::initialize(&tree, &net, Engine::Sequential).unwrap();
//! let mut evidence = Evidence::new();
//! evidence.observe(&net, 3, 1).unwrap();
//! state.apply_evidence(&evidence).unwrap();
//! state.belief_propagation().unwrap();
//! let a = state.query_marginal(0, true).unwrap();
//! assert!((a.sum() - 1.0).abs() < 1e-12);
//! ```

pub mod cli;
pub mod compile;
pub mod error;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod perfmodel;
pub mod potential;
pub mod propagate;
pub mod synth;

pub use error::{Error, Result};
