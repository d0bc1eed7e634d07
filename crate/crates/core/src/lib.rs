//! Combinatorial Bayesian optimization of in-context demonstration subsets,
//! alternated with regeneration of the example pool.
//!
//! The crate is organized bottom-up:
//!
//! - [`pool`]: examples, pools, subset vectors and the random subset sampler.
//! - [`surrogate`]: Matern-5/2 GP regression over `{0,1}^m`.
//! - [`scalarization`] and [`acquisition`]: Tchebyshev scalarization of
//!   (performance, sparsity) and expected improvement with local search.
//! - [`optimizer`]: the budgeted BO inner loop and a random-search ablation.
//! - [`importance`]: gradient-based example importance and ranked sweeps.
//! - [`baselines`]: retrieval and k-means diversity selection.
//! - [`runtime`]: evaluator, generator and embedder contracts, synthetic
//!   oracles and the external-process wire protocol.
//! - [`orchestrator`]: the optimize/generate outer loop and its variants.
//! - [`ledger`] and [`stats`]: run persistence and small statistical helpers.

pub mod acquisition;
pub mod baselines;
pub mod error;
pub mod importance;
pub mod ledger;
pub mod optimizer;
pub mod orchestrator;
pub mod pool;
pub mod runtime;
pub mod scalarization;
pub mod stats;
pub mod surrogate;
pub(crate) mod util;

pub use error::{Error, Result};
