//! Compiles every chapter of the guide so that `cargo test` runs its snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/pools.md")]
pub mod pools {}
#[doc = include_str!("../../../book/src/surrogate.md")]
pub mod surrogate {}
#[doc = include_str!("../../../book/src/scalarization.md")]
pub mod scalarization {}
#[doc = include_str!("../../../book/src/acquisition.md")]
pub mod acquisition {}
#[doc = include_str!("../../../book/src/optimizer.md")]
pub mod optimizer {}
#[doc = include_str!("../../../book/src/importance.md")]
pub mod importance {}
#[doc = include_str!("../../../book/src/outer_loop.md")]
pub mod outer_loop {}
#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}
#[doc = include_str!("../../../book/src/backends.md")]
pub mod backends {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
