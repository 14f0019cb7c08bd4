//! Explicit ReLU networks that select order statistics.

pub mod circuit;
pub mod constructions;
pub mod error;
pub mod hash;
pub mod network;
pub mod oracle;
pub mod params;
pub mod primitives;

pub use error::BuildError;
pub use network::{
    append_output_combiner, compose_parallel, compose_serial, deserialize, evaluate, serialize, stats, Activation,
    AffineLayer, NetworkError, NetworkStats, ReluNetwork, Trace, WeightMatrix,
};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/overview.md")]
mod book_overview {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/networks.md")]
mod book_networks {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/gadgets.md")]
mod book_gadgets {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/hashing.md")]
mod book_hashing {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/constructions.md")]
mod book_constructions {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/oracles.md")]
mod book_oracles {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
