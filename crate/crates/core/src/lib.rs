//! Supervised spectral hypergraph partitioning.
//!
//! Given a hypergraph, a block count `K`, a balance tolerance `ε` and a hint
//! partition, the pipeline in [`driver`] embeds the vertices with a
//! hint-supervised generalized eigenproblem ([`embed`], [`eigen`],
//! [`operators`]), turns the embedding into a family of spanning trees
//! ([`trees`]), labels each tree edge with the exact hypergraph cut it induces
//! ([`distill`]), partitions the trees ([`treepart`]), refines with FM
//! ([`refine`]) and merges the candidates through cut-overlay clustering and an
//! exact branch-and-bound solve ([`ensemble`]).

pub mod bench;
pub mod distill;
pub mod driver;
pub mod eigen;
pub mod embed;
pub mod ensemble;
pub mod error;
pub mod hgmodel;
pub mod operators;
pub mod refine;
pub mod treepart;
pub mod trees;

pub use error::{Error, Result};
pub use hgmodel::{BalanceBounds, ClusteredHypergraph, Hypergraph, Partition};

/// Independent seed for stream `stream` derived from `seed` (splitmix64).
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
