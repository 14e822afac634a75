//! Snapshot compressive imaging (SCI) numerics.
//!
//! The crate covers the whole encode/decode loop of an SCI system:
//!
//! * [`tensor`]: data cubes, frames, vectorization and the `.sct` byte codec.
//! * [`forward`]: video masking/integration and CASSI-style modulation, shear
//!   and integration.
//! * [`operator`]: the sensing map `H = [D_1, ..., D_B]` kept implicit as a
//!   mask set, with O(nB) forward, adjoint, projection and ADMM updates.
//! * [`denoise`]: per-stage denoisers (TV, small feed-forward networks,
//!   subspace oracles, generative decoders).
//! * [`solvers`]: GAP-net, ADMM-net, GAP-TV and PnP-GAP loops plus metrics.
//! * [`theory`]: Monte Carlo checks of the GAP-net convergence bound.
//! * [`verify`]: dense oracles and finite-difference checks.
//!
//! The crate is `no_std` and only needs `alloc`. File IO and the command-line
//! front end live in the `snapsci` crate.

#![no_std]
// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod denoise;
mod error;
pub mod forward;
pub(crate) mod math;
pub mod operator;
pub mod rng;
pub mod solvers;
pub mod synth;
pub mod tensor;
pub mod theory;
pub mod verify;

pub use error::{Result, SciError};
pub use operator::SciOperator;
pub use tensor::{DataCube, Frame2D, MaskSet};
