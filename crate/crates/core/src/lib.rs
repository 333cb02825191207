//! Postselected communication capacities of finite-dimensional quantum channels.
//!
//! The crate evaluates the projective mutual information of a channel with
//! sandwiching SDP certificates, turns it into one-shot and asymptotic capacity
//! bounds, and builds the coding schemes (teleportation-based and nonsignalling)
//! that achieve them as explicit, exactly composed supermaps.
//!
//! Choi operators are stored as states (trace one) with the input reference
//! factor first.

pub mod capacities;
pub mod channels;
pub mod divergences;
pub mod error;
pub mod hermkernel;
pub mod projective;
pub mod protocols;
pub mod random;
pub mod sdp;

pub use channels::{Channel, Subchannel};
pub use divergences::Bits;
pub use error::{Error, Result};
pub use hermkernel::{ComplexMatrix, C64};
