//! Sparse superposition codes over general memoryless channels.
//!
//! The crate bundles the code construction (position-modulated messages,
//! Gaussian coding matrices, spatially coupled ensembles), the GAMP decoder,
//! and the analysis side: state evolution for the underlying and coupled
//! systems, the potential-function machinery that locates decoding
//! thresholds, and large-alphabet closed forms.
//!
//! Monte-Carlo kernels share frozen sample banks (common random numbers), so
//! the monotonicity and degradation properties of the operators hold as exact
//! numerical predicates and every experiment replays bit-identically from its
//! seed. Data-parallel loops use a fixed chunked reduction order; results do
//! not depend on the thread count or on whether the `parallel` feature is
//! enabled.

pub mod asymptotic;
pub mod channel;
pub mod code;
pub mod error;
pub mod gamp;
pub mod par;
pub mod potential;
pub mod quad;
pub mod se;
pub mod special;

pub use channel::{ChannelKind, ChannelSpec, PiMap};
pub use code::{CodeParams, CodingMatrix, CouplingSpec, DesignFunction, Message};
pub use error::{Error, Result};
pub use gamp::{DecodeTrace, GampConfig, GampInit};
pub use se::{Profile, SampleBank, SeConfig, ThresholdResult};
