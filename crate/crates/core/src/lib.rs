//! Numerical laboratory for entropy production by quantum collapse.
//!
//! * [`state`]: density matrices, unitary (entropy-conserving) evolution,
//!   von Neumann entropy and purity.
//! * [`measurement`]: the measurement transition and Born-rule sampling.
//! * [`master`]: classical master equations, relaxation and H-theorem
//!   diagnostics.
//! * [`gas`]: an event-driven gas whose emitter/absorber transactions carry
//!   the randomness that the master equation assumes.
//! * [`fock`]: occupation-number bookkeeping for creation and annihilation.

pub mod error;
pub mod fock;
pub mod gas;
pub mod linalg;
pub mod master;
pub mod measurement;
pub mod probability;
pub mod rng;
pub mod sampling;
pub mod state;

pub use error::{Error, Result};
pub use probability::{shannon_entropy, ProbabilityVector};
pub use rng::SimRng;

/// Largest Hilbert-space dimension accepted by the quantum modules.
pub const MAX_DIM: usize = 64;
