//! Simulation and verification laboratory for jointly exchangeable,
//! dissociated k-dimensional random arrays.
//!
//! The crate generates arrays from a seeded representation X_i =
//! τ((U_{{e⊙i}⁺})_e), computes the conditional-expectation projection
//! calculus (P_e, Q_e, and the level components H_ℓ), and runs desk-scale
//! experiments on the normalized-sum limit theorems: Marcinkiewicz–Zygmund
//! rates for r ∈ (0,2), the iterated-logarithm envelope with its variance
//! constant, and the α-stable sharpness counterexample.
//!
//! Everything is regenerable: a value is a pure function of (master seed,
//! canonical label set), so no array is ever stored and results are
//! identical regardless of evaluation order or parallelism.

pub mod decomp;
pub mod error;
pub mod index;
pub mod limits;
pub mod model;
pub mod source;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
pub use index::{IndexSet, IndexTuple, PatternVector};
pub use model::{ArrayModel, Kernel};
pub use source::UniformSource;
pub use stable::StableParams;
