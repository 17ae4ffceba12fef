//! Exact samplers and statistical distinguishers for linear-optical sampling
//! distributions.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: complex matrices, Haar-random column-orthonormal matrices,
//!   Ryser permanents, determinants.
//! * [`outcomes`]: photon-count outcomes, the full and collision-free spaces,
//!   ranking and enumeration.
//! * [`samplers`]: exact boson, fermion, uniform, classical mockup, and lossy
//!   samplers.
//! * [`estimators`]: the `P`, `R*`, and `Q` statistics, the row-norm
//!   distinguisher, and the permanent-product verifier.
//! * [`stats`]: total variation, Kolmogorov-Smirnov distances, log-chi-square
//!   cumulants, and reference laws.
//! * [`experiments`]: seeded, reproducible experiment runners with JSON/CSV
//!   reports.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod outcomes;
pub mod rng;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use outcomes::{Outcome, OutcomeSpace, SpaceKind};
pub use rng::RngStream;
pub use samplers::{ProbabilityTable, SampleBatch, SamplerKind};
