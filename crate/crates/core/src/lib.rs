//! Exact simulator and analysis lab for distributed averaging over networks
//! with uniformly quantized communication.
//!
//! Every state, weight, and threshold is an arbitrary-precision rational, so
//! trajectories, cycle detection, and invariant monitors are exact: there is
//! no floating-point rounding anywhere in the dynamics.
//!
//! The crate is organized as:
//! - [`numeric`]: rational helpers and the grid constants (B, gamma, delta, alpha)
//! - [`graph`]: connected undirected graphs and random generators (ER, RGG)
//! - [`weights`]: Metropolis-style weight matrices and their validation
//! - [`quantizer`]: truncation / ceiling / rounding / probabilistic quantizers
//! - [`dynamics`]: the quantized evolution engine, cycle detection, verdicts
//! - [`analysis`]: Lyapunov function, set classification, and runtime monitors
//! - [`experiments`]: seeded batch harness with CSV/JSON artifacts

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod numeric;
pub mod quantizer;
pub mod weights;

pub use error::Error;
pub use numeric::Rational;

pub type Result<T> = std::result::Result<T, Error>;
