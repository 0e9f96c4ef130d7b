//! Two-class single-server retrial queue with constant retrial rates.
//!
//! Primary customers of class `k` arrive at rate `lambda_k`. A customer
//! finding the server busy joins orbit `k` (or leaves, with balking); each
//! non-empty orbit sends its head-of-line customer back at rate `alpha_k`.
//!
//! * [`params`], [`service`]: model inputs and service-time distributions.
//! * [`drift`], [`classify`]: mean increments of the departure-epoch chain
//!   and the stability decisions built on them.
//! * [`simulate`]: discrete-event simulation and regenerative estimates.
//! * [`oracle`]: truncated Markov-chain solvers and Monte Carlo checks used
//!   to validate the analytic side.
//!
//! The analytic modules are generic over [`Scalar`]; the aliases below fix
//! the common instantiations.

pub mod classify;
pub mod config;
pub mod drift;
pub mod oracle;
pub mod params;
mod quadrature;
pub mod scalar;
pub mod service;
pub mod simulate;
pub mod stats;

pub use classify::{verdict, OrbitStatus, Outcome, Region, StabilityVerdict};
pub use drift::{auxiliary_probs, drifts, DriftMatrix, Zone};
pub use params::{LoadSummary, SystemParams};
pub use quadrature::QuadratureError;
pub use scalar::Scalar;
pub use service::ServiceDist;

pub type Params = SystemParams<f64>;
pub type Params32 = SystemParams<f32>;
pub type ExactParams = SystemParams<num_rational::BigRational>;
pub type Drifts = DriftMatrix<f64>;
pub type ExactDrifts = DriftMatrix<num_rational::BigRational>;
pub type Loads = LoadSummary<f64>;
pub type ExactLoads = LoadSummary<num_rational::BigRational>;
