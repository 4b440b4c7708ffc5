//! Discrete-time survival estimation under left truncation and right censoring.
//!
//! A pool of contracts is observed through a [`SupportWindow`]. Each contract
//! contributes one [`ObservationTriple`]; [`estimate_hazard`] turns those into
//! a [`HazardModel`] on the ages `delta + 1 ..= xi`, from which survival
//! probabilities and remaining-lifetime distributions are recovered by
//! products of `1 - lambda`.

mod covariance;
mod estimator;
mod model;
mod window;

pub use covariance::{asymptotic_covariance, HazardCovariance};
pub use estimator::estimate_hazard;
pub use model::{HazardModel, HazardModelDocument, RemainingLifetime};
pub use window::{ObservationTriple, SupportWindow};
