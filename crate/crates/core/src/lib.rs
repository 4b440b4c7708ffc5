//! Survival estimation for left-truncated, right-censored contract data and
//! valuation of the cash flows that depend on those lifetimes.
//!
//! The usual flow is
//!
//! 1. load lease records and place them on a [`survival::SupportWindow`]
//!    ([`ingest`]),
//! 2. estimate monthly termination hazards ([`survival::estimate_hazard`]),
//! 3. price the running contracts in closed form ([`cashflow::price_trust`])
//!    or by simulation ([`montecarlo`]).
//!
//! [`oracle`] and [`studies`] compute exact targets for known distributions
//! and check the estimator and the pricing code against them.
//!
//! ```
//! use survcash::studies::worked_example;
//! use survcash::cashflow::price_trust;
//!
//! let ex = worked_example();
//! let report = price_trust(&ex.portfolio, &ex.model, &ex.curve, ex.rate).unwrap();
//! assert_eq!(report.to_document().apv_trust, 96_963.42);
//! ```

pub mod cashflow;
pub mod error;
pub mod ingest;
pub mod montecarlo;
pub mod oracle;
pub mod stats;
pub mod studies;
pub mod survival;

pub use error::{Error, Result};

// The guide's code blocks run as doctests of these empty modules.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/window.md")]
    mod window {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/pricing.md")]
    mod pricing {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
