//! Present values of time-to-event contingent lease cash flows.
//!
//! A lease active at age `a` pays `R` each month until it terminates `K`
//! months later, when the vehicle is sold for `Z(a + K - 1) * V`. With `K`
//! drawn from the fitted remaining-lifetime distribution this gives the
//! contract's actuarial present value and variance in closed form; contracts
//! are independent, so pool totals are plain sums.

mod contract;
mod pricing;

pub use contract::{DepreciationCurve, LeaseContract, Portfolio};
pub use pricing::{
    apv_contract, cte_normal, price_trust, pv_perpetuity_form, pv_realized, var_pv_contract,
    ContractPrice, ContractPriceDocument, PriceReport, PriceReportDocument, TailDirection,
    TailEstimate,
};
