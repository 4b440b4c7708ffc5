use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::contract::{DepreciationCurve, LeaseContract, Portfolio};
use crate::error::{Error, Result};
use crate::survival::{HazardModel, RemainingLifetime};

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "monthly rate must be finite and >= 0, got {rate}"
        )))
    }
}

/// Present value of a contract that terminates `k` months after valuation:
/// `k` monthly payments plus the residual `Z(age + k - 1) * V` in month `k`.
pub fn pv_realized(
    contract: &LeaseContract,
    curve: &DepreciationCurve,
    rate: f64,
    k: u32,
) -> Result<f64> {
    check_rate(rate)?;
    if k == 0 {
        return Err(Error::param("remaining months must be at least 1"));
    }
    let residual = curve.get(contract.age + k - 1)? * contract.vehicle_value;
    let v = 1.0 / (1.0 + rate);
    let mut disc = 1.0;
    let mut payments = 0.0;
    for _ in 0..k {
        disc *= v;
        payments += contract.monthly_payment * disc;
    }
    Ok(payments + residual * disc)
}

/// The same present value written as a perpetuity of payments adjusted by
/// the discounted gap between the residual and the perpetuity. Only defined
/// for `rate > 0`.
pub fn pv_perpetuity_form(
    contract: &LeaseContract,
    curve: &DepreciationCurve,
    rate: f64,
    k: u32,
) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::param("perpetuity form needs a positive rate"));
    }
    if k == 0 {
        return Err(Error::param("remaining months must be at least 1"));
    }
    let perpetuity = contract.monthly_payment / rate;
    let residual = curve.get(contract.age + k - 1)? * contract.vehicle_value;
    Ok(perpetuity + (residual - perpetuity) * (1.0 + rate).powi(-(k as i32)))
}

/// Mean and variance of a contract's present value under `model`.
fn pv_moments(
    contract: &LeaseContract,
    model: &HazardModel,
    curve: &DepreciationCurve,
    rate: f64,
) -> Result<(f64, f64)> {
    check_rate(rate)?;
    let pmf = model.remaining_lifetime_pmf(contract.age)?;
    if rate > 0.0 {
        closed_form_moments(contract, &pmf, curve, rate)
    } else {
        direct_moments(contract, &pmf, curve)
    }
}

// PV(k) = R/r + D_k v^k  with  D_k = Z(a+k-1) V - R/r, so
// APV = R/r + sum_k D_k v^k p_k  and  Var = sum_k (D_k v^k - (APV - R/r))^2 p_k.
// The centred second pass is the same quantity as
// 2(R/r) APV - (R/r)^2 + sum_k D_k^2 v^2k p_k - APV^2 without cancelling
// terms of size (R/r)^2.
fn closed_form_moments(
    contract: &LeaseContract,
    pmf: &RemainingLifetime,
    curve: &DepreciationCurve,
    rate: f64,
) -> Result<(f64, f64)> {
    let perpetuity = contract.monthly_payment / rate;
    let v = 1.0 / (1.0 + rate);
    let mut disc = 1.0;
    let terms = (0..pmf.probs().len())
        .map(|i| {
            disc *= v;
            Ok((curve.get(contract.age + i as u32)? * contract.vehicle_value - perpetuity) * disc)
        })
        .collect::<Result<Vec<f64>>>()?;
    let shift: f64 = terms.iter().zip(pmf.probs()).map(|(t, p)| t * p).sum();
    let var = terms
        .iter()
        .zip(pmf.probs())
        .map(|(t, p)| (t - shift) * (t - shift) * p)
        .sum();
    Ok((perpetuity + shift, var))
}

// r = 0: PV(k) = k R + Z(a+k-1) V, moments by direct summation.
fn direct_moments(
    contract: &LeaseContract,
    pmf: &RemainingLifetime,
    curve: &DepreciationCurve,
) -> Result<(f64, f64)> {
    let values = (1..=pmf.max_months())
        .map(|k| {
            Ok(k as f64 * contract.monthly_payment
                + curve.get(contract.age + k - 1)? * contract.vehicle_value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean: f64 = values.iter().zip(pmf.probs()).map(|(v, p)| v * p).sum();
    let var: f64 = values
        .iter()
        .zip(pmf.probs())
        .map(|(v, p)| (v - mean) * (v - mean) * p)
        .sum();
    Ok((mean, var))
}

/// Actuarial present value of one contract.
pub fn apv_contract(
    contract: &LeaseContract,
    model: &HazardModel,
    curve: &DepreciationCurve,
    rate: f64,
) -> Result<f64> {
    pv_moments(contract, model, curve, rate).map(|(m, _)| m)
}

/// Variance of one contract's present value.
pub fn var_pv_contract(
    contract: &LeaseContract,
    model: &HazardModel,
    curve: &DepreciationCurve,
    rate: f64,
) -> Result<f64> {
    pv_moments(contract, model, curve, rate).map(|(_, v)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailDirection {
    #[default]
    Upper,
    Lower,
}

impl fmt::Display for TailDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailDirection::Upper => "upper",
            TailDirection::Lower => "lower",
        })
    }
}

impl FromStr for TailDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(TailDirection::Upper),
            "lower" => Ok(TailDirection::Lower),
            other => Err(Error::param(format!(
                "tail direction must be upper or lower, got `{other}`"
            ))),
        }
    }
}

/// Conditional tail expectation of a normal distribution beyond its
/// `(1 - alpha)` quantile (upper) or below its `alpha` quantile (lower).
pub fn cte_normal(mu: f64, sigma: f64, alpha: f64, tail: TailDirection) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!(
            "tail level alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(mu);
    }
    let std = Normal::standard();
    let z = std.inverse_cdf(1.0 - alpha);
    let shift = sigma * std.pdf(z) / alpha;
    Ok(match tail {
        TailDirection::Upper => mu + shift,
        TailDirection::Lower => mu - shift,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractPrice {
    pub id: String,
    pub apv: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    pub alpha: f64,
    pub tail: TailDirection,
}

/// Closed-form pricing of a pool of independent contracts.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    pub apv_trust: f64,
    pub var_trust: f64,
    pub sd_trust: f64,
    pub per_contract: Vec<ContractPrice>,
    pub rate: f64,
    pub cte: Option<TailEstimate>,
}

impl PriceReport {
    /// Attaches the normal-approximation CTE of the pool value.
    pub fn with_cte(mut self, alpha: f64, tail: TailDirection) -> Result<Self> {
        let value = cte_normal(self.apv_trust, self.sd_trust, alpha, tail)?;
        self.cte = Some(TailEstimate { value, alpha, tail });
        Ok(self)
    }

    pub fn to_document(&self) -> PriceReportDocument {
        PriceReportDocument {
            apv_trust: round_cents(self.apv_trust),
            sd_trust: round_cents(self.sd_trust),
            var_trust: round_cents(self.var_trust),
            cte: self.cte.map(|c| round_cents(c.value)),
            alpha: self.cte.map(|c| c.alpha),
            tail: self.cte.map(|c| c.tail),
            rate: self.rate,
            contracts: self
                .per_contract
                .iter()
                .map(|c| ContractPriceDocument {
                    id: c.id.clone(),
                    apv: round_cents(c.apv),
                    sd: round_cents(c.variance.sqrt()),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractPriceDocument {
    pub id: String,
    pub apv: f64,
    pub sd: f64,
}

/// JSON layout of a [`PriceReport`]; money is rounded to cents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReportDocument {
    pub apv_trust: f64,
    pub sd_trust: f64,
    pub var_trust: f64,
    pub cte: Option<f64>,
    pub alpha: Option<f64>,
    pub tail: Option<TailDirection>,
    pub rate: f64,
    pub contracts: Vec<ContractPriceDocument>,
}

/// Prices every contract and totals them in portfolio order.
pub fn price_trust(
    portfolio: &Portfolio,
    model: &HazardModel,
    curve: &DepreciationCurve,
    rate: f64,
) -> Result<PriceReport> {
    check_rate(rate)?;
    let per_contract = portfolio
        .contracts()
        .iter()
        .map(|c| {
            pv_moments(c, model, curve, rate)
                .map(|(apv, variance)| ContractPrice {
                    id: c.id.clone(),
                    apv,
                    variance,
                })
                .map_err(|e| Error::Contract {
                    id: c.id.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let apv_trust = per_contract.iter().map(|c| c.apv).sum();
    let var_trust: f64 = per_contract.iter().map(|c| c.variance).sum();
    Ok(PriceReport {
        apv_trust,
        var_trust,
        sd_trust: var_trust.sqrt(),
        per_contract,
        rate,
        cte: None,
    })
}
