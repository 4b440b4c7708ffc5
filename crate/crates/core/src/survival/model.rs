use serde::{Deserialize, Serialize};

use super::window::SupportWindow;
use crate::error::{Error, Result};

/// Hazard rates over a contiguous block of ages starting at `delta + 1`,
/// together with the estimator components they were built from.
///
/// The support normally ends at `xi`; after [`HazardModel::extend_tail_geometric`]
/// it runs to `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardModel {
    window: SupportWindow,
    lambda: Vec<f64>,
    f_hat: Vec<f64>,
    c_hat: Vec<f64>,
    n: usize,
    unobserved: Vec<u32>,
    interpolated: Vec<u32>,
    tail_extended_from: Option<u32>,
}

/// Distribution of the months remaining until termination for a contract
/// known to be active at `age`.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainingLifetime {
    age: u32,
    probs: Vec<f64>,
}

impl RemainingLifetime {
    pub fn age(&self) -> u32 {
        self.age
    }

    /// `Pr(K = k)` for `k = 1..=max_months()`, stored at index `k - 1`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: u32) -> f64 {
        match k {
            0 => 0.0,
            k => self.probs.get(k as usize - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn max_months(&self) -> u32 {
        self.probs.len() as u32
    }

    /// Cumulative probabilities, `cdf[k - 1] = Pr(K <= k)`. The final entry
    /// is pinned to 1.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }
}

impl HazardModel {
    pub(crate) fn from_parts(
        window: SupportWindow,
        lambda: Vec<f64>,
        f_hat: Vec<f64>,
        c_hat: Vec<f64>,
        n: usize,
    ) -> Self {
        let first = window.first_age();
        let unobserved = c_hat
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == 0.0)
            .map(|(i, _)| first + i as u32)
            .collect();
        Self {
            window,
            lambda,
            f_hat,
            c_hat,
            n,
            unobserved,
            interpolated: Vec::new(),
            tail_extended_from: None,
        }
    }

    /// Builds a model from known hazards on `delta + 1 ..= xi` (`n = 0`).
    ///
    /// The stored components are the untruncated ones: `c_hat(x) = Pr(X >= x)`
    /// and `f_hat(x) = Pr(X = x)`, so `lambda = f_hat / c_hat` still holds.
    pub fn from_hazards(window: SupportWindow, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != window.len() {
            return Err(Error::Hazard(format!(
                "expected {} hazards for ages {:?}, got {}",
                window.len(),
                window.ages(),
                lambda.len()
            )));
        }
        if let Some(bad) = lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Hazard(format!("hazard {bad} outside [0, 1]")));
        }
        let mut surv = 1.0;
        let mut f_hat = Vec::with_capacity(lambda.len());
        let mut c_hat = Vec::with_capacity(lambda.len());
        for &l in &lambda {
            c_hat.push(surv);
            f_hat.push(l * surv);
            surv *= 1.0 - l;
        }
        Ok(Self::from_parts(window, lambda, f_hat, c_hat, 0))
    }

    pub fn window(&self) -> &SupportWindow {
        &self.window
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first_age(&self) -> u32 {
        self.window.first_age()
    }

    /// Last age carrying a hazard: `xi`, or `omega` after tail extension.
    pub fn last_age(&self) -> u32 {
        self.first_age() + self.lambda.len() as u32 - 1
    }

    pub fn ages(&self) -> std::ops::RangeInclusive<u32> {
        self.first_age()..=self.last_age()
    }

    pub fn hazards(&self) -> &[f64] {
        &self.lambda
    }

    pub fn f_hat(&self) -> &[f64] {
        &self.f_hat
    }

    pub fn c_hat(&self) -> &[f64] {
        &self.c_hat
    }

    pub fn hazard(&self, age: u32) -> Option<f64> {
        self.index(age).map(|i| self.lambda[i])
    }

    /// Ages whose risk set was empty in the sample.
    pub fn unobserved(&self) -> &[u32] {
        &self.unobserved
    }

    /// Ages whose zero hazard was replaced by [`HazardModel::interpolate_zero_hazards`].
    pub fn interpolated(&self) -> &[u32] {
        &self.interpolated
    }

    /// The age whose hazard was carried forward, if the tail was extended.
    pub fn tail_extended_from(&self) -> Option<u32> {
        self.tail_extended_from
    }

    fn index(&self, age: u32) -> Option<usize> {
        let first = self.first_age();
        (age >= first && age <= self.last_age()).then(|| (age - first) as usize)
    }

    /// `Pr(X >= x)` for `delta + 1 <= x <= last_age + 1`.
    pub fn survival_function(&self, x: u32) -> Result<f64> {
        let (lo, hi) = (self.first_age(), self.last_age() + 1);
        if x < lo || x > hi {
            return Err(Error::AgeOutOfRange { age: x, lo, hi });
        }
        Ok(self.lambda[..(x - lo) as usize]
            .iter()
            .map(|l| 1.0 - l)
            .product())
    }

    /// Months until termination for a contract active at `age`
    /// (`delta <= age < last_age`).
    ///
    /// All probability that survives past the last supported age is lumped
    /// on the final month, so the result always sums to one.
    pub fn remaining_lifetime_pmf(&self, age: u32) -> Result<RemainingLifetime> {
        let (lo, hi) = (self.window.delta(), self.last_age());
        if age < lo || age >= hi {
            return Err(Error::AgeOutOfRange {
                age,
                lo,
                hi: hi.saturating_sub(1),
            });
        }
        let months = (hi - age) as usize;
        let start = (age + 1 - self.first_age()) as usize;
        let mut probs = Vec::with_capacity(months);
        let mut surv = 1.0;
        for &l in &self.lambda[start..start + months - 1] {
            probs.push(l * surv);
            surv *= 1.0 - l;
        }
        probs.push(surv);
        Ok(RemainingLifetime { age, probs })
    }

    /// Carries `lambda(xi)` forward to `omega - 1` and sets `lambda(omega) = 1`.
    pub fn extend_tail_geometric(&self) -> Result<Self> {
        let omega = self.window.omega();
        if self.last_age() >= omega {
            return Ok(self.clone());
        }
        let from = self.last_age();
        let rate = self.lambda[self.lambda.len() - 1];
        if rate <= 0.0 {
            return Err(Error::Hazard(format!(
                "cannot extend the tail from a zero hazard at age {from}; interpolate zeros first"
            )));
        }
        let mut out = self.clone();
        out.extend_with(rate);
        Ok(out)
    }

    pub(crate) fn extend_with(&mut self, rate: f64) {
        let from = self.last_age();
        let extra = (self.window.omega() - from) as usize;
        for i in 0..extra {
            self.lambda.push(if i + 1 == extra { 1.0 } else { rate });
            self.f_hat.push(0.0);
            self.c_hat.push(0.0);
        }
        self.tail_extended_from = Some(from);
    }

    /// Replaces zero hazards by linear interpolation between the nearest
    /// nonzero neighbours. Leading and trailing zeros copy the nearest
    /// nonzero value.
    pub fn interpolate_zero_hazards(&self) -> Result<Self> {
        let nonzero: Vec<usize> = (0..self.lambda.len())
            .filter(|&i| self.lambda[i] > 0.0)
            .collect();
        let (Some(&first_nz), Some(&last_nz)) = (nonzero.first(), nonzero.last()) else {
            return Err(Error::Hazard(
                "all hazards are zero; nothing to interpolate from".into(),
            ));
        };
        let mut out = self.clone();
        let first_age = self.first_age();
        for i in 0..self.lambda.len() {
            if self.lambda[i] > 0.0 {
                continue;
            }
            let value = if i < first_nz {
                self.lambda[first_nz]
            } else if i > last_nz {
                self.lambda[last_nz]
            } else {
                let right = nonzero.partition_point(|&j| j < i);
                let (lo, hi) = (nonzero[right - 1], nonzero[right]);
                let w = (i - lo) as f64 / (hi - lo) as f64;
                self.lambda[lo] + w * (self.lambda[hi] - self.lambda[lo])
            };
            out.lambda[i] = value;
            out.f_hat[i] = value * out.c_hat[i];
            out.interpolated.push(first_age + i as u32);
        }
        Ok(out)
    }

    /// Copy of this model with the hazards on the observed ages replaced.
    /// Used by the random-hazard simulation; a tail extension is re-applied
    /// from the new `lambda(xi)`.
    pub(crate) fn with_observed_hazards(&self, observed: &[f64]) -> Self {
        let mut out = self.clone();
        let len = self.window.len();
        out.lambda.truncate(len);
        out.f_hat.truncate(len);
        out.c_hat.truncate(len);
        out.lambda.copy_from_slice(observed);
        for ((f, &l), &c) in out.f_hat.iter_mut().zip(observed).zip(&out.c_hat) {
            *f = l * c;
        }
        if self.tail_extended_from.is_some() {
            out.extend_with(observed[len - 1]);
        }
        out
    }
}

/// On-disk form of a [`HazardModel`]; arrays are aligned with `support`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HazardModelDocument {
    pub delta: u32,
    pub m: u32,
    pub omega: u32,
    pub epsilon: u32,
    pub tau: u32,
    pub xi: u32,
    pub n: usize,
    pub support: Vec<u32>,
    pub lambda: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    #[serde(default)]
    pub unobserved: Vec<u32>,
    #[serde(default)]
    pub interpolated: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_extended_from: Option<u32>,
}

const BOUNDARY_RULE: &str = "nearest-nonzero";

impl From<&HazardModel> for HazardModelDocument {
    fn from(m: &HazardModel) -> Self {
        let w = m.window;
        Self {
            delta: w.delta(),
            m: w.m(),
            omega: w.omega(),
            epsilon: w.epsilon(),
            tau: w.tau(),
            xi: w.xi(),
            n: m.n,
            support: m.ages().collect(),
            lambda: m.lambda.clone(),
            f_hat: m.f_hat.clone(),
            c_hat: m.c_hat.clone(),
            unobserved: m.unobserved.clone(),
            interpolated: m.interpolated.clone(),
            boundary_rule: (!m.interpolated.is_empty()).then(|| BOUNDARY_RULE.to_string()),
            tail_extended_from: m.tail_extended_from,
        }
    }
}

impl TryFrom<HazardModelDocument> for HazardModel {
    type Error = Error;

    fn try_from(d: HazardModelDocument) -> Result<Self> {
        let window = SupportWindow::new(d.delta, d.m, d.omega, d.epsilon)?;
        if window.tau() != d.tau || window.xi() != d.xi {
            return Err(Error::Hazard(format!(
                "stored tau/xi ({}, {}) disagree with the window ({}, {})",
                d.tau,
                d.xi,
                window.tau(),
                window.xi()
            )));
        }
        let len = d.support.len();
        if d.lambda.len() != len || d.f_hat.len() != len || d.c_hat.len() != len {
            return Err(Error::Hazard("arrays are not aligned with support".into()));
        }
        let expected_last = if d.tail_extended_from.is_some() {
            window.omega()
        } else {
            window.xi()
        };
        let expected: Vec<u32> = (window.first_age()..=expected_last).collect();
        if d.support != expected {
            return Err(Error::Hazard(format!(
                "support must be {}..={}",
                window.first_age(),
                expected_last
            )));
        }
        if let Some(bad) = d.lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Hazard(format!("hazard {bad} outside [0, 1]")));
        }
        Ok(HazardModel {
            window,
            lambda: d.lambda,
            f_hat: d.f_hat,
            c_hat: d.c_hat,
            n: d.n,
            unobserved: d.unobserved,
            interpolated: d.interpolated,
            tail_extended_from: d.tail_extended_from,
        })
    }
}

impl HazardModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HazardModelDocument::from(
            self,
        ))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<HazardModelDocument>(s)?.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(p: f64, delta: u32, xi: u32) -> HazardModel {
        // epsilon = m + omega + 1 keeps xi = omega
        let w = SupportWindow::new(delta, 1, xi, xi + 2).unwrap();
        HazardModel::from_hazards(w, vec![p; (xi - delta) as usize]).unwrap()
    }

    fn with_hazards(lambda: Vec<f64>) -> HazardModel {
        let w = SupportWindow::new(0, 1, lambda.len() as u32, lambda.len() as u32 + 2).unwrap();
        HazardModel::from_hazards(w, lambda).unwrap()
    }

    #[test]
    fn survival_examples() {
        let m = with_hazards(vec![0.5, 0.5]);
        assert_eq!(m.survival_function(1).unwrap(), 1.0);
        assert_eq!(m.survival_function(2).unwrap(), 0.5);
        assert_eq!(m.survival_function(3).unwrap(), 0.25);
        assert!(m.survival_function(0).is_err());
        assert!(m.survival_function(4).is_err());

        let g = constant(0.2, 0, 24);
        assert!((g.survival_function(4).unwrap() - 0.512).abs() < 1e-15);
    }

    #[test]
    fn remaining_lifetime_first_lease() {
        let m = constant(0.2, 0, 24);
        let pmf = m.remaining_lifetime_pmf(6).unwrap();
        assert_eq!(pmf.max_months(), 18);
        assert!((pmf.prob(1) - 0.2).abs() < 1e-15);
        assert!((pmf.prob(3) - 0.128).abs() < 1e-15);
        assert!((pmf.prob(18) - 0.8f64.powi(17)).abs() < 1e-15);
        let total: f64 = pmf.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn remaining_lifetime_certain_termination() {
        let m = with_hazards(vec![0.3, 1.0, 0.4, 0.5]);
        let pmf = m.remaining_lifetime_pmf(1).unwrap();
        assert_eq!(pmf.prob(1), 1.0);
        assert_eq!(pmf.prob(2), 0.0);
    }

    #[test]
    fn remaining_lifetime_range() {
        let m = constant(0.2, 3, 24);
        assert!(m.remaining_lifetime_pmf(3).is_ok());
        assert!(m.remaining_lifetime_pmf(2).is_err());
        assert!(m.remaining_lifetime_pmf(24).is_err());
        assert_eq!(m.remaining_lifetime_pmf(23).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn tail_extension() {
        let w = SupportWindow::new(0, 10, 24, 22).unwrap();
        assert_eq!(w.xi(), 21);
        let mut lambda = vec![0.1; 21];
        lambda[20] = 0.3;
        let m = HazardModel::from_hazards(w, lambda).unwrap();
        let e = m.extend_tail_geometric().unwrap();
        assert_eq!(e.last_age(), 24);
        assert_eq!(&e.hazards()[21..], &[0.3, 0.3, 1.0]);
        assert_eq!(e.tail_extended_from(), Some(21));
        for a in 0..24 {
            let s: f64 = e.remaining_lifetime_pmf(a).unwrap().probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // a full-length model is left alone
        let full = constant(0.2, 0, 24);
        assert_eq!(full.extend_tail_geometric().unwrap(), full);
    }

    #[test]
    fn tail_extension_rejects_zero_rate() {
        let w = SupportWindow::new(0, 10, 24, 18).unwrap();
        let mut lambda = vec![0.2; 17];
        lambda[16] = 0.0;
        let m = HazardModel::from_hazards(w, lambda).unwrap();
        assert!(m.extend_tail_geometric().is_err());
    }

    #[test]
    fn interpolation_examples() {
        let m = with_hazards(vec![0.2, 0.0, 0.4]);
        let i = m.interpolate_zero_hazards().unwrap();
        assert!((i.hazards()[1] - 0.3).abs() < 1e-15);
        assert_eq!(i.interpolated(), &[2]);

        let m = with_hazards(vec![0.0, 0.2, 0.4]);
        assert_eq!(
            m.interpolate_zero_hazards().unwrap().hazards(),
            &[0.2, 0.2, 0.4]
        );

        let m = with_hazards(vec![0.1, 0.2, 0.0]);
        assert_eq!(
            m.interpolate_zero_hazards().unwrap().hazards(),
            &[0.1, 0.2, 0.2]
        );

        let m = with_hazards(vec![0.1, 0.0, 0.0, 0.4]);
        let h = m.interpolate_zero_hazards().unwrap();
        assert!((h.hazards()[1] - 0.2).abs() < 1e-15);
        assert!((h.hazards()[2] - 0.3).abs() < 1e-15);

        let m = with_hazards(vec![0.1, 0.2]);
        assert_eq!(m.interpolate_zero_hazards().unwrap(), m);

        assert!(with_hazards(vec![0.0, 0.0])
            .interpolate_zero_hazards()
            .is_err());
    }

    #[test]
    fn json_document_layout() {
        let m = constant(0.2, 3, 24);
        let json = m.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in [
            "delta", "m", "omega", "epsilon", "tau", "xi", "n", "support", "lambda", "f_hat",
            "c_hat",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["support"][0], 4);
        assert_eq!(v["support"].as_array().unwrap().len(), 21);
        assert_eq!(HazardModel::from_json(&json).unwrap(), m);
    }

    #[test]
    fn json_rejects_misaligned_arrays() {
        let m = constant(0.2, 0, 5);
        let mut d = HazardModelDocument::from(&m);
        d.lambda.pop();
        let s = serde_json::to_string(&d).unwrap();
        assert!(HazardModel::from_json(&s).is_err());
    }
}
