use super::model::HazardModel;
use crate::error::{Error, Result};

/// Diagonal of the limiting covariance of `sqrt(n) * (lambda_hat - lambda)`.
///
/// The estimated hazards are asymptotically independent, so the
/// off-diagonal entries are zero and only the diagonal is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardCovariance {
    first_age: u32,
    diag: Vec<Option<f64>>,
    n: usize,
}

impl HazardCovariance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first_age(&self) -> u32 {
        self.first_age
    }

    /// `f (C - f) / C^3` per age; `None` where the risk set was empty.
    pub fn diag(&self) -> &[Option<f64>] {
        &self.diag
    }

    /// Sampling variance of `lambda_hat(age)`, i.e. `diag / n`.
    pub fn variance(&self, age: u32) -> Option<f64> {
        let i = age.checked_sub(self.first_age)? as usize;
        self.diag
            .get(i)
            .copied()
            .flatten()
            .map(|d| d / self.n as f64)
    }

    pub fn undefined_ages(&self) -> Vec<u32> {
        self.diag
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_none())
            .map(|(i, _)| self.first_age + i as u32)
            .collect()
    }

    /// Per-age standard errors; fails if any variance is undefined.
    pub fn standard_errors(&self) -> Result<Vec<f64>> {
        let undefined = self.undefined_ages();
        if !undefined.is_empty() {
            return Err(Error::UndefinedVariance(undefined));
        }
        Ok(self
            .diag
            .iter()
            .map(|d| (d.unwrap_or(0.0) / self.n as f64).sqrt())
            .collect())
    }
}

/// Plug-in estimate of the hazard estimator's asymptotic covariance.
///
/// Only the observed ages `delta + 1 ..= xi` are covered; ages added by a
/// tail extension have no sampling distribution.
pub fn asymptotic_covariance(model: &HazardModel) -> Result<HazardCovariance> {
    if model.n() == 0 {
        return Err(Error::Hazard(
            "asymptotic covariance needs an estimated model (n > 0)".into(),
        ));
    }
    let len = model.window().len();
    let diag = model.f_hat()[..len]
        .iter()
        .zip(&model.c_hat()[..len])
        .map(|(&f, &c)| (c > 0.0).then(|| (f * (c - f) / (c * c * c)).max(0.0)))
        .collect();
    Ok(HazardCovariance {
        first_age: model.first_age(),
        diag,
        n: model.n(),
    })
}
