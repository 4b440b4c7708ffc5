//! Lease-level portfolio data: parsing, conversion to estimator inputs, and
//! the empirical depreciation curve.
//!
//! Input is a UTF-8 CSV with header
//! `id,origination_month,scheduled_term,monthly_payment,vehicle_value,termination_month,residual_paid`.
//! Months are calendar months counted from the first origination month (1).
//! `termination_month` is the month the residual was paid into the pool and
//! is left empty for leases still running.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cashflow::{DepreciationCurve, LeaseContract, Portfolio};
use crate::error::{Error, Result};
use crate::survival::{ObservationTriple, SupportWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaseRecord {
    pub id: String,
    pub origination_month: u32,
    pub scheduled_term: u32,
    pub monthly_payment: f64,
    pub vehicle_value: f64,
    pub termination_month: Option<u32>,
    pub residual_paid: Option<f64>,
}

impl LeaseRecord {
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push("empty id".to_string());
        }
        if self.origination_month == 0 {
            out.push("origination_month must be at least 1".to_string());
        }
        if self.scheduled_term == 0 {
            out.push("scheduled_term must be at least 1".to_string());
        }
        if !(self.monthly_payment.is_finite() && self.monthly_payment > 0.0) {
            out.push(format!(
                "monthly_payment {} must be positive",
                self.monthly_payment
            ));
        }
        if !(self.vehicle_value.is_finite() && self.vehicle_value > 0.0) {
            out.push(format!(
                "vehicle_value {} must be positive",
                self.vehicle_value
            ));
        }
        match self.termination_month {
            Some(t) if t < self.origination_month + 1 => out.push(format!(
                "termination_month {t} is not after origination_month {}",
                self.origination_month
            )),
            None if self.residual_paid.is_some() => {
                out.push("residual_paid given for a lease without termination_month".to_string())
            }
            _ => {}
        }
        if let Some(r) = self.residual_paid {
            if !(r.is_finite() && r >= 0.0) {
                out.push(format!("residual_paid {r} must be non-negative"));
            }
        }
        out
    }
}

/// Parses and validates a portfolio CSV. Every problem is reported with its
/// row number (the header is row 1); any problem fails the whole file.
pub fn parse_portfolio(reader: impl Read) -> Result<Vec<LeaseRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.deserialize::<LeaseRecord>().enumerate() {
        let row_no = i + 2;
        match row {
            Ok(rec) => {
                for p in rec.problems() {
                    errors.push(format!("row {row_no}: {p}"));
                }
                if !seen.insert(rec.id.clone()) {
                    errors.push(format!("row {row_no}: duplicate id `{}`", rec.id));
                }
                records.push(rec);
            }
            Err(e) => errors.push(format!("row {row_no}: {e}")),
        }
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(Error::Data(errors))
    }
}

pub fn write_portfolio(records: &[LeaseRecord], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// How a record entered (or did not enter) the estimation and pricing sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordClass {
    /// Termination observed by the valuation date. `capped` marks lifetimes
    /// beyond `omega` that were recorded at `omega`.
    Event {
        y: u32,
        x: u32,
        capped: bool,
    },
    /// Still running at the valuation date, observed up to `age`. `priced`
    /// is false when the lease has already reached `omega`.
    Censored {
        y: u32,
        age: u32,
        priced: bool,
    },
    Excluded {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub observations: Vec<ObservationTriple>,
    pub active: Vec<LeaseContract>,
    pub classes: Vec<(String, RecordClass)>,
    window: SupportWindow,
}

impl Derivation {
    pub fn portfolio(&self) -> Result<Portfolio> {
        Portfolio::new(self.active.clone(), self.window)
    }

    pub fn excluded(&self) -> impl Iterator<Item = (&str, &str)> {
        self.classes.iter().filter_map(|(id, c)| match c {
            RecordClass::Excluded { reason } => Some((id.as_str(), reason.as_str())),
            _ => None,
        })
    }

    pub fn event_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|(_, c)| matches!(c, RecordClass::Event { .. }))
            .count()
    }

    pub fn censored_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|(_, c)| matches!(c, RecordClass::Censored { .. }))
            .count()
    }
}

/// Converts records into observation triples at the window's valuation date
/// `epsilon`, and collects the running leases as priceable contracts.
///
/// With `scheduled_term = Some(t)` only leases of that scheduled term are
/// used; others are classified as excluded.
pub fn derive_observations(
    records: &[LeaseRecord],
    window: &SupportWindow,
    scheduled_term: Option<u32>,
) -> Derivation {
    let eps = window.epsilon();
    let omega = window.omega();
    let mut observations = Vec::new();
    let mut active = Vec::new();
    let mut classes = Vec::with_capacity(records.len());

    for rec in records {
        let class = (|| {
            if let Some(term) = scheduled_term {
                if rec.scheduled_term != term {
                    return RecordClass::Excluded {
                        reason: format!(
                            "scheduled term {} differs from modeled term {term}",
                            rec.scheduled_term
                        ),
                    };
                }
            }
            let Some(y) = window.truncation_time(rec.origination_month) else {
                return RecordClass::Excluded {
                    reason: format!(
                        "origination month {} outside 1..={}",
                        rec.origination_month,
                        window.m()
                    ),
                };
            };
            match rec.termination_month {
                Some(t) if t <= eps => {
                    let raw = t - rec.origination_month;
                    let x = raw.min(omega);
                    if x < y {
                        return RecordClass::Excluded {
                            reason: format!(
                                "terminated at age {x}, before entering the pool at age {y}"
                            ),
                        };
                    }
                    observations.push(ObservationTriple::terminated(y, x));
                    RecordClass::Event {
                        y,
                        x,
                        capped: raw > omega,
                    }
                }
                _ => {
                    let age = eps - rec.origination_month;
                    let priced = age < omega;
                    observations.push(ObservationTriple::censored(y, window));
                    if priced {
                        active.push(LeaseContract {
                            id: rec.id.clone(),
                            monthly_payment: rec.monthly_payment,
                            vehicle_value: rec.vehicle_value,
                            age,
                        });
                    }
                    RecordClass::Censored { y, age, priced }
                }
            }
        })();
        classes.push((rec.id.clone(), class));
    }

    Derivation {
        observations,
        active,
        classes,
        window: *window,
    }
}

/// Average residual ratio for one depreciation age.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawDepreciationPoint {
    /// Age `j` at which `Z(j)` is evaluated: one less than the termination age.
    pub age: u32,
    pub ratio: f64,
    pub count: usize,
    /// Ratio above 1.5, outside the plausible range.
    pub flagged: bool,
}

/// Averages `residual_paid / vehicle_value` over terminated leases, grouped
/// by the age at which the residual is valued (termination age minus one).
pub fn estimate_depreciation(records: &[LeaseRecord]) -> Result<Vec<RawDepreciationPoint>> {
    let mut groups: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for rec in records {
        if let (Some(t), Some(residual)) = (rec.termination_month, rec.residual_paid) {
            let x = t.saturating_sub(rec.origination_month);
            if x == 0 {
                continue;
            }
            let entry = groups.entry(x - 1).or_default();
            entry.0 += residual / rec.vehicle_value;
            entry.1 += 1;
        }
    }
    if groups.is_empty() {
        return Err(Error::param(
            "no terminated lease carries a residual payment",
        ));
    }
    Ok(groups
        .into_iter()
        .map(|(age, (sum, count))| {
            let ratio = sum / count as f64;
            RawDepreciationPoint {
                age,
                ratio,
                count,
                flagged: ratio > 1.5,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMethod {
    LocalQuadratic,
    /// Too few points for a local quadratic; piecewise-linear interpolation.
    LinearFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCurve {
    pub curve: DepreciationCurve,
    pub method: SmoothingMethod,
}

/// Local quadratic regression with tricube weights over the nearest
/// `span` fraction of points, evaluated at every age in `ages` and clamped
/// to `[0, 1]`.
pub fn smooth_depreciation(
    points: &[RawDepreciationPoint],
    span: f64,
    ages: RangeInclusive<u32>,
) -> Result<SmoothedCurve> {
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::param(format!("span must lie in (0, 1], got {span}")));
    }
    if points.is_empty() {
        return Err(Error::param("no depreciation points to smooth"));
    }
    let mut data: Vec<(f64, f64)> = points.iter().map(|p| (p.age as f64, p.ratio)).collect();
    data.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let (method, eval): (SmoothingMethod, Box<dyn Fn(f64) -> Result<f64>>) = if data.len() < 4 {
        (
            SmoothingMethod::LinearFallback,
            Box::new(|x| Ok(interpolate_linear(&data, x))),
        )
    } else {
        (
            SmoothingMethod::LocalQuadratic,
            Box::new(|x| loess_at(&data, span, x)),
        )
    };
    let values = ages
        .map(|j| Ok((j, eval(j as f64)?.clamp(0.0, 1.0))))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(SmoothedCurve {
        curve: DepreciationCurve::new(values)?,
        method,
    })
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn loess_at(data: &[(f64, f64)], span: f64, x0: f64) -> Result<f64> {
    let n = data.len();
    let q = ((span * n as f64).ceil() as usize).clamp(4, n);
    let mut dists: Vec<f64> = data.iter().map(|(x, _)| (x - x0).abs()).collect();
    dists.sort_by(f64::total_cmp);
    // the q-th nearest point sits on the window edge with zero weight; widen
    // to the next distinct distance until three points carry weight
    let mut idx = q - 1;
    let mut h = dists[idx];
    while dists.iter().filter(|d| **d < h).count() < 3 {
        if idx + 1 < n {
            idx += 1;
            h = dists[idx];
        } else {
            h = dists[n - 1] * 1.5 + 1.0;
            break;
        }
    }

    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for (x, y) in data {
        let w = tricube((x - x0).abs() / h);
        if w == 0.0 {
            continue;
        }
        let d = x - x0;
        let row = Vector3::new(1.0, d, d * d);
        xtx += w * row * row.transpose();
        xty += w * y * row;
    }
    let beta = xtx
        .lu()
        .solve(&xty)
        .ok_or_else(|| Error::param(format!("local fit at age {x0} is singular")))?;
    Ok(beta[0])
}

fn interpolate_linear(data: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (data[0], data[data.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let right = data.partition_point(|(xi, _)| *xi < x);
    let (x0, y0) = data[right - 1];
    let (x1, y1) = data[right];
    if x1 == x0 {
        y1
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}
