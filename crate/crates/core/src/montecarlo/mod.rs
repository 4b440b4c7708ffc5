//! Monte Carlo projection of pool cash flows.
//!
//! Each replicate draws a termination month for every contract by inverting
//! its remaining-lifetime CDF, lays out the monthly payments and the terminal
//! residual, and sums across contracts. Replicates yield per-month percentile
//! bands ([`simulate_trust`]) or a distribution of pool present values
//! ([`simulate_apv_distribution`]).
//!
//! Every `(replicate, contract)` pair has its own generator derived from the
//! root seed, so results are bit-identical however the replicates are
//! scheduled across threads.

mod rng;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use rng::{substream, HAZARD_LANE};

use crate::cashflow::{pv_realized, DepreciationCurve, LeaseContract, Portfolio, TailDirection};
use crate::error::{Error, Result};
use crate::stats;
use crate::survival::{asymptotic_covariance, HazardCovariance, HazardModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Months projected in the band matrix.
    pub horizon: u32,
    /// Redraw the hazard vector from its asymptotic normal law each replicate.
    pub random_hazard: bool,
    /// Band percentiles, in percent.
    pub percentiles: Vec<f64>,
    /// Tail level for the empirical CTE.
    pub alpha: f64,
    pub tail: TailDirection,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            replicates: 1_000,
            seed: 0,
            horizon: 24,
            random_hazard: false,
            percentiles: vec![2.5, 97.5],
            alpha: 0.05,
            tail: TailDirection::Upper,
        }
    }
}

impl SimulationConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::param("replicates must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon must be at least 1 month"));
        }
        if let Some(p) = self
            .percentiles
            .iter()
            .find(|p| !(0.0..=100.0).contains(*p))
        {
            return Err(Error::param(format!("percentile {p} outside [0, 100]")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Inverse-CDF draw of the months until termination for a contract active
/// at `age`: the smallest `k` with `Pr(K <= k) >= u`.
pub fn sample_termination(model: &HazardModel, age: u32, u: f64) -> Result<u32> {
    let cdf = model.remaining_lifetime_pmf(age)?.cdf();
    Ok(invert_cdf(&cdf, u))
}

fn invert_cdf(cdf: &[f64], u: f64) -> u32 {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1) as u32 + 1
}

/// Redraws each observed hazard independently from
/// `Normal(lambda_hat(x), diag(x) / n)`, clamped to `[0, 1]`.
pub fn sample_hazard_vector<R: Rng + ?Sized>(
    model: &HazardModel,
    covariance: &HazardCovariance,
    rng: &mut R,
) -> Result<HazardModel> {
    let se = covariance.standard_errors()?;
    let len = model.window().len();
    if se.len() != len {
        return Err(Error::Hazard(
            "covariance does not match the model support".into(),
        ));
    }
    let drawn: Vec<f64> = model.hazards()[..len]
        .iter()
        .zip(&se)
        .map(|(&l, &s)| {
            let z: f64 = rng.sample(StandardNormal);
            (l + s * z).clamp(0.0, 1.0)
        })
        .collect();
    Ok(model.with_observed_hazards(&drawn))
}

/// Per-contract quantities that do not change between replicates.
struct ContractPlan {
    payment: f64,
    /// `Z(a + k - 1) * V` for `k = 1..=max_k`.
    residuals: Vec<f64>,
    age: u32,
}

fn plan(
    portfolio: &Portfolio,
    model: &HazardModel,
    curve: &DepreciationCurve,
) -> Result<Vec<ContractPlan>> {
    portfolio
        .contracts()
        .iter()
        .map(|c| {
            let build = || -> Result<ContractPlan> {
                let max_k = model.remaining_lifetime_pmf(c.age)?.max_months();
                let residuals = (0..max_k)
                    .map(|i| Ok(curve.get(c.age + i)? * c.vehicle_value))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ContractPlan {
                    payment: c.monthly_payment,
                    residuals,
                    age: c.age,
                })
            };
            build().map_err(|e| Error::Contract {
                id: c.id.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Hazard-dependent sampling tables for one replicate.
struct Samplers {
    cdfs: Vec<Vec<f64>>,
}

impl Samplers {
    fn new(model: &HazardModel, plans: &[ContractPlan]) -> Result<Self> {
        let cdfs = plans
            .iter()
            .map(|p| model.remaining_lifetime_pmf(p.age).map(|pmf| pmf.cdf()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cdfs })
    }
}

/// Draws the termination month of every contract in one replicate.
struct Engine<'a> {
    model: &'a HazardModel,
    plans: Vec<ContractPlan>,
    fixed: Samplers,
    covariance: Option<HazardCovariance>,
    seed: u64,
}

impl<'a> Engine<'a> {
    fn new(
        portfolio: &Portfolio,
        model: &'a HazardModel,
        curve: &DepreciationCurve,
        config: &SimulationConfig,
    ) -> Result<Self> {
        config.validate()?;
        let plans = plan(portfolio, model, curve)?;
        let fixed = Samplers::new(model, &plans)?;
        let covariance = if config.random_hazard {
            let cov = asymptotic_covariance(model)?;
            cov.standard_errors()?;
            Some(cov)
        } else {
            None
        };
        Ok(Self {
            model,
            plans,
            fixed,
            covariance,
            seed: config.seed,
        })
    }

    fn draw(&self, replicate: usize) -> Vec<u32> {
        let redrawn;
        let samplers = match &self.covariance {
            Some(cov) => {
                let mut rng = substream(self.seed, replicate as u64, HAZARD_LANE);
                // standard errors and support were checked in `new`
                let model =
                    sample_hazard_vector(self.model, cov, &mut rng).expect("validated covariance");
                redrawn = Samplers::new(&model, &self.plans).expect("validated ages");
                &redrawn
            }
            None => &self.fixed,
        };
        samplers
            .cdfs
            .iter()
            .enumerate()
            .map(|(i, cdf)| {
                let u: f64 = substream(self.seed, replicate as u64, i as u64).random();
                invert_cdf(cdf, u)
            })
            .collect()
    }
}

/// Mean and percentile rows of simulated monthly pool cash flows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    pub months: Vec<u32>,
    pub mean: Vec<f64>,
    /// `(percentile, values by month)` in the configured order.
    pub bands: Vec<(f64, Vec<f64>)>,
    pub replicates: usize,
}

impl BandMatrix {
    pub fn band(&self, percentile: f64) -> Option<&[f64]> {
        self.bands
            .iter()
            .find(|(p, _)| *p == percentile)
            .map(|(_, v)| v.as_slice())
    }

    /// Average over months of `upper - lower`.
    pub fn mean_width(&self, lower: f64, upper: f64) -> Option<f64> {
        let (lo, hi) = (self.band(lower)?, self.band(upper)?);
        Some(stats::mean(
            &hi.iter().zip(lo).map(|(h, l)| h - l).collect::<Vec<_>>(),
        ))
    }

    /// CSV with header `month,mean,p<pct>...`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["month".to_string(), "mean".to_string()];
        header.extend(self.bands.iter().map(|(p, _)| format!("p{p}")));
        w.write_record(&header)?;
        for (i, month) in self.months.iter().enumerate() {
            let mut row = vec![month.to_string(), self.mean[i].to_string()];
            row.extend(self.bands.iter().map(|(_, v)| v[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulated monthly pool cash flows summarised as mean and percentile bands.
///
/// Month `j` (1-based, after valuation) of a contract that terminates after
/// `k` months carries `R` for `j < k`, `R + Z(a + k - 1) * V` for `j = k`,
/// and nothing afterwards. Months beyond `horizon` are dropped.
pub fn simulate_trust(
    portfolio: &Portfolio,
    model: &HazardModel,
    curve: &DepreciationCurve,
    config: &SimulationConfig,
) -> Result<BandMatrix> {
    let engine = Engine::new(portfolio, model, curve, config)?;
    let horizon = config.horizon as usize;
    let rows: Vec<Vec<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut row = vec![0.0; horizon];
            for (plan, k) in engine.plans.iter().zip(engine.draw(rep)) {
                let k = k as usize;
                for cell in row.iter_mut().take(k.min(horizon)) {
                    *cell += plan.payment;
                }
                if k <= horizon {
                    row[k - 1] += plan.residuals[k - 1];
                }
            }
            row
        })
        .collect();

    let mut mean = Vec::with_capacity(horizon);
    let mut bands: Vec<(f64, Vec<f64>)> = config
        .percentiles
        .iter()
        .map(|&p| (p, Vec::with_capacity(horizon)))
        .collect();
    let mut column = Vec::with_capacity(rows.len());
    for month in 0..horizon {
        column.clear();
        column.extend(rows.iter().map(|r| r[month]));
        mean.push(stats::mean(&column));
        column.sort_by(f64::total_cmp);
        for (p, values) in bands.iter_mut() {
            values.push(stats::percentile_sorted(&column, *p));
        }
    }
    Ok(BandMatrix {
        months: (1..=config.horizon).collect(),
        mean,
        bands,
        replicates: config.replicates,
    })
}

/// Exact expected pool cash flow for months `1..=horizon`:
/// `sum_i R_i Pr(K_i >= j) + Z(a_i + j - 1) V_i Pr(K_i = j)`.
pub fn expected_cash_flows(
    portfolio: &Portfolio,
    model: &HazardModel,
    curve: &DepreciationCurve,
    horizon: u32,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; horizon as usize];
    for c in portfolio.contracts() {
        let pmf = model.remaining_lifetime_pmf(c.age)?;
        let probs = pmf.probs();
        // at_least[j - 1] = Pr(K >= j)
        let mut at_least = vec![0.0; probs.len()];
        let mut acc = 0.0;
        for (slot, p) in at_least.iter_mut().zip(probs).rev() {
            acc += p;
            *slot = acc;
        }
        for (j, cell) in (1..=horizon.min(pmf.max_months())).zip(out.iter_mut()) {
            let i = j as usize - 1;
            *cell += c.monthly_payment * at_least[i]
                + curve.get(c.age + j - 1)? * c.vehicle_value * probs[i];
        }
    }
    Ok(out)
}

/// Simulated present values, one row per replicate and one column per
/// contract in portfolio order.
#[derive(Debug, Clone, PartialEq)]
pub struct PvDraws {
    pub contracts: usize,
    pub values: Vec<f64>,
}

impl PvDraws {
    pub fn replicates(&self) -> usize {
        self.values.len() / self.contracts
    }

    pub fn column(&self, contract: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(contract)
            .step_by(self.contracts)
            .copied()
            .collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.values
            .chunks_exact(self.contracts)
            .map(|r| r.iter().sum())
            .collect()
    }
}

/// Present value of every contract in every replicate, discounted at `rate`.
pub fn simulate_pv_draws(
    portfolio: &Portfolio,
    model: &HazardModel,
    curve: &DepreciationCurve,
    rate: f64,
    config: &SimulationConfig,
) -> Result<PvDraws> {
    let engine = Engine::new(portfolio, model, curve, config)?;
    // PV by termination month, per contract
    let tables = portfolio
        .contracts()
        .iter()
        .zip(&engine.plans)
        .map(|(c, p)| pv_table(c, curve, rate, p.residuals.len() as u32))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            engine
                .draw(rep)
                .into_iter()
                .zip(&tables)
                .map(|(k, t)| t[k as usize - 1])
                .collect()
        })
        .collect();
    Ok(PvDraws {
        contracts: portfolio.len(),
        values: rows.into_iter().flatten().collect(),
    })
}

fn pv_table(
    contract: &LeaseContract,
    curve: &DepreciationCurve,
    rate: f64,
    max_k: u32,
) -> Result<Vec<f64>> {
    (1..=max_k)
        .map(|k| pv_realized(contract, curve, rate, k))
        .collect()
}

/// Empirical summary of simulated pool present values.
#[derive(Debug, Clone, PartialEq)]
pub struct ApvEmpirics {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub cte: f64,
    pub alpha: f64,
    pub tail: TailDirection,
    pub replicates: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApvEmpiricsDocument {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub cte: f64,
    pub alpha: f64,
    pub tail: TailDirection,
    pub replicates: usize,
    pub seed: u64,
}

impl ApvEmpirics {
    pub fn from_values(
        mut values: Vec<f64>,
        alpha: f64,
        tail: TailDirection,
        seed: u64,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("no simulated values"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha must lie in (0, 1)"));
        }
        let mean = stats::mean(&values);
        let sd = stats::std_dev(&values);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let median = stats::percentile_sorted(&sorted, 50.0);
        let cte = empirical_cte(&sorted, alpha, tail);
        values.shrink_to_fit();
        Ok(Self {
            mean,
            median,
            sd,
            cte,
            alpha,
            tail,
            replicates: values.len(),
            seed,
            values,
        })
    }

    pub fn to_document(&self) -> ApvEmpiricsDocument {
        ApvEmpiricsDocument {
            mean: self.mean,
            median: self.median,
            sd: self.sd,
            cte: self.cte,
            alpha: self.alpha,
            tail: self.tail,
            replicates: self.replicates,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

/// Mean of the `ceil(alpha * n)` largest (upper) or smallest (lower) values.
pub fn empirical_cte(sorted: &[f64], alpha: f64, tail: TailDirection) -> f64 {
    let n = sorted.len();
    let count = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    let slice = match tail {
        TailDirection::Upper => &sorted[n - count..],
        TailDirection::Lower => &sorted[..count],
    };
    stats::mean(slice)
}

/// Distribution of the pool present value across replicates.
pub fn simulate_apv_distribution(
    portfolio: &Portfolio,
    model: &HazardModel,
    curve: &DepreciationCurve,
    rate: f64,
    config: &SimulationConfig,
) -> Result<ApvEmpirics> {
    let draws = simulate_pv_draws(portfolio, model, curve, rate, config)?;
    ApvEmpirics::from_values(draws.totals(), config.alpha, config.tail, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::SupportWindow;

    fn geometric() -> HazardModel {
        let w = SupportWindow::new(0, 1, 24, 26).unwrap();
        HazardModel::from_hazards(w, vec![0.2; 24]).unwrap()
    }

    fn curve() -> DepreciationCurve {
        DepreciationCurve::from_fn(0..=24, |j| 1.05f64.powi(-(j as i32))).unwrap()
    }

    fn two_leases(w: SupportWindow) -> Portfolio {
        Portfolio::new(
            vec![
                LeaseContract::new("L1", 100.0, 100_000.0, 6).unwrap(),
                LeaseContract::new("L2", 500.0, 80_000.0, 9).unwrap(),
            ],
            w,
        )
        .unwrap()
    }

    #[test]
    fn inverse_cdf_examples() {
        let m = geometric();
        assert_eq!(sample_termination(&m, 6, 0.5).unwrap(), 4);
        assert_eq!(sample_termination(&m, 6, 0.0).unwrap(), 1);
        assert_eq!(sample_termination(&m, 6, 0.2).unwrap(), 1);
        assert_eq!(sample_termination(&m, 6, 1.0).unwrap(), 18);

        let w = SupportWindow::new(0, 1, 5, 7).unwrap();
        let certain = HazardModel::from_hazards(w, vec![0.1, 0.1, 1.0, 0.5, 0.5]).unwrap();
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(sample_termination(&certain, 2, u).unwrap(), 1);
        }
    }

    #[test]
    fn degenerate_hazards_give_zero_width_bands() {
        let w = SupportWindow::new(0, 1, 24, 26).unwrap();
        let mut lambda = vec![0.0; 24];
        lambda[9] = 1.0; // age 10
        let m = HazardModel::from_hazards(w, lambda).unwrap();
        let p = two_leases(w);
        let cfg = SimulationConfig {
            replicates: 50,
            horizon: 6,
            ..Default::default()
        };
        let b = simulate_trust(&p, &m, &curve(), &cfg).unwrap();
        let exact = expected_cash_flows(&p, &m, &curve(), 6).unwrap();
        assert_eq!(b.band(2.5).unwrap(), b.band(97.5).unwrap());
        for (mean, exact) in b.mean.iter().zip(&exact) {
            assert!((mean - exact).abs() < 1e-9);
        }
        // L1 ends at month 4, L2 at month 1
        assert!((exact[0] - (600.0 + 80_000.0 * curve().get(9).unwrap())).abs() < 1e-9);
        assert!((exact[3] - (100.0 + 100_000.0 * curve().get(9).unwrap())).abs() < 1e-9);
        assert_eq!(exact[4], 0.0);
    }

    #[test]
    fn reproducible_per_seed() {
        let m = geometric();
        let p = two_leases(*m.window());
        let cfg = SimulationConfig {
            replicates: 300,
            seed: 99,
            horizon: 18,
            ..Default::default()
        };
        let a = simulate_trust(&p, &m, &curve(), &cfg).unwrap();
        let b = simulate_trust(&p, &m, &curve(), &cfg).unwrap();
        assert_eq!(a, b);
        let other = simulate_trust(
            &p,
            &m,
            &curve(),
            &SimulationConfig {
                seed: 100,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(a, other);
        let e1 = simulate_apv_distribution(&p, &m, &curve(), 0.03, &cfg).unwrap();
        let e2 = simulate_apv_distribution(&p, &m, &curve(), 0.03, &cfg).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn single_replicate_summary() {
        let m = geometric();
        let p = two_leases(*m.window());
        let cfg = SimulationConfig {
            replicates: 1,
            ..Default::default()
        };
        let e = simulate_apv_distribution(&p, &m, &curve(), 0.03, &cfg).unwrap();
        assert_eq!(e.mean, e.median);
        assert_eq!(e.sd, 0.0);
        assert_eq!(e.cte, e.mean);
    }

    #[test]
    fn empirical_cte_tails() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_cte(&xs, 0.05, TailDirection::Upper), 98.0);
        assert_eq!(empirical_cte(&xs, 0.05, TailDirection::Lower), 3.0);
    }

    #[test]
    fn csv_header() {
        let m = geometric();
        let p = two_leases(*m.window());
        let cfg = SimulationConfig {
            replicates: 10,
            horizon: 3,
            ..Default::default()
        };
        let mut buf = Vec::new();
        simulate_trust(&p, &m, &curve(), &cfg)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("month,mean,p2.5,p97.5\n1,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn hazard_draws_collapse_without_variance() {
        use crate::survival::{estimate_hazard, ObservationTriple};
        let w = SupportWindow::new(0, 2, 3, 6).unwrap();
        let mut obs = vec![ObservationTriple::terminated(1, 1); 3];
        obs.extend(vec![ObservationTriple::terminated(1, 2); 3]);
        obs.extend(vec![ObservationTriple::terminated(2, 3); 3]);
        let m = estimate_hazard(&obs, &w).unwrap();
        // lambda = (1/2, 1/2, 1); age 3 has zero variance
        let cov = asymptotic_covariance(&m).unwrap();
        let mut rng = substream(1, 0, 0);
        let drawn = sample_hazard_vector(&m, &cov, &mut rng).unwrap();
        assert_eq!(drawn.hazards()[2], 1.0);
        assert_ne!(drawn.hazards()[0], m.hazards()[0]);
        assert!(drawn.hazards().iter().all(|l| (0.0..=1.0).contains(l)));
    }

    #[test]
    fn random_hazard_requires_defined_variance() {
        use crate::survival::{estimate_hazard, ObservationTriple};
        let w = SupportWindow::new(0, 2, 4, 8).unwrap();
        let obs = vec![ObservationTriple::terminated(1, 2); 4];
        let m = estimate_hazard(&obs, &w).unwrap();
        let p = Portfolio::new(vec![LeaseContract::new("a", 1.0, 1.0, 1).unwrap()], w).unwrap();
        let c = DepreciationCurve::from_fn(0..=4, |_| 0.5).unwrap();
        let cfg = SimulationConfig {
            random_hazard: true,
            ..Default::default()
        };
        assert!(matches!(
            simulate_trust(&p, &m, &c, &cfg),
            Err(Error::UndefinedVariance(_))
        ));
    }
}
