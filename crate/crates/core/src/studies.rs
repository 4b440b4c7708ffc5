//! Canned validation studies. Each returns a [`StudyReport`] of named checks
//! with the tolerance each one is held to.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::cashflow::{
    apv_contract, cte_normal, pv_realized, var_pv_contract, DepreciationCurve, LeaseContract,
    Portfolio, TailDirection,
};
use crate::error::Result;
use crate::montecarlo::{
    empirical_cte, simulate_apv_distribution, simulate_pv_draws, substream, SimulationConfig,
};
use crate::oracle::{replication_study, OracleDistribution, ReplicationReport};
use crate::stats;
use crate::survival::{HazardModel, SupportWindow};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Largest accepted `|value - target|`.
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            target,
            tolerance,
            passed: (value - target).abs() <= tolerance,
        }
    }

    pub fn relative(name: &str, value: f64, target: f64, rel: f64) -> Self {
        Self::within(name, value, target, rel * target.abs())
    }

    /// Passes when `0 <= value < bound`.
    pub fn below(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            target: 0.0,
            tolerance: bound,
            passed: (0.0..bound).contains(&value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replication: Option<ReplicationReport>,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Two leases priced under a constant monthly hazard of 0.2 with residual
/// ratio `Z(j) = 1.05^-j`, discounted at 3%.
#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub portfolio: Portfolio,
    pub model: HazardModel,
    pub curve: DepreciationCurve,
    pub rate: f64,
}

pub fn worked_example() -> WorkedExample {
    let window = SupportWindow::new(0, 20, 24, 26).expect("valid window");
    let model = HazardModel::from_hazards(window, vec![0.2; 24]).expect("valid hazards");
    let curve = DepreciationCurve::from_fn(0..=24, |j| 1.05f64.powi(-(j as i32)))
        .expect("ratios in [0, 1]");
    let portfolio = Portfolio::new(
        vec![
            LeaseContract::new("L1", 100.0, 100_000.0, 6).expect("valid lease"),
            LeaseContract::new("L2", 500.0, 80_000.0, 9).expect("valid lease"),
        ],
        window,
    )
    .expect("ages inside the window");
    WorkedExample {
        portfolio,
        model,
        curve,
        rate: 0.03,
    }
}

/// Published closed-form values of the worked example.
pub mod published {
    pub const APV_1: f64 = 56_197.86;
    pub const SD_1: f64 = 14_328.49;
    pub const APV_2: f64 = 40_765.56;
    pub const SD_2: f64 = 8_342.445;
    pub const VAR_SUM: f64 = 274_902_053.0;
    /// Lease 1 terminating after three months.
    pub const PV_SPOT: f64 = 62_223.25;
}

/// Closed-form moments of the worked example against the published values,
/// then `replicates` simulated lifetimes of both leases against the closed
/// forms.
pub fn theorem1_study(replicates: usize, seed: u64) -> Result<StudyReport> {
    use published::*;
    let ex = worked_example();
    let [l1, l2] = ex.portfolio.contracts() else {
        unreachable!("the worked example has two leases")
    };
    let apv1 = apv_contract(l1, &ex.model, &ex.curve, ex.rate)?;
    let var1 = var_pv_contract(l1, &ex.model, &ex.curve, ex.rate)?;
    let apv2 = apv_contract(l2, &ex.model, &ex.curve, ex.rate)?;
    let var2 = var_pv_contract(l2, &ex.model, &ex.curve, ex.rate)?;
    let mut checks = vec![
        Check::within("apv_1", apv1, APV_1, 0.02),
        Check::within("sd_1", var1.sqrt(), SD_1, 0.02),
        Check::within("apv_2", apv2, APV_2, 0.02),
        Check::within("sd_2", var2.sqrt(), SD_2, 0.02),
        Check::within("var_sum", var1 + var2, VAR_SUM, 5.0),
        Check::within(
            "pv_realized_k3",
            pv_realized(l1, &ex.curve, ex.rate, 3)?,
            PV_SPOT,
            0.01,
        ),
    ];

    let config = SimulationConfig {
        replicates,
        seed,
        ..Default::default()
    };
    let draws = simulate_pv_draws(&ex.portfolio, &ex.model, &ex.curve, ex.rate, &config)?;
    let first = draws.column(0);
    let second = draws.column(1);
    let reps = replicates as f64;
    checks.push(Check::within(
        "mc_mean_1",
        stats::mean(&first),
        apv1,
        3.0 * var1.sqrt() / reps.sqrt(),
    ));
    checks.push(Check::relative(
        "mc_sd_1",
        stats::std_dev(&first),
        var1.sqrt(),
        0.01,
    ));
    checks.push(Check::within(
        "mc_mean_2",
        stats::mean(&second),
        apv2,
        3.0 * var2.sqrt() / reps.sqrt(),
    ));
    checks.push(Check::below(
        "mc_abs_correlation",
        stats::correlation(&first, &second).abs(),
        (3.0 / reps.sqrt()).max(0.01),
    ));
    Ok(StudyReport {
        study: "theorem1".into(),
        checks,
        replication: None,
    })
}

/// Sampling distribution of the hazard estimator on the geometric-uniform
/// oracle against its asymptotic normal law.
pub fn asymptotics_study(n: usize, replicates: usize, seed: u64) -> Result<StudyReport> {
    let oracle = OracleDistribution::replication_setup();
    let report = replication_study(&oracle, n, replicates, seed)?;
    let checks = vec![
        Check::below("max_variance_rel_err", report.max_var_rel_err(), 0.10),
        Check::below(
            "max_abs_cross_correlation",
            report.max_abs_cross_corr,
            report.cross_corr_bound,
        ),
        Check::below("max_band_rel_err", report.max_band_rel_err(), 0.15),
        Check::below("max_abs_mean_z", report.max_abs_mean_z(), 3.0),
    ];
    Ok(StudyReport {
        study: "asymptotics".into(),
        checks,
        replication: Some(report),
    })
}

/// `E[Z | Z > z_{1 - alpha}]` for a standard normal, by Simpson's rule.
pub fn normal_tail_expectation(alpha: f64) -> f64 {
    let std = Normal::standard();
    let lo = std.inverse_cdf(1.0 - alpha);
    let hi = lo + 12.0;
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let g = |x: f64| x * std.pdf(x);
    let mut sum = g(lo) + g(hi);
    for i in 1..steps {
        let x = lo + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
    }
    sum * h / 3.0 / alpha
}

/// `count` leases with ages spread over the worked example's window and
/// payments and vehicle values drawn from `seed`.
pub fn synthetic_portfolio(
    count: usize,
    seed: u64,
) -> Result<(Portfolio, HazardModel, DepreciationCurve)> {
    let ex = worked_example();
    let window = *ex.model.window();
    let mut rng = substream(seed, 0, 0);
    let contracts = (0..count)
        .map(|i| {
            let age = rng.random_range(1..=20);
            let payment = rng.random_range(250.0..900.0_f64).round();
            let value = rng.random_range(25_000.0..70_000.0_f64).round();
            LeaseContract::new(format!("S{i:04}"), payment, value, age)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Portfolio::new(contracts, window)?, ex.model, ex.curve))
}

/// Normal-approximation CTE against an integrated tail, against the
/// empirical CTE of standard normal draws, and against the empirical CTE
/// of simulated values of a 100-lease pool.
pub fn cte_study(replicates: usize, seed: u64) -> Result<StudyReport> {
    let alpha = 0.05;
    let formula = cte_normal(0.0, 1.0, alpha, TailDirection::Upper)?;
    let mut checks = vec![Check::within(
        "cte_standard_normal_vs_integral",
        formula,
        normal_tail_expectation(alpha),
        1e-3,
    )];

    let mut rng = substream(seed, 0, 1);
    let mut draws: Vec<f64> = (0..replicates)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    draws.sort_by(f64::total_cmp);
    checks.push(Check::relative(
        "cte_normal_draws",
        empirical_cte(&draws, alpha, TailDirection::Upper),
        formula,
        0.01,
    ));

    let (portfolio, model, curve) = synthetic_portfolio(100, seed)?;
    let rate = 0.01;
    let closed = crate::cashflow::price_trust(&portfolio, &model, &curve, rate)?
        .with_cte(alpha, TailDirection::Upper)?;
    let config = SimulationConfig {
        replicates,
        seed,
        alpha,
        ..Default::default()
    };
    let empirics = simulate_apv_distribution(&portfolio, &model, &curve, rate, &config)?;
    checks.push(Check::relative(
        "cte_portfolio_100",
        closed.cte.map(|c| c.value).unwrap_or(f64::NAN),
        empirics.cte,
        0.01,
    ));
    Ok(StudyReport {
        study: "cte".into(),
        checks,
        replication: None,
    })
}
