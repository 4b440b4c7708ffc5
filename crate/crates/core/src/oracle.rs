//! Ground truth for fully specified lifetime and truncation distributions.
//!
//! An [`OracleDistribution`] fixes the pmfs of the lifetime `X` and the
//! truncation time `Y` on finite supports. Everything the estimator targets
//! (conditional hazards, risk-set probabilities, their asymptotic
//! covariances) is computed here by direct enumeration over `(x, y)` pairs,
//! independently of the estimator code. [`generate_dataset`] draws samples
//! from the same law and [`replication_study`] compares the two.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo::substream;
use crate::stats;
use crate::survival::{estimate_hazard, ObservationTriple, SupportWindow};

const PMF_TOLERANCE: f64 = 1e-12;

/// `Pr(X = x) = p (1-p)^(x-1)` for `x < omega`, with the remaining mass
/// `(1-p)^(omega-1)` lumped at `omega`. Index `x - 1` holds `Pr(X = x)`.
pub fn make_truncated_geometric(p: f64, omega: u32) -> Result<Vec<f64>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(format!(
            "geometric p must lie in (0, 1], got {p}"
        )));
    }
    if omega == 0 {
        return Err(Error::param("omega must be at least 1"));
    }
    let q = 1.0 - p;
    let mut pmf: Vec<f64> = (1..omega).map(|x| p * q.powi(x as i32 - 1)).collect();
    pmf.push(q.powi(omega as i32 - 1));
    Ok(pmf)
}

/// Discrete uniform pmf on `count` points.
pub fn uniform_pmf(count: usize) -> Vec<f64> {
    vec![1.0 / count as f64; count]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleDistribution {
    /// `Pr(X = x)` for `x = 1..=omega`.
    pmf_x: Vec<f64>,
    /// `Pr(Y = y)` for `y = delta + 1 ..= m + delta`.
    pmf_y: Vec<f64>,
    window: SupportWindow,
    alpha_accept: f64,
}

impl OracleDistribution {
    pub fn new(pmf_x: Vec<f64>, pmf_y: Vec<f64>, window: SupportWindow) -> Result<Self> {
        if pmf_x.len() != window.omega() as usize {
            return Err(Error::param(format!(
                "pmf of X needs {} entries (ages 1..={}), got {}",
                window.omega(),
                window.omega(),
                pmf_x.len()
            )));
        }
        if pmf_y.len() != window.m() as usize {
            return Err(Error::param(format!(
                "pmf of Y needs {} entries (truncation times {:?}), got {}",
                window.m(),
                window.truncation_range(),
                pmf_y.len()
            )));
        }
        for (name, pmf) in [("X", &pmf_x), ("Y", &pmf_y)] {
            if pmf.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::param(format!("pmf of {name} has a negative entry")));
            }
            let total: f64 = pmf.iter().sum();
            if (total - 1.0).abs() > PMF_TOLERANCE {
                return Err(Error::param(format!("pmf of {name} sums to {total}")));
            }
        }
        let mut oracle = Self {
            pmf_x,
            pmf_y,
            window,
            alpha_accept: 0.0,
        };
        oracle.alpha_accept = oracle.sum_pairs(|x, y| x >= y);
        if oracle.alpha_accept <= 0.0 {
            return Err(Error::param(
                "Pr(X >= Y) is zero; no contract can enter the pool",
            ));
        }
        Ok(oracle)
    }

    /// Truncated geometric lifetimes with uniform truncation times on
    /// `delta + 1 ..= m + delta`.
    pub fn geometric_uniform(p: f64, window: SupportWindow) -> Result<Self> {
        Self::new(
            make_truncated_geometric(p, window.omega())?,
            uniform_pmf(window.m() as usize),
            window,
        )
    }

    /// `p = 0.2`, `delta = 0`, `m = 10`, `omega = 24`, `epsilon = 18`.
    pub fn replication_setup() -> Self {
        let window = SupportWindow::new(0, 10, 24, 18).expect("valid window");
        Self::geometric_uniform(0.2, window).expect("valid oracle")
    }

    pub fn window(&self) -> &SupportWindow {
        &self.window
    }

    pub fn pmf_x(&self) -> &[f64] {
        &self.pmf_x
    }

    pub fn pmf_y(&self) -> &[f64] {
        &self.pmf_y
    }

    pub fn prob_x(&self, x: u32) -> f64 {
        match x {
            0 => 0.0,
            x => self.pmf_x.get(x as usize - 1).copied().unwrap_or(0.0),
        }
    }

    /// `Pr(X >= Y)`.
    pub fn alpha_accept(&self) -> f64 {
        self.alpha_accept
    }

    fn ys(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        let first = self.window.first_age();
        self.pmf_y
            .iter()
            .enumerate()
            .map(move |(i, &p)| (first + i as u32, p))
    }

    fn xs(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.pmf_x
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as u32 + 1, p))
    }

    /// `sum Pr(X = x) Pr(Y = y)` over pairs satisfying `pred(x, y)`.
    fn sum_pairs(&self, pred: impl Fn(u32, u32) -> bool) -> f64 {
        let mut total = 0.0;
        for (x, px) in self.xs() {
            for (y, py) in self.ys() {
                if pred(x, y) {
                    total += px * py;
                }
            }
        }
        total
    }

    /// Probability of an event among truncated pairs, `Pr(A | X >= Y)`,
    /// where `A` is given by `pred(x, y, c)` with `c = y + tau`.
    fn conditional(&self, pred: impl Fn(u32, u32, u32) -> bool) -> f64 {
        let tau = self.window.tau();
        self.sum_pairs(|x, y| x >= y && pred(x, y, y + tau)) / self.alpha_accept
    }
}

/// Exact targets of the estimator on `delta + 1 ..= xi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueQuantities {
    pub ages: Vec<u32>,
    pub lambda: Vec<f64>,
    pub f_star: Vec<f64>,
    pub c_tau: Vec<f64>,
}

/// `C_tau(x) = Pr(Y <= x <= min(X, C) | X >= Y)`,
/// `f_*(x) = Pr(X = x, X <= C | X >= Y)` and `lambda_tau = f_* / C_tau`.
pub fn true_conditional_quantities(oracle: &OracleDistribution) -> TrueQuantities {
    let ages: Vec<u32> = oracle.window.ages().collect();
    let c_tau: Vec<f64> = ages
        .iter()
        .map(|&a| oracle.conditional(|x, y, c| y <= a && a <= x.min(c)))
        .collect();
    let f_star: Vec<f64> = ages
        .iter()
        .map(|&a| oracle.conditional(|x, _, c| x == a && x <= c))
        .collect();
    let lambda = f_star
        .iter()
        .zip(&c_tau)
        .map(|(f, c)| if *c > 0.0 { f / c } else { 0.0 })
        .collect();
    TrueQuantities {
        ages,
        lambda,
        f_star,
        c_tau,
    }
}

/// Joint at-risk and event probabilities for a pair of ages:
/// `c(k, k') = Pr(Y <= min, X >= max, C >= max | X >= Y)` and
/// `r(k, k') = Pr(X = max, Y <= min, C >= max | X >= Y)`.
pub fn cross_moments(oracle: &OracleDistribution, k: u32, k2: u32) -> (f64, f64) {
    let (lo, hi) = (k.min(k2), k.max(k2));
    let c = oracle.conditional(|x, y, cens| y <= lo && x >= hi && cens >= hi);
    let r = oracle.conditional(|x, y, cens| x == hi && y <= lo && cens >= hi);
    (c, r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoreticalCovariance {
    pub ages: Vec<u32>,
    /// Diagonal of the hazard covariance, `f (C - f) / C^3`.
    pub sigma_diag: Vec<f64>,
    /// Covariance of the risk-set indicators, row-major.
    pub sigma_c: Vec<Vec<f64>>,
}

/// Limiting covariances of `sqrt(n) (lambda_hat - lambda)` and
/// `sqrt(n) (C_hat - C)`.
pub fn covariance_matrices(oracle: &OracleDistribution) -> TheoreticalCovariance {
    let truth = true_conditional_quantities(oracle);
    let sigma_diag = truth
        .f_star
        .iter()
        .zip(&truth.c_tau)
        .map(|(f, c)| {
            if *c > 0.0 {
                f * (c - f) / (c * c * c)
            } else {
                0.0
            }
        })
        .collect();
    let ages = truth.ages.clone();
    let sigma_c = ages
        .iter()
        .enumerate()
        .map(|(i, &k1)| {
            ages.iter()
                .enumerate()
                .map(|(j, &k2)| {
                    if i == j {
                        truth.c_tau[i] * (1.0 - truth.c_tau[i])
                    } else {
                        cross_moments(oracle, k1, k2).0 - truth.c_tau[i] * truth.c_tau[j]
                    }
                })
                .collect()
        })
        .collect();
    TheoreticalCovariance {
        ages,
        sigma_diag,
        sigma_c,
    }
}

/// Reusable sampler for truncated, censored observations.
pub struct DatasetSampler<'a> {
    oracle: &'a OracleDistribution,
    x_dist: WeightedAliasIndex<f64>,
    y_dist: WeightedAliasIndex<f64>,
}

impl<'a> DatasetSampler<'a> {
    pub fn new(oracle: &'a OracleDistribution) -> Result<Self> {
        let x_dist = WeightedAliasIndex::new(oracle.pmf_x.clone())
            .map_err(|e| Error::param(e.to_string()))?;
        let y_dist = WeightedAliasIndex::new(oracle.pmf_y.clone())
            .map_err(|e| Error::param(e.to_string()))?;
        Ok(Self {
            oracle,
            x_dist,
            y_dist,
        })
    }

    /// Draws `(X, Y)` pairs until `n` satisfy `X >= Y`. Returns the triples
    /// and the number of proposals used.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<ObservationTriple>, u64) {
        let window = &self.oracle.window;
        let y_offset = window.first_age();
        let mut out = Vec::with_capacity(n);
        let mut proposals = 0u64;
        while out.len() < n {
            proposals += 1;
            let x = self.x_dist.sample(rng) as u32 + 1;
            let y = self.y_dist.sample(rng) as u32 + y_offset;
            if x < y {
                continue;
            }
            let c = window.censoring_age(y);
            out.push(if x <= c {
                ObservationTriple::terminated(y, x)
            } else {
                ObservationTriple::censored(y, window)
            });
        }
        (out, proposals)
    }
}

/// Rejection-samples `n` observations from the truncated population.
pub fn generate_dataset<R: Rng + ?Sized>(
    oracle: &OracleDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ObservationTriple>> {
    if n == 0 {
        return Err(Error::param("dataset size must be at least 1"));
    }
    Ok(DatasetSampler::new(oracle)?.sample(n, rng).0)
}

/// Per-age comparison of the estimator's sampling distribution with theory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexComparison {
    pub age: u32,
    pub lambda_true: f64,
    pub lambda_mean: f64,
    /// `(mean - truth) / (sd / sqrt(replicates))`; zero when the sd is zero.
    pub mean_z: f64,
    pub var_theory: f64,
    pub var_empirical: f64,
    pub var_rel_err: f64,
    pub band_theory: (f64, f64),
    pub band_empirical: (f64, f64),
    pub band_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub indices: Vec<IndexComparison>,
    /// Largest `|corr|` between two hazard estimates across replicates.
    pub max_abs_cross_corr: f64,
    /// `3 / sqrt(replicates)`.
    pub cross_corr_bound: f64,
    /// Largest `|empirical - theoretical| / se` over entries of `cov(C_hat)`.
    pub max_c_cov_z: f64,
    /// Median over replicates of `max_x |lambda_hat(x) - lambda(x)|`.
    pub median_max_error: f64,
}

impl ReplicationReport {
    pub fn max_var_rel_err(&self) -> f64 {
        self.indices
            .iter()
            .filter(|i| i.var_theory > 0.0)
            .map(|i| i.var_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn max_band_rel_err(&self) -> f64 {
        self.indices
            .iter()
            .map(|i| i.band_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn max_abs_mean_z(&self) -> f64 {
        self.indices
            .iter()
            .map(|i| i.mean_z.abs())
            .fold(0.0, f64::max)
    }

    /// CSV of per-age theory/empirical pairs.
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "age",
            "lambda_true",
            "lambda_mean",
            "var_theory",
            "var_empirical",
            "theory_lo",
            "theory_hi",
            "empirical_lo",
            "empirical_hi",
        ])?;
        for i in &self.indices {
            w.write_record(
                [
                    i.age as f64,
                    i.lambda_true,
                    i.lambda_mean,
                    i.var_theory,
                    i.var_empirical,
                    i.band_theory.0,
                    i.band_theory.1,
                    i.band_empirical.0,
                    i.band_empirical.1,
                ]
                .iter()
                .map(f64::to_string),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 97.5% standard normal quantile for the two-sided 95% band.
const Z_975: f64 = 1.959_963_984_540_054;

/// Fits the hazard estimator to `replicates` fresh datasets of size `n` and
/// compares its empirical moments with the theoretical ones.
pub fn replication_study(
    oracle: &OracleDistribution,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<ReplicationReport> {
    if n == 0 || replicates == 0 {
        return Err(Error::param("n and replicates must be at least 1"));
    }
    let sampler = DatasetSampler::new(oracle)?;
    let window = *oracle.window();
    let fits: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep as u64, 0);
            let (data, _) = sampler.sample(n, &mut rng);
            let model = estimate_hazard(&data, &window)?;
            Ok((model.hazards().to_vec(), model.c_hat().to_vec()))
        })
        .collect::<Result<_>>()?;

    let truth = true_conditional_quantities(oracle);
    let theory = covariance_matrices(oracle);
    let len = truth.ages.len();
    let reps = replicates as f64;
    let lambda_cols: Vec<Vec<f64>> = (0..len)
        .map(|i| fits.iter().map(|f| f.0[i]).collect())
        .collect();
    let c_cols: Vec<Vec<f64>> = (0..len)
        .map(|i| fits.iter().map(|f| f.1[i]).collect())
        .collect();

    let indices = (0..len)
        .map(|i| {
            let col = &lambda_cols[i];
            let mean = stats::mean(col);
            let var = stats::variance(col);
            let var_theory = theory.sigma_diag[i] / n as f64;
            let sd_theory = var_theory.sqrt();
            let se_mean = (var / reps).sqrt();
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let band_theory = (
                truth.lambda[i] - Z_975 * sd_theory,
                truth.lambda[i] + Z_975 * sd_theory,
            );
            let band_empirical = (
                stats::percentile_sorted(&sorted, 2.5),
                stats::percentile_sorted(&sorted, 97.5),
            );
            let width_theory = band_theory.1 - band_theory.0;
            let width_emp = band_empirical.1 - band_empirical.0;
            IndexComparison {
                age: truth.ages[i],
                lambda_true: truth.lambda[i],
                lambda_mean: mean,
                mean_z: if se_mean > 0.0 {
                    (mean - truth.lambda[i]) / se_mean
                } else {
                    0.0
                },
                var_theory,
                var_empirical: var,
                var_rel_err: relative_gap(var, var_theory),
                band_theory,
                band_empirical,
                band_rel_err: relative_gap(width_emp, width_theory),
            }
        })
        .collect();

    let mut max_abs_cross_corr: f64 = 0.0;
    for i in 0..len {
        for j in i + 1..len {
            max_abs_cross_corr =
                max_abs_cross_corr.max(stats::correlation(&lambda_cols[i], &lambda_cols[j]).abs());
        }
    }

    let c_means: Vec<f64> = c_cols.iter().map(|c| stats::mean(c)).collect();
    let mut max_c_cov_z: f64 = 0.0;
    for i in 0..len {
        for j in i..len {
            let products: Vec<f64> = c_cols[i]
                .iter()
                .zip(&c_cols[j])
                .map(|(a, b)| (a - c_means[i]) * (b - c_means[j]))
                .collect();
            let cov = products.iter().sum::<f64>() / (reps - 1.0);
            let se = (stats::variance(&products) / reps).sqrt();
            let target = theory.sigma_c[i][j] / n as f64;
            if se > 0.0 {
                max_c_cov_z = max_c_cov_z.max((cov - target).abs() / se);
            }
        }
    }

    let mut max_errors: Vec<f64> = fits
        .iter()
        .map(|(l, _)| {
            l.iter()
                .zip(&truth.lambda)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    max_errors.sort_by(f64::total_cmp);
    let median_max_error = stats::percentile_sorted(&max_errors, 50.0);

    Ok(ReplicationReport {
        n,
        replicates,
        seed,
        indices,
        max_abs_cross_corr,
        cross_corr_bound: 3.0 / reps.sqrt(),
        max_c_cov_z,
        median_max_error,
    })
}

fn relative_gap(empirical: f64, theory: f64) -> f64 {
    if theory > 0.0 {
        (empirical - theory).abs() / theory
    } else if empirical == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
