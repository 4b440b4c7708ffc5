#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use survcash::ingest::LeaseRecord;
use survcash::montecarlo::substream;
use survcash::oracle::{DatasetSampler, OracleDistribution};

pub fn depreciation(j: u32) -> f64 {
    1.05f64.powi(-(j as i32))
}

/// Lease records whose lifetimes and origination months come from `oracle`.
///
/// A lease with truncation time `y` originated in month `m + delta + 1 - y`
/// and, if it ended by the valuation month, paid a residual of
/// `Z(x - 1) V` (times `1 + noise_sd * N(0, 1)` when `noise_sd > 0`).
pub fn synthetic_records(
    oracle: &OracleDistribution,
    n: usize,
    seed: u64,
    noise_sd: f64,
) -> Vec<LeaseRecord> {
    let w = *oracle.window();
    let sampler = DatasetSampler::new(oracle).unwrap();
    let mut rng = substream(seed, 0, 0);
    let (triples, _) = sampler.sample(n, &mut rng);
    let mut attrs = substream(seed, 0, 1);
    triples
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let origination = w.m() + w.delta() + 1 - o.y;
            let payment = attrs.random_range(300.0..700.0_f64).round();
            let value = attrs.random_range(30_000.0..60_000.0_f64).round();
            let noise: f64 = attrs.sample(StandardNormal);
            let (termination_month, residual_paid) = if o.event {
                let z = depreciation(o.t - 1) * (1.0 + noise_sd * noise);
                (Some(origination + o.t), Some(z * value))
            } else {
                (None, None)
            };
            LeaseRecord {
                id: format!("syn{i:06}"),
                origination_month: origination,
                scheduled_term: 24,
                monthly_payment: payment,
                vehicle_value: value,
                termination_month,
                residual_paid,
            }
        })
        .collect()
}
