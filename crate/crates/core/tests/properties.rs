use proptest::prelude::*;
use survcash::cashflow::{
    apv_contract, cte_normal, pv_realized, var_pv_contract, DepreciationCurve, LeaseContract,
    TailDirection,
};
use survcash::ingest::{
    derive_observations, parse_portfolio, smooth_depreciation, write_portfolio, LeaseRecord,
    RawDepreciationPoint,
};
use survcash::montecarlo::sample_termination;
use survcash::oracle::{cross_moments, true_conditional_quantities, OracleDistribution};
use survcash::survival::{estimate_hazard, HazardModel, ObservationTriple, SupportWindow};

/// Window with `delta` in 0..4, `m` in 1..8, `omega` in 4..20 and an
/// `epsilon` anywhere from just after the last origination to well past
/// the no-censoring boundary.
fn window() -> impl Strategy<Value = SupportWindow> {
    (0u32..4, 1u32..8, 4u32..20, 1u32..30)
        .prop_filter_map("valid window", |(delta, m, omega, extra)| {
            SupportWindow::new(delta, m, omega, m + delta + extra).ok()
        })
}

fn hazard_model() -> impl Strategy<Value = HazardModel> {
    window().prop_flat_map(|w| {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 8 => 0.001f64..0.999], w.len())
            .prop_map(move |lambda| HazardModel::from_hazards(w, lambda).unwrap())
    })
}

fn observations(w: SupportWindow) -> impl Strategy<Value = Vec<ObservationTriple>> {
    // truncation times beyond xi cannot be observed
    let ys = *w.truncation_range().start()..=(*w.truncation_range().end()).min(w.xi());
    prop::collection::vec((ys, 0u32..40, any::<bool>()), 1..60).prop_map(move |raw| {
        raw.into_iter()
            .map(|(y, offset, terminated)| {
                let c = w.censoring_age(y).min(w.xi());
                let x = y + offset % (c - y + 1);
                if terminated || !w.censoring_enabled() {
                    ObservationTriple::terminated(y, x)
                } else {
                    ObservationTriple::censored(y, &w)
                }
            })
            .collect()
    })
}

/// `Pr(X >= x)` as an explicit product, independent of the model code.
fn survival(lambda: &[f64], first: u32, x: u32) -> f64 {
    (first..x)
        .map(|a| 1.0 - lambda[(a - first) as usize])
        .product()
}

/// `Pr(K = k)` for `k = 1..=last - a` from ratios of the survival function,
/// with everything beyond the last age lumped at the final month.
fn ratio_pmf(lambda: &[f64], first: u32, a: u32) -> Vec<f64> {
    let last = first + lambda.len() as u32 - 1;
    let base = survival(lambda, first, a + 1);
    (1..=last - a)
        .map(|k| {
            let x = a + k;
            if x == last {
                survival(lambda, first, x) / base
            } else {
                (survival(lambda, first, x) - survival(lambda, first, x + 1)) / base
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn survival_is_monotone(model in hazard_model()) {
        let mut prev = 1.0;
        prop_assert_eq!(model.survival_function(model.first_age()).unwrap(), 1.0);
        for x in model.first_age()..=model.last_age() + 1 {
            let s = model.survival_function(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn remaining_lifetime_pmf_matches_ratio_form(model in hazard_model(), pick in 0.0f64..1.0) {
        let lo = model.window().delta();
        let hi = model.last_age();
        prop_assume!(hi > lo);
        let a = lo + ((hi - lo) as f64 * pick) as u32;
        let pmf = model.remaining_lifetime_pmf(a).unwrap();
        let total: f64 = pmf.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(pmf.probs().iter().all(|p| *p >= 0.0));
        if survival(model.hazards(), model.first_age(), a + 1) > 1e-6 {
            let expected = ratio_pmf(model.hazards(), model.first_age(), a);
            prop_assert_eq!(expected.len(), pmf.probs().len());
            for (p, q) in pmf.probs().iter().zip(&expected) {
                prop_assert!((p - q).abs() < 1e-9, "{} vs {}", p, q);
            }
        }
    }

    #[test]
    fn inverse_cdf_draw_is_consistent(model in hazard_model(), pick in 0.0f64..1.0, u in 1e-9f64..1.0) {
        let lo = model.window().delta();
        let hi = model.last_age();
        prop_assume!(hi > lo);
        let a = lo + ((hi - lo) as f64 * pick) as u32;
        let cdf = model.remaining_lifetime_pmf(a).unwrap().cdf();
        let k = sample_termination(&model, a, u).unwrap();
        prop_assert!(k >= 1 && k as usize <= cdf.len());
        prop_assert!(u <= cdf[k as usize - 1] + 1e-12);
        if k > 1 {
            prop_assert!(u > cdf[k as usize - 2] - 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_enumeration(
        model in hazard_model(),
        pick in 0.0f64..1.0,
        payment in 1.0f64..2_000.0,
        value in 1_000.0f64..100_000.0,
        rate in prop_oneof![Just(0.0), 1e-4f64..0.05],
        depreciation in 0.0f64..0.1,
    ) {
        let lo = model.window().delta();
        let hi = model.last_age();
        prop_assume!(hi > lo);
        let a = lo + ((hi - lo) as f64 * pick) as u32;
        let curve = DepreciationCurve::from_fn(0..=model.last_age(), |j| (-depreciation * j as f64).exp()).unwrap();
        let c = LeaseContract::new("p", payment, value, a).unwrap();
        let probs = model.remaining_lifetime_pmf(a).unwrap().probs().to_vec();
        let pvs: Vec<f64> = (1..=probs.len() as u32).map(|k| pv_realized(&c, &curve, rate, k).unwrap()).collect();
        let mean: f64 = pvs.iter().zip(&probs).map(|(v, p)| v * p).sum();
        let var: f64 = pvs.iter().zip(&probs).map(|(v, p)| (v - mean) * (v - mean) * p).sum();
        let apv = apv_contract(&c, &model, &curve, rate).unwrap();
        let v = var_pv_contract(&c, &model, &curve, rate).unwrap();
        prop_assert!(((apv - mean) / mean).abs() < 1e-10);
        prop_assert!((v - var).abs() <= 1e-10 * var, "{} vs {}", v, var);
    }

    #[test]
    fn apv_monotone_in_residual_value(model in hazard_model(), pick in 0.0f64..1.0, bump in 0.0f64..0.3) {
        let lo = model.window().delta();
        let hi = model.last_age();
        prop_assume!(hi > lo);
        let a = lo + ((hi - lo) as f64 * pick) as u32;
        let low = DepreciationCurve::from_fn(0..=hi, |j| 0.6 * 0.98f64.powi(j as i32)).unwrap();
        let high = DepreciationCurve::from_fn(0..=hi, |j| (0.6 * 0.98f64.powi(j as i32) + bump).min(1.0)).unwrap();
        let c = LeaseContract::new("m", 300.0, 30_000.0, a).unwrap();
        prop_assert!(apv_contract(&c, &model, &high, 0.01).unwrap() >= apv_contract(&c, &model, &low, 0.01).unwrap());
    }

    #[test]
    fn cte_brackets_the_mean(mu in -1e6f64..1e6, sigma in 0.0f64..1e5, alpha in 0.001f64..0.5) {
        let up = cte_normal(mu, sigma, alpha, TailDirection::Upper).unwrap();
        let down = cte_normal(mu, sigma, alpha, TailDirection::Lower).unwrap();
        prop_assert!(down <= mu && mu <= up);
        prop_assert!(((up - mu) - (mu - down)).abs() <= 1e-9 * (1.0 + mu.abs()));
        let deeper = cte_normal(mu, sigma, alpha / 2.0, TailDirection::Upper).unwrap();
        prop_assert!(deeper >= up);
    }

    #[test]
    fn estimator_matches_counting(
        (w, obs) in window().prop_flat_map(|w| (Just(w), observations(w)))
    ) {
        let model = estimate_hazard(&obs, &w).unwrap();
        for x in w.ages() {
            let at_risk = obs.iter().filter(|o| o.y <= x && x <= o.t.min(w.xi())).count();
            let events = obs.iter().filter(|o| o.event && o.t == x).count();
            let lambda = model.hazard(x).unwrap();
            if at_risk == 0 {
                prop_assert_eq!(lambda, 0.0);
                prop_assert!(model.unobserved().contains(&x));
            } else {
                prop_assert!((lambda - events as f64 / at_risk as f64).abs() < 1e-15);
            }
        }
        prop_assert_eq!(model.n(), obs.len());
    }

    #[test]
    fn oracle_identities(p in 0.02f64..0.9, w in window()) {
        let oracle = OracleDistribution::geometric_uniform(p, w).unwrap();
        let truth = true_conditional_quantities(&oracle);
        let tau = w.tau();
        let mut direct = 0.0;
        for (i, py) in oracle.pmf_y().iter().enumerate() {
            let y = w.first_age() + i as u32;
            for x in y..=(y + tau).min(w.omega()) {
                direct += py * oracle.prob_x(x);
            }
        }
        let total: f64 = truth.f_star.iter().sum();
        prop_assert!((total - direct / oracle.alpha_accept()).abs() < 1e-12);

        for (i, &k) in truth.ages.iter().enumerate() {
            for (j, &k2) in truth.ages.iter().enumerate() {
                let hi = i.max(j);
                let (c, r) = cross_moments(&oracle, k, k2);
                prop_assert!((truth.f_star[hi] * c - r * truth.c_tau[hi]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classification_is_total_and_triples_valid(
        w in window(),
        raw in prop::collection::vec((1u32..12, prop::option::of(1u32..40)), 1..40),
    ) {
        let records: Vec<LeaseRecord> = raw
            .iter()
            .enumerate()
            .map(|(i, &(orig, life))| LeaseRecord {
                id: format!("r{i}"),
                origination_month: orig,
                scheduled_term: 24,
                monthly_payment: 100.0,
                vehicle_value: 10_000.0,
                termination_month: life.map(|l| orig + l),
                residual_paid: None,
            })
            .collect();
        let d = derive_observations(&records, &w, None);
        prop_assert_eq!(d.classes.len(), records.len());
        prop_assert_eq!(d.event_count() + d.censored_count() + d.excluded().count(), records.len());
        prop_assert_eq!(d.observations.len(), d.event_count() + d.censored_count());
        for o in &d.observations {
            prop_assert!(o.check(&w).is_ok(), "{:?}", o);
        }
    }

    #[test]
    fn portfolio_csv_round_trip(
        raw in prop::collection::vec(
            (1u32..30, 1u32..60, 1.0f64..5_000.0, 1.0f64..1e6, prop::option::of((1u32..40, prop::option::of(0.0f64..1e6)))),
            0..30,
        )
    ) {
        let records: Vec<LeaseRecord> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (orig, term, pay, value, end))| LeaseRecord {
                id: format!("lease-{i}"),
                origination_month: orig,
                scheduled_term: term,
                monthly_payment: pay,
                vehicle_value: value,
                termination_month: end.map(|(l, _)| orig + l),
                residual_paid: end.and_then(|(_, r)| r),
            })
            .collect();
        let mut buf = Vec::new();
        write_portfolio(&records, &mut buf).unwrap();
        prop_assert_eq!(parse_portfolio(&buf[..]).unwrap(), records);
    }

    #[test]
    fn smoothing_ignores_point_order(
        pts in prop::collection::btree_map(0u32..30, 0.2f64..1.0, 1..20),
        seed in any::<u64>(),
    ) {
        let points: Vec<RawDepreciationPoint> = pts
            .iter()
            .map(|(&age, &ratio)| RawDepreciationPoint { age, ratio, count: 1, flagged: false })
            .collect();
        let mut shuffled = points.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        let a = smooth_depreciation(&points, 0.75, 0..=30).unwrap();
        let b = smooth_depreciation(&shuffled, 0.75, 0..=30).unwrap();
        prop_assert_eq!(a, b);
    }
}
