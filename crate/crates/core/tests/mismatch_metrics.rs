mod common;

use climate_vre::metrics::{key_metrics_for_range, transmission_benefit, CapacityStatistic, Metric};
use climate_vre::mismatch::{aggregate_mismatch, decompose, MismatchSet, NormalizedCountry};
use climate_vre::stats::{box_summary, paired_t_test, students_t_two_sided_p};
use climate_vre::weather::TimeAxis;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normalized(inp: &common::RandomInputs) -> Vec<NormalizedCountry> {
    (0..inp.shares.len())
        .map(|c| NormalizedCountry {
            country: format!("C{c}"),
            wind: inp.wind[c].clone(),
            solar: inp.solar[c].clone(),
            load: inp.load[c].clone(),
        })
        .collect()
}

#[test]
fn aggregate_matches_brute_force_5_by_64() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let series: Vec<Vec<f64>> = (0..5).map(|_| (0..64).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let raw: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let shares: Vec<f64> = raw.iter().map(|r| r / s).collect();
    let agg = aggregate_mismatch(&series, &shares).unwrap();
    for t in 0..64 {
        let expected: f64 = (0..5).map(|c| shares[c] * series[c][t]).sum();
        assert!((agg[t] - expected).abs() < 1e-12);
    }
}

#[test]
fn transmission_benefit_matches_brute_force_4_by_32() {
    let inp = common::random_inputs(22, 4, 32);
    let set = MismatchSet::build(&normalized(&inp), &inp.shares, 0.4, 1.0, TimeAxis::new(2000, 32)).unwrap();
    let k2 = transmission_benefit(&set.country_balancing, &set.shares, &set.balancing).unwrap();
    let oracle = common::brute_force_metrics(&inp, 0.4, 1.0)[1];
    assert!((k2 - oracle).abs() <= 1e-12 * oracle.abs().max(1e-300), "{k2} vs {oracle}");
}

#[test]
fn capacity_is_at_least_energy_on_random_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let inp = common::random_inputs(rng.random(), 2, 16);
        let set = MismatchSet::build(&normalized(&inp), &inp.shares, rng.random_range(0.0..1.0), 1.0, TimeAxis::new(2000, 16)).unwrap();
        let k = key_metrics_for_range(&set, 0..16, CapacityStatistic::Maximum).unwrap();
        assert!(k.dispatchable_capacity >= k.dispatchable_electricity);
        assert!(k.short_term_variability >= 0.0 && k.transmission_benefit >= 0.0);
    }
}

#[test]
fn metrics_ignore_country_order() {
    let inp = common::random_inputs(24, 5, 40);
    let time = TimeAxis::new(2000, 40);
    let mut countries = normalized(&inp);
    let a = MismatchSet::build(&countries, &inp.shares, 0.7, 1.0, time).unwrap();
    let mut shares = inp.shares.clone();
    countries.reverse();
    shares.reverse();
    let b = MismatchSet::build(&countries, &shares, 0.7, 1.0, time).unwrap();
    let (ka, kb) = (
        key_metrics_for_range(&a, 0..40, CapacityStatistic::Maximum).unwrap(),
        key_metrics_for_range(&b, 0..40, CapacityStatistic::Maximum).unwrap(),
    );
    for m in Metric::ALL {
        assert!((ka.get(m) - kb.get(m)).abs() < 1e-12);
    }
}

#[test]
fn box_summary_matches_sorted_order_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    // 21 values so every quartile lands on an order statistic
    let v: Vec<f64> = (0..21).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut sorted = v.clone();
    sorted.sort_by(f64::total_cmp);
    let b = box_summary(&v).unwrap();
    assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (sorted[0], sorted[5], sorted[10], sorted[15], sorted[20]));
}

#[test]
fn t_distribution_matches_closed_form_series() {
    for df in [1, 2, 3, 4, 5, 9, 19, 30] {
        for t in [0.1, 0.5, 1.0, 2.0, 2.5, 4.0, 7.5] {
            let p = students_t_two_sided_p(t, df);
            let oracle = common::t_two_sided_closed_form(t, df);
            assert!((p - oracle).abs() < 1e-12, "t={t} df={df}: {p} vs {oracle}");
        }
    }
}

#[test]
fn t_test_sign_follows_direction() {
    let a = [1.0, 2.0, 3.5, 4.0];
    let b = [0.5, 1.0, 1.5, 2.5];
    let r = paired_t_test(&a, &b).unwrap();
    let r2 = paired_t_test(&b, &a).unwrap();
    assert!(r.t_statistic > 0.0 && r2.t_statistic == -r.t_statistic && r.p_value == r2.p_value);
}

proptest! {
    #[test]
    fn aggregated_balancing_is_subadditive(
        seed in any::<u64>(),
        n in 2usize..6,
        alpha in 0.0..=1.0f64,
    ) {
        let inp = common::random_inputs(seed, n, 24);
        let set = MismatchSet::build(&normalized(&inp), &inp.shares, alpha, 1.0, TimeAxis::new(2000, 24)).unwrap();
        for t in 0..24 {
            let isolated: f64 = (0..n).map(|c| inp.shares[c] * set.country_balancing[c][t]).sum();
            prop_assert!(set.balancing[t] <= isolated + 1e-12);
        }
        let k = key_metrics_for_range(&set, 0..24, CapacityStatistic::Maximum).unwrap();
        prop_assert!(k.transmission_benefit >= 0.0);
    }

    #[test]
    fn decomposition_is_exact(delta in prop::collection::vec(-5.0..5.0f64, 1..64)) {
        let (b, c) = decompose(&delta);
        for i in 0..delta.len() {
            prop_assert_eq!(c[i] - b[i], delta[i]);
            prop_assert_eq!(b[i] * c[i], 0.0);
            prop_assert!(b[i] >= 0.0 && c[i] >= 0.0);
        }
    }

    #[test]
    fn variability_ignores_constant_offsets(b in prop::collection::vec(0.0..3.0f64, 3..50), k in 0.0..2.0f64) {
        let shifted: Vec<f64> = b.iter().map(|v| v + k).collect();
        let a = climate_vre::metrics::short_term_variability(&b).unwrap();
        let s = climate_vre::metrics::short_term_variability(&shifted).unwrap();
        prop_assert!((a - s).abs() < 1e-9);
    }
}
