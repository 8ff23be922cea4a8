use proptest::prelude::*;
use serde_json::{json, Value};

use memcap::avram_parter::{ap_error_bound, ergodic_report, optimal_band, step_bounds, CHANNEL_K};
use memcap::capacities::{
    asymptotic_capacity, epsilon_penalty, exact_sum_lower_bound, memoryless_nshot_bounds,
    nshot_lower_bound, positive_q_region, pure_loss_capacity, BoundCoefficients,
};
use memcap::output::{format_number, to_csv, to_json_line, Cell};
use memcap::symbol::{
    channel_coefficients, derivative_l2_norm, effective_transmissivity, max_transmissivity,
    second_derivative_norm_estimate, symbol_eval, DEFAULT_COEFF_TOL,
};
use memcap::toeplitz::{build_toeplitz, channel_spectrum, mode_transmissivities, DenseMatrix};
use memcap::verify::{
    check_fourier_truncation, check_rank_perturbation, check_rectangle_rule, check_step_bounds,
    check_symbol_coefficients, default_fft_size, CheckReport, SLACK_TOL,
};
use memcap::{CapacityKind, ChannelParams, ErrorBudget};

fn params(lambda: f64, mu: f64) -> ChannelParams {
    ChannelParams::new(lambda, mu).unwrap()
}

fn kinds() -> impl Strategy<Value = CapacityKind> {
    prop_oneof![
        Just(CapacityKind::Qubit),
        Just(CapacityKind::Ebit),
        Just(CapacityKind::Key)
    ]
}

fn assert_report(r: &CheckReport) -> Result<(), TestCaseError> {
    prop_assert!(r.passed(), "{:#?}", r);
    if r.cases_failed == 0 {
        prop_assert!(r.worst_margin >= -SLACK_TOL);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn symbol_modulus_is_transmissivity(
        lambda in 0.01f64..0.99,
        mu in 0.0f64..0.95,
        theta in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let p = params(lambda, mu);
        let f = symbol_eval(p, theta);
        let eta = effective_transmissivity(p, theta);
        prop_assert!((f.norm_sqr() - eta).abs() <= 1e-12 * eta);
        prop_assert!(eta <= max_transmissivity(p) * (1.0 + 1e-14));
    }

    #[test]
    fn ap_bound_nonincreasing_in_n(
        n in 4usize..100_000,
        step in 1usize..10_000,
        k in 1u32..5,
        l in 0.01f64..100.0,
        sk in 0.0f64..10.0,
        s in 0.0f64..10.0,
        fp in 0.0f64..10.0,
        finf in 0.0f64..10.0,
    ) {
        let a = ap_error_bound(n, k, l, sk, s, fp, finf).unwrap();
        let b = ap_error_bound(n + step, k, l, sk, s, fp, finf).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-14));
    }

    #[test]
    fn first_and_fourth_steps_coincide(
        n in 8usize..4096,
        band_frac in 0.0f64..1.0,
        k in 1u32..4,
        l in 0.01f64..100.0,
        sk in 0.0f64..10.0,
        s in 0.0f64..10.0,
    ) {
        let band = 1 + ((n - 1) / 2 - 1).min((band_frac * ((n - 1) / 2) as f64) as usize);
        let st = step_bounds(n, band, k, l, sk, s, 1.0, 1.0).unwrap();
        prop_assert_eq!(st.c1, st.c4);
        prop_assert!((st.total - (st.c1 + st.c2 + st.c3 + st.c4)).abs() <= 1e-12 * st.total);
    }

    #[test]
    fn optimal_band_is_largest_admissible(n in 4usize..10_000_000, k in 1u32..5) {
        let band = optimal_band(n, k).unwrap();
        let e = 1.0 / (k as f64 + 1.5);
        prop_assert!((band as f64) <= (n as f64).powf(e) * (1.0 + 1e-12));
        prop_assert!(((band + 1) as f64) > (n as f64).powf(e) * (1.0 - 1e-12));
    }

    #[test]
    fn penalty_decreases_with_epsilon(a in 0.001f64..0.999, b in 0.001f64..0.999, kind in kinds()) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        let p_lo = epsilon_penalty(ErrorBudget::new(lo).unwrap(), kind);
        let p_hi = epsilon_penalty(ErrorBudget::new(hi).unwrap(), kind);
        prop_assert!(p_hi < p_lo);
    }

    #[test]
    fn memoryless_bracket_is_ordered(
        lambda in 0.01f64..0.99,
        n in 1u64..1_000_000,
        eps in 0.001f64..0.499,
        kind in kinds(),
    ) {
        let b = memoryless_nshot_bounds(lambda, n, ErrorBudget::new(eps).unwrap(), kind).unwrap();
        prop_assert!(b.lower <= b.upper);
        prop_assert!(b.lower >= 0.0);
    }

    #[test]
    fn json_and_csv_encode_identical_digits(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        let line = to_json_line(&json!({ "x": x })).unwrap();
        let back: Value = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(back["x"].as_f64().unwrap(), x);
        let csv = to_csv(&["x"], &[vec![Cell::Num(x)]]);
        let cell = csv.lines().nth(1).unwrap();
        prop_assert_eq!(cell, format_number(x));
        prop_assert!(line.contains(cell));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficients_match_inverse_fft(lambda in 0.05f64..0.95, mu in 0.0f64..0.8) {
        let p = params(lambda, mu);
        let coeffs = channel_coefficients(p, DEFAULT_COEFF_TOL).unwrap();
        assert_report(&check_symbol_coefficients(p, default_fft_size(&coeffs)))?;
    }

    #[test]
    fn spectrum_bounded_by_symbol(lambda in 0.05f64..0.95, mu in 0.0f64..0.8, n in 1usize..48) {
        let p = params(lambda, mu);
        let coeffs = channel_coefficients(p, DEFAULT_COEFF_TOL).unwrap();
        let t = build_toeplitz(&coeffs, n);
        let s = channel_spectrum(p, n).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.values()[0] >= 0.0);
        prop_assert!(s.largest() <= max_transmissivity(p).sqrt() + 1e-10);
        let l2 = memcap::symbol::symbol_l2_norm(&coeffs).unwrap();
        let ceiling = (n as f64 / (2.0 * std::f64::consts::PI)).sqrt() * l2;
        prop_assert!(t.frobenius_norm() <= ceiling * (1.0 + 1e-8));
    }

    #[test]
    fn memoryless_spectrum_is_flat(lambda in 0.01f64..0.99, n in 1usize..64) {
        for eta in mode_transmissivities(params(lambda, 0.0), n).unwrap() {
            prop_assert!((eta - lambda).abs() <= 1e-12);
        }
    }

    #[test]
    fn second_derivative_estimate_holds(lambda in 0.05f64..0.95, mu in 0.0f64..0.8) {
        let p = params(lambda, mu);
        let coeffs = channel_coefficients(p, DEFAULT_COEFF_TOL).unwrap();
        let norm = derivative_l2_norm(&coeffs, 2).unwrap();
        prop_assert!(norm <= second_derivative_norm_estimate(p) * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn capacity_ordering(lambda in 0.05f64..0.95, mu in 0.0f64..0.8) {
        let p = params(lambda, mu);
        let q = asymptotic_capacity(p, CapacityKind::Qubit, 1e-10).unwrap();
        let q2 = asymptotic_capacity(p, CapacityKind::Ebit, 1e-10).unwrap();
        let k = asymptotic_capacity(p, CapacityKind::Key, 1e-10).unwrap();
        prop_assert!(q <= q2 + 1e-9);
        prop_assert_eq!(q2, k);
        prop_assert!(q >= 0.0);
        prop_assert_eq!(q > 0.0, positive_q_region(p));
    }

    #[test]
    fn memory_helps(lambda in 0.05f64..0.95, mu in 0.0f64..0.8, kind in kinds()) {
        let lo = asymptotic_capacity(params(lambda, mu), kind, 1e-10).unwrap();
        let hi = asymptotic_capacity(params(lambda, mu + 0.05), kind, 1e-10).unwrap();
        prop_assert!(hi - lo >= -1e-9);
    }

    #[test]
    fn memoryless_components(
        lambda in 0.05f64..0.95,
        n in 4u64..200,
        eps in 0.01f64..0.49,
        kind in kinds(),
    ) {
        let budget = ErrorBudget::new(eps).unwrap();
        let p = params(lambda, 0.0);
        let b = nshot_lower_bound(p, n, budget, kind).unwrap();
        let m = memoryless_nshot_bounds(lambda, n, budget, kind).unwrap();
        let cap = pure_loss_capacity(lambda, kind).unwrap();
        prop_assert!((b.components.asymptotic_term - n as f64 * cap).abs() <= 1e-9 * (1.0 + n as f64 * cap));
        prop_assert_eq!(b.components.penalty, epsilon_penalty(budget, kind));
        prop_assert!((b.raw_lower + b.components.sqrt_term - m.raw_lower).abs() <= 1e-9 * (1.0 + m.raw_lower.abs()));
        let exact = exact_sum_lower_bound(p, n as usize, budget, kind).unwrap();
        prop_assert!((exact - m.raw_lower).abs() <= 1e-9 * (1.0 + m.raw_lower.abs()));
    }

    #[test]
    fn uses_needed_is_minimal(
        lambda in 0.3f64..0.95,
        mu in 0.0f64..0.6,
        eps in 0.01f64..0.5,
        kind in kinds(),
        target in 0.5f64..1000.0,
    ) {
        let p = params(lambda, mu);
        prop_assume!(kind != CapacityKind::Qubit || positive_q_region(p));
        let c = BoundCoefficients::for_channel(p, ErrorBudget::new(eps).unwrap(), kind, 1e-10).unwrap();
        let n = c.uses_needed(target).unwrap();
        prop_assert!(c.lower(n) >= target);
        prop_assert!(n == 4 || c.lower(n - 1) < target);
    }

    #[test]
    fn fabricated_coefficients_solve_exactly(q in 0.01f64..10.0, p in 0.0f64..100.0, target in 0.5f64..1000.0) {
        // With no sqrt term the answer is ⌈(target + p)/q⌉.
        let c = BoundCoefficients { rate: q, sqrt_constant: 0.0, penalty: p };
        let n = c.uses_needed(target).unwrap();
        prop_assert!(c.lower(n) >= target);
        prop_assert!(n == 4 || c.lower(n - 1) < target);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ergodic_error_within_bound(
        lambda in 0.1f64..0.95,
        mu in 0.0f64..0.7,
        n in 4usize..160,
        kind in kinds(),
    ) {
        let p = params(lambda, mu);
        prop_assume!(kind != CapacityKind::Qubit || positive_q_region(p));
        let r = ergodic_report(p, kind, n).unwrap();
        prop_assert!(r.bound_respected, "{:?}", r);
        prop_assert!(r.theoretical_bound - r.empirical_error >= -SLACK_TOL);
    }

    #[test]
    fn step_chain_holds(lambda in 0.1f64..0.95, mu in 0.0f64..0.7, n in 5usize..48, qubit in any::<bool>()) {
        let kind = if qubit { CapacityKind::Qubit } else { CapacityKind::Ebit };
        assert_report(&check_step_bounds(params(lambda, mu), kind, n))?;
    }

    #[test]
    fn rank_and_rectangle_lemmas(
        lambda in 0.1f64..0.95,
        mu in 0.0f64..0.7,
        n in 8usize..64,
        band_frac in 0.0f64..1.0,
        qubit in any::<bool>(),
    ) {
        let band = 1 + (((n - 1) / 2 - 1) as f64 * band_frac) as usize;
        let p = params(lambda, mu);
        assert_report(&check_rank_perturbation(p, n, band))?;
        let kind = if qubit { CapacityKind::Qubit } else { CapacityKind::Ebit };
        assert_report(&check_rectangle_rule(p, kind, n, band))?;
    }

    #[test]
    fn fourier_truncation_bound(lambda in 0.1f64..0.95, mu in 0.0f64..0.7) {
        assert_report(&check_fourier_truncation(params(lambda, mu), &[1, 2], &[1, 2, 4, 8, 16]))?;
    }

    #[test]
    fn sum_consistency_chain(
        lambda in 0.1f64..0.95,
        mu in 0.0f64..0.6,
        n in 4usize..96,
        eps in 0.01f64..0.5,
        kind in kinds(),
    ) {
        let p = params(lambda, mu);
        prop_assume!(kind != CapacityKind::Qubit || positive_q_region(p));
        let budget = ErrorBudget::new(eps).unwrap();
        let raw = nshot_lower_bound(p, n as u64, budget, kind).unwrap().raw_lower;
        let exact = exact_sum_lower_bound(p, n, budget, kind).unwrap();
        let q = asymptotic_capacity(p, kind, 1e-10).unwrap();
        let pen = epsilon_penalty(budget, kind);
        prop_assert!(raw <= exact + SLACK_TOL);
        prop_assert!(exact <= n as f64 * q + pen.abs() + SLACK_TOL);
    }
}

#[test]
fn check_step_bounds_uses_channel_k() {
    assert_eq!(CHANNEL_K, 2);
}
