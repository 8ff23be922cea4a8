//! Library results against reference values computed independently in
//! extended precision (closed forms, numerical differentiation, LAPACK SVD).

use approx::assert_relative_eq;
use serde_json::Value;

use memcap::avram_parter::{capped_test_function, ergodic_average};
use memcap::capacities::{asymptotic_capacity, nshot_lower_bound, uses_needed};
use memcap::symbol::{channel_coefficients, derivative_l2_norm, DEFAULT_COEFF_TOL};
use memcap::toeplitz::{build_toeplitz, channel_spectrum, mode_transmissivities};
use memcap::{CapacityKind, ChannelParams, ErrorBudget};

fn reference() -> Value {
    serde_json::from_str(include_str!("golden/reference.json")).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn params(lambda: f64, mu: f64) -> ChannelParams {
    ChannelParams::new(lambda, mu).unwrap()
}

#[test]
fn toeplitz_corner_order_four() {
    let r = reference();
    let coeffs = channel_coefficients(params(0.5, 0.25), DEFAULT_COEFF_TOL).unwrap();
    let t = build_toeplitz(&coeffs, 4);
    for (i, row) in r["toeplitz_0.5_0.25_n4"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
    {
        for (k, want) in floats(row).into_iter().enumerate() {
            let got = t.entries()[(i, k)];
            assert!(
                (got - want).abs() <= 1e-15,
                "entry ({i},{k}): {got} vs {want}"
            );
        }
    }
}

#[test]
fn mode_transmissivities_order_64() {
    let r = reference();
    let want = floats(&r["spectrum_0.5_0.25_n64"]["transmissivities"]);
    let got = mode_transmissivities(params(0.5, 0.25), 64).unwrap();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
    }
}

#[test]
fn capped_qubit_ergodic_average_order_128() {
    let r = reference();
    let p = params(0.5, 0.25);
    let f = capped_test_function(p, CapacityKind::Qubit).unwrap();
    let avg = ergodic_average(&channel_spectrum(p, 128).unwrap(), &f);
    assert_relative_eq!(
        avg,
        r["ergodic_q_0.5_0.25_n128"].as_f64().unwrap(),
        max_relative = 1e-11
    );
}

#[test]
fn second_derivative_norm() {
    let r = reference();
    let coeffs = channel_coefficients(params(0.5, 0.25), DEFAULT_COEFF_TOL).unwrap();
    assert_relative_eq!(
        derivative_l2_norm(&coeffs, 2).unwrap(),
        r["d2_norm_0.5_0.25"].as_f64().unwrap(),
        max_relative = 1e-10
    );
}

#[test]
fn key_bound_components() {
    let r = &reference()["capacity_0.8_0.2_key_1000_0.05"];
    let p = params(0.8, 0.2);
    let b = nshot_lower_bound(p, 1000, ErrorBudget::new(0.05).unwrap(), CapacityKind::Key).unwrap();
    let q = asymptotic_capacity(p, CapacityKind::Key, 1e-12).unwrap();
    assert_relative_eq!(
        q,
        r["asymptotic_capacity"].as_f64().unwrap(),
        max_relative = 1e-10
    );
    assert_relative_eq!(
        b.components.asymptotic_term,
        r["asymptotic_term"].as_f64().unwrap(),
        max_relative = 1e-10
    );
    assert_relative_eq!(
        b.components.sqrt_term,
        r["sqrt_term"].as_f64().unwrap(),
        max_relative = 1e-12
    );
    assert_relative_eq!(
        b.components.penalty,
        r["penalty"].as_f64().unwrap(),
        max_relative = 1e-13
    );
    assert_relative_eq!(
        b.raw_lower,
        r["raw_lower"].as_f64().unwrap(),
        max_relative = 1e-10
    );
    assert!(b.clamped);
    assert_eq!(b.lower, 0.0);
}

#[test]
fn uses_needed_references() {
    let r = reference();
    let cases = [
        (
            "uses_0.9_0.5_e_0.05_100",
            0.9,
            0.5,
            CapacityKind::Key,
            0.05,
            100.0,
        ),
        (
            "uses_0.8_0.2_q_0.1_50",
            0.8,
            0.2,
            CapacityKind::Qubit,
            0.1,
            50.0,
        ),
    ];
    for (key, l, m, kind, e, k) in cases {
        let n = uses_needed(params(l, m), ErrorBudget::new(e).unwrap(), kind, k).unwrap();
        assert_eq!(n, r[key]["n"].as_u64().unwrap(), "{key}");
    }
}
