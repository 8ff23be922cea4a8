//! Brute-force verification of the identities and inequalities the bounds
//! rest on, evaluated at desk scale.
//!
//! Every check produces a [`CheckReport`]. A case fails when its slack
//! (`bound − value`) is below `−SLACK_TOL`, or, for tolerance checks, when the
//! measured deviation exceeds the stated tolerance. Numerical errors are
//! recorded in the report rather than dropped.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::avram_parter::{
    ap_error_bound, capped_test_function, derivative_sup_from_l2, ergodic_average,
    ergodic_report_with_spectrum, optimal_band, partial_symbol_integral, rectangle_rule_bound,
    step_bounds, symbol_integral, symbol_norms, TestFunction, CHANNEL_K, REPORT_QUAD_TOL,
};
use crate::capacities::{
    asymptotic_capacity, epsilon_penalty, mode_capacity_sum, positive_q_region, theorem1_constant,
    CapacityKind, ErrorBudget, DEFAULT_CAPACITY_TOL,
};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::symbol::{
    channel_coefficients, derivative_l2_norm, effective_transmissivity, max_transmissivity,
    second_derivative_norm_estimate, symbol_eval, ChannelParams, CoefficientSequence,
    DEFAULT_COEFF_TOL,
};
use crate::toeplitz::{build_circulant, build_toeplitz, singular_values, SingularSpectrum};

/// Absolute slack tolerated on every inequality.
pub const SLACK_TOL: f64 = 1e-9;

/// Singular values below this fraction of the largest count as zero in rank tests.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Maximum absolute deviation for the coefficient/FFT comparison.
pub const COEFFICIENT_TOL: f64 = 1e-8;

/// Maximum relative deviation for `|f|² = η`.
pub const IDENTITY_TOL: f64 = 1e-12;

pub const CHECK_NAMES: [&str; 11] = [
    "symbol_coefficients",
    "symbol_identity",
    "second_derivative_estimate",
    "fourier_truncation",
    "norm_bound",
    "rank_perturbation",
    "band_truncation",
    "rectangle_rule",
    "step_bounds",
    "ap_bound",
    "theorem1_consistency",
];

/// Where a case was evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CaseContext {
    pub lambda: f64,
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<CapacityKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
}

impl CaseContext {
    pub fn new(params: ChannelParams) -> Self {
        Self {
            lambda: params.lambda(),
            mu: params.mu(),
            ..Self::default()
        }
    }

    pub fn kind(mut self, kind: CapacityKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn band(mut self, band: usize) -> Self {
        self.band = Some(band);
        self
    }

    pub fn k(mut self, k: u32) -> Self {
        self.k = Some(k);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub label: &'static str,
    #[serde(flatten)]
    pub context: CaseContext,
    pub bound: f64,
    pub value: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseNote {
    #[serde(flatten)]
    pub context: CaseContext,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub cases_run: usize,
    pub cases_failed: usize,
    /// Smallest `bound − value` over all cases; `+∞` when no case ran.
    pub worst_margin: f64,
    pub details: Vec<CaseRecord>,
    /// Numerical errors raised while evaluating a case.
    pub errors: Vec<CaseNote>,
    /// Cases that do not apply, e.g. qubit checks where the capacity vanishes.
    pub skipped: Vec<CaseNote>,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        Self {
            check_name: name.to_string(),
            cases_run: 0,
            cases_failed: 0,
            worst_margin: f64::INFINITY,
            details: Vec::new(),
            errors: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.cases_failed == 0 && self.errors.is_empty()
    }

    fn record(
        &mut self,
        label: &'static str,
        context: CaseContext,
        bound: f64,
        value: f64,
        passed: bool,
    ) {
        let slack = bound - value;
        self.cases_run += 1;
        if !passed {
            self.cases_failed += 1;
        }
        self.worst_margin = self.worst_margin.min(slack);
        self.details.push(CaseRecord {
            label,
            context,
            bound,
            value,
            slack,
            passed,
        });
    }

    /// Records `value ≤ bound` up to [`SLACK_TOL`].
    pub fn inequality(
        &mut self,
        label: &'static str,
        context: CaseContext,
        bound: f64,
        value: f64,
    ) {
        let ok = bound - value >= -SLACK_TOL;
        self.record(label, context, bound, value, ok);
    }

    /// Records `deviation < tolerance`.
    pub fn tolerance(
        &mut self,
        label: &'static str,
        context: CaseContext,
        tolerance: f64,
        deviation: f64,
    ) {
        let ok = deviation < tolerance;
        self.record(label, context, tolerance, deviation, ok);
    }

    pub fn error(&mut self, context: CaseContext, err: &Error) {
        self.errors.push(CaseNote {
            context,
            message: format!("{}: {err}", err.kind()),
        });
    }

    pub fn skip(&mut self, context: CaseContext, reason: impl Into<String>) {
        self.skipped.push(CaseNote {
            context,
            message: reason.into(),
        });
    }

    /// Appends `other`'s cases; both must be the same check.
    pub fn absorb(&mut self, other: CheckReport) {
        debug_assert_eq!(self.check_name, other.check_name);
        self.cases_run += other.cases_run;
        self.cases_failed += other.cases_failed;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        self.details.extend(other.details);
        self.errors.extend(other.errors);
        self.skipped.extend(other.skipped);
    }
}

/// Runs `body`, recording any error it raises against `context`.
fn guarded<F>(report: &mut CheckReport, context: CaseContext, body: F)
where
    F: FnOnce(&mut CheckReport) -> Result<()>,
{
    if let Err(e) = body(report) {
        report.error(context, &e);
    }
}

fn coefficients(params: ChannelParams) -> Result<CoefficientSequence> {
    channel_coefficients(params, DEFAULT_COEFF_TOL)
}

fn spectrum_of(coeffs: &CoefficientSequence, n: usize) -> Result<SingularSpectrum> {
    singular_values(&build_toeplitz(coeffs, n))
}

/// Test function for `kind`, or a skip note when the qubit capacity vanishes.
fn test_function(
    report: &mut CheckReport,
    params: ChannelParams,
    kind: CapacityKind,
    context: CaseContext,
) -> Option<TestFunction> {
    match capped_test_function(params, kind) {
        Ok(f) => Some(f),
        Err(Error::ZeroCapacityRegion { max_transmissivity }) => {
            report.skip(
                context,
                format!("zero-capacity region: M = {max_transmissivity} <= 1/2"),
            );
            None
        }
        Err(e) => {
            report.error(context, &e);
            None
        }
    }
}

/// Smallest power of two above `4J`, and at least 64.
pub fn default_fft_size(coeffs: &CoefficientSequence) -> usize {
    (4 * coeffs.truncation_index() + 1)
        .next_power_of_two()
        .max(64)
}

/// Inverse DFT of closed-form symbol samples against the recurrence coefficients.
pub fn check_symbol_coefficients(params: ChannelParams, grid_size: usize) -> CheckReport {
    let mut report = CheckReport::new("symbol_coefficients");
    let ctx = CaseContext::new(params).n(grid_size);
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        let j_max = coeffs.truncation_index();
        if !grid_size.is_power_of_two() || grid_size <= 4 * j_max {
            return Err(Error::Domain(format!(
                "FFT grid {grid_size} must be a power of two above 4J = {}",
                4 * j_max
            )));
        }
        let mut buf: Vec<Complex64> = (0..grid_size)
            .map(|m| symbol_eval(params, 2.0 * PI * m as f64 / grid_size as f64))
            .collect();
        FftPlanner::new()
            .plan_fft_forward(grid_size)
            .process(&mut buf);
        let scale = 1.0 / grid_size as f64;
        let deviation = buf
            .iter()
            .enumerate()
            .map(|(j, c)| (c * scale - coeffs.get(j as i64)).norm())
            .fold(0.0, f64::max);
        r.tolerance("max |dft_j - a_j|", ctx, COEFFICIENT_TOL, deviation);
        Ok(())
    });
    report
}

/// `| |f(θ)|² − η(θ) | / η(θ)` on a low-discrepancy set of angles.
pub fn check_symbol_identity(params: ChannelParams, samples: usize) -> CheckReport {
    let mut report = CheckReport::new("symbol_identity");
    // golden-ratio sequence: deterministic and equidistributed
    let step = (5f64.sqrt() - 1.0) / 2.0;
    let worst = (0..samples)
        .map(|i| {
            let theta = 2.0 * PI * ((i as f64 + 0.5) * step).fract();
            let eta = effective_transmissivity(params, theta);
            (symbol_eval(params, theta).norm_sqr() - eta).abs() / eta
        })
        .fold(0.0, f64::max);
    report.tolerance(
        "max relative | |f|^2 - eta |",
        CaseContext::new(params).n(samples),
        IDENTITY_TOL,
        worst,
    );
    report
}

/// `‖f''‖₂` against its closed-form majorant.
pub fn check_second_derivative_estimate(params: ChannelParams) -> CheckReport {
    let mut report = CheckReport::new("second_derivative_estimate");
    let ctx = CaseContext::new(params).k(2);
    guarded(&mut report, ctx, |r| {
        let norm = derivative_l2_norm(&coefficients(params)?, 2)?;
        r.inequality(
            "||f''|| <= estimate",
            ctx,
            second_derivative_norm_estimate(params),
            norm,
        );
        Ok(())
    });
    report
}

/// `‖f − f_N‖₂ ≤ ‖f^{(k)}‖₂ / N^k`, with the left side by quadrature.
pub fn check_fourier_truncation(
    params: ChannelParams,
    k_list: &[u32],
    bands: &[usize],
) -> CheckReport {
    let mut report = CheckReport::new("fourier_truncation");
    let coeffs = match coefficients(params) {
        Ok(c) => c,
        Err(e) => {
            report.error(CaseContext::new(params), &e);
            return report;
        }
    };
    for &band in bands {
        let ctx = CaseContext::new(params).band(band);
        let bounds = match k_list
            .iter()
            .map(|&k| {
                Ok((
                    k,
                    derivative_l2_norm(&coeffs, k)? / (band as f64).powi(k as i32),
                ))
            })
            .collect::<Result<Vec<_>>>()
        {
            Ok(b) => b,
            Err(e) => {
                report.error(ctx, &e);
                continue;
            }
        };
        // Resolve the squared distance well below the smallest bound it is compared to.
        let smallest = bounds.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
        let tol = (1e-10 * smallest * smallest).max(1e-30);
        let partial = coeffs.truncated(band);
        let distance = quadrature::integrate(
            |t| (symbol_eval(params, t) - partial.eval(t)).norm_sqr(),
            0.0,
            PI,
            &[],
            tol,
        )
        .map(|q| (2.0 * q.value.max(0.0)).sqrt());
        match distance {
            Ok(d) => {
                for (k, bound) in bounds {
                    report.inequality("||f - f_N|| <= ||f^(k)|| / N^k", ctx.k(k), bound, d);
                }
            }
            Err(e) => report.error(ctx, &e),
        }
    }
    report
}

fn norm_bound_cases(
    report: &mut CheckReport,
    params: ChannelParams,
    coeffs: &CoefficientSequence,
    spectra: &[(usize, SingularSpectrum)],
) {
    let sup = max_transmissivity(params).sqrt();
    let ctx0 = CaseContext::new(params);
    guarded(report, ctx0, |r| {
        let norm_s = derivative_l2_norm(coeffs, 0)?;
        for (n, spectrum) in spectra {
            let ctx = ctx0.n(*n);
            r.inequality("s_max <= sqrt(M)", ctx, sup, spectrum.largest());
            let frob = spectrum.squares().iter().sum::<f64>().sqrt();
            let bound = (*n as f64 / (2.0 * PI)).sqrt() * norm_s;
            r.inequality("||T_n||_2 <= sqrt(n/2pi) ||f||_2", ctx, bound, frob);
        }
        Ok(())
    });
}

/// Operator and Hilbert–Schmidt norms of `T_n` against symbol norms.
pub fn check_norm_bound(params: ChannelParams, n_list: &[usize]) -> CheckReport {
    let mut report = CheckReport::new("norm_bound");
    let ctx = CaseContext::new(params);
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        let spectra = n_list
            .iter()
            .map(|&n| Ok((n, spectrum_of(&coeffs, n)?)))
            .collect::<Result<Vec<_>>>()?;
        norm_bound_cases(r, params, &coeffs, &spectra);
        Ok(())
    });
    report
}

/// `rank(T_n(f_N) − C_n(f_N)) ≤ 2N` and the ergodic gap `≤ 2N ‖F'‖₁ / n`.
pub fn check_rank_perturbation(params: ChannelParams, n: usize, band: usize) -> CheckReport {
    let mut report = CheckReport::new("rank_perturbation");
    let ctx = CaseContext::new(params).n(n).band(band);
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        let banded = build_toeplitz(&coeffs.truncated(band), n);
        let circ = build_circulant(&coeffs, band, n)?;
        let diff = banded.entries() - circ.entries();
        let diff_sv = diff.singular_values();
        let top = diff_sv.max();
        let rank = diff_sv
            .iter()
            .filter(|&&s| s > RANK_THRESHOLD * top)
            .count();
        let rank = if top == 0.0 { 0 } else { rank };
        r.inequality(
            "rank(T_n(f_N) - C_n(f_N)) <= 2N",
            ctx,
            (2 * band) as f64,
            rank as f64,
        );

        let s_t = singular_values(&banded)?;
        let s_c = singular_values(&circ)?;
        for kind in [CapacityKind::Qubit, CapacityKind::Ebit] {
            let kctx = ctx.kind(kind);
            if let Some(f) = test_function(r, params, kind, kctx) {
                let gap = (ergodic_average(&s_t, &f) - ergodic_average(&s_c, &f)).abs();
                let bound = 2.0 * band as f64 * f.derivative_l1 / n as f64;
                r.inequality("|avg_T - avg_C| <= 2N ||F'||_1 / n", kctx, bound, gap);
            }
        }
        Ok(())
    });
    report
}

/// Steps one and four: replacing `f` by `f_N` on the matrix and symbol sides.
pub fn check_band_truncation(
    params: ChannelParams,
    kind: CapacityKind,
    n: usize,
    band: usize,
) -> CheckReport {
    let mut report = CheckReport::new("band_truncation");
    let ctx = CaseContext::new(params)
        .kind(kind)
        .n(n)
        .band(band)
        .k(CHANNEL_K);
    let Some(f) = test_function(&mut report, params, kind, ctx) else {
        return report;
    };
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        let full = spectrum_of(&coeffs, n)?;
        band_truncation_cases(r, params, &f, &coeffs, &full, band, ctx)
    });
    report
}

fn band_truncation_cases(
    report: &mut CheckReport,
    params: ChannelParams,
    f: &TestFunction,
    coeffs: &CoefficientSequence,
    full: &SingularSpectrum,
    band: usize,
    ctx: CaseContext,
) -> Result<()> {
    let n = full.len();
    let norms = symbol_norms(coeffs, CHANNEL_K)?;
    let steps = step_bounds(
        n,
        band,
        CHANNEL_K,
        f.lipschitz,
        norms.norm_sk,
        norms.norm_s,
        f.derivative_l1,
        f.sup_norm,
    )?;
    let partial = coeffs.truncated(band);
    let banded = spectrum_of(&partial, n)?;
    let gap = (ergodic_average(full, f) - ergodic_average(&banded, f)).abs();
    report.inequality("|avg T_n(f) - avg T_n(f_N)| <= c1", ctx, steps.c1, gap);
    let int_full = symbol_integral(params, f, REPORT_QUAD_TOL)?;
    let int_partial = partial_symbol_integral(&partial, f, REPORT_QUAD_TOL)?;
    report.inequality(
        "|int F(|f_N|) - int F(|f|)| <= c4",
        ctx,
        steps.c4,
        (int_full - int_partial).abs(),
    );
    Ok(())
}

/// Step three: circulant samples against the integral of `f_N`.
pub fn check_rectangle_rule(
    params: ChannelParams,
    kind: CapacityKind,
    n: usize,
    band: usize,
) -> CheckReport {
    let mut report = CheckReport::new("rectangle_rule");
    let ctx = CaseContext::new(params).kind(kind).n(n).band(band);
    let Some(f) = test_function(&mut report, params, kind, ctx) else {
        return report;
    };
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        rectangle_rule_cases(r, &f, &coeffs, n, band, ctx)
    });
    report
}

fn rectangle_rule_cases(
    report: &mut CheckReport,
    f: &TestFunction,
    coeffs: &CoefficientSequence,
    n: usize,
    band: usize,
    ctx: CaseContext,
) -> Result<()> {
    let circ = build_circulant(coeffs, band, n)?;
    let partial = coeffs.truncated(band);
    let samples = circ.symbol_samples();
    let avg = samples.iter().map(|&s| f.eval(s)).sum::<f64>() / n as f64;
    let integral = partial_symbol_integral(&partial, f, REPORT_QUAD_TOL)?;
    let sup_deriv = partial.derivative_sup_bound();
    let bound = rectangle_rule_bound(n, band, f.lipschitz, sup_deriv, f.sup_norm);
    report.inequality(
        "|avg C_n(f_N) - int F(|f_N|)| <= rectangle bound",
        ctx,
        bound,
        (avg - integral).abs(),
    );
    let sup_bound = derivative_sup_from_l2(band, derivative_l2_norm(coeffs, 0)?);
    report.inequality(
        "sum |j a_j| <= sqrt(4pi) N^1.5 ||f||_2",
        ctx,
        sup_bound,
        sup_deriv,
    );
    // The circulant's singular values are the samples themselves.
    let svd = singular_values(&circ)?;
    let mut sorted = samples;
    sorted.sort_by(f64::total_cmp);
    let dev = svd
        .values()
        .iter()
        .zip(&sorted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report.tolerance(
        "sigma(C_n(f_N)) = |f_N(2 pi i/n)|",
        ctx,
        1e-10 * svd.largest().max(1.0),
        dev,
    );
    Ok(())
}

/// For every `1 ≤ N < n/2`, the ergodic error is below the four-step total;
/// at the optimal band the total is below the closed-form bound.
pub fn check_step_bounds(params: ChannelParams, kind: CapacityKind, n: usize) -> CheckReport {
    let mut report = CheckReport::new("step_bounds");
    let ctx = CaseContext::new(params).kind(kind).n(n).k(CHANNEL_K);
    let Some(f) = test_function(&mut report, params, kind, ctx) else {
        return report;
    };
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        let spectrum = spectrum_of(&coeffs, n)?;
        step_bound_cases(r, params, &f, &coeffs, &spectrum, ctx)
    });
    report
}

fn step_bound_cases(
    report: &mut CheckReport,
    params: ChannelParams,
    f: &TestFunction,
    coeffs: &CoefficientSequence,
    spectrum: &SingularSpectrum,
    ctx: CaseContext,
) -> Result<()> {
    let n = spectrum.len();
    let norms = symbol_norms(coeffs, CHANNEL_K)?;
    let error = (ergodic_average(spectrum, f) - symbol_integral(params, f, REPORT_QUAD_TOL)?).abs();
    let steps_at = |band| {
        step_bounds(
            n,
            band,
            CHANNEL_K,
            f.lipschitz,
            norms.norm_sk,
            norms.norm_s,
            f.derivative_l1,
            f.sup_norm,
        )
    };
    for band in 1..=(n - 1) / 2 {
        report.inequality(
            "ergodic error <= c1+c2+c3+c4",
            ctx.band(band),
            steps_at(band)?.total,
            error,
        );
    }
    let best = optimal_band(n, CHANNEL_K)?;
    let closed_form = ap_error_bound(
        n,
        CHANNEL_K,
        f.lipschitz,
        norms.norm_sk,
        norms.norm_s,
        f.derivative_l1,
        f.sup_norm,
    )?;
    report.inequality(
        "step total at optimal N <= closed-form bound",
        ctx.band(best),
        closed_form,
        steps_at(best)?.total,
    );
    Ok(())
}

/// The explicit convergence bound against the empirical ergodic error.
pub fn check_ap_bound(params: ChannelParams, kind: CapacityKind, n_list: &[usize]) -> CheckReport {
    let mut report = CheckReport::new("ap_bound");
    let ctx = CaseContext::new(params).kind(kind);
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        let spectra = n_list
            .iter()
            .map(|&n| Ok((n, spectrum_of(&coeffs, n)?)))
            .collect::<Result<Vec<_>>>()?;
        ap_bound_cases(r, params, kind, &coeffs, &spectra);
        Ok(())
    });
    report
}

fn ap_bound_cases(
    report: &mut CheckReport,
    params: ChannelParams,
    kind: CapacityKind,
    coeffs: &CoefficientSequence,
    spectra: &[(usize, SingularSpectrum)],
) {
    for (n, spectrum) in spectra {
        let ctx = CaseContext::new(params).kind(kind).n(*n).k(CHANNEL_K);
        if *n < 4 {
            report.skip(ctx, "bound needs n >= 4");
            continue;
        }
        if kind.canonical() == CapacityKind::Qubit && !positive_q_region(params) {
            report.skip(ctx, "zero-capacity region: M <= 1/2");
            continue;
        }
        match ergodic_report_with_spectrum(params, kind, coeffs, spectrum) {
            Ok(rep) => report.inequality(
                "ergodic error <= closed-form bound",
                ctx,
                rep.theoretical_bound,
                rep.empirical_error,
            ),
            Err(e) => report.error(ctx, &e),
        }
    }
}

/// `Σ g(η_i) ≥ nQ − √n C` and `Σ g(η_i) − p ≤ nQ + |p|` from SVD transmissivities.
pub fn check_theorem1_consistency(
    params: ChannelParams,
    kind: CapacityKind,
    eps: ErrorBudget,
    n_list: &[usize],
) -> CheckReport {
    let mut report = CheckReport::new("theorem1_consistency");
    let ctx = CaseContext::new(params).kind(kind);
    guarded(&mut report, ctx, |r| {
        let coeffs = coefficients(params)?;
        let spectra = n_list
            .iter()
            .map(|&n| Ok((n, spectrum_of(&coeffs, n)?)))
            .collect::<Result<Vec<_>>>()?;
        theorem1_cases(r, params, kind, eps, &spectra)
    });
    report
}

fn theorem1_cases(
    report: &mut CheckReport,
    params: ChannelParams,
    kind: CapacityKind,
    eps: ErrorBudget,
    spectra: &[(usize, SingularSpectrum)],
) -> Result<()> {
    let ctx0 = CaseContext::new(params).kind(kind);
    if kind.canonical() == CapacityKind::Qubit && !positive_q_region(params) {
        report.skip(ctx0, "zero-capacity region: M <= 1/2");
        return Ok(());
    }
    let rate = asymptotic_capacity(params, kind, DEFAULT_CAPACITY_TOL)?;
    let constant = theorem1_constant(params, kind)?;
    let penalty = epsilon_penalty(eps, kind);
    for (n, spectrum) in spectra {
        let ctx = ctx0.n(*n);
        if *n < 4 {
            report.skip(ctx, "bound needs n >= 4");
            continue;
        }
        let nf = *n as f64;
        let sum = mode_capacity_sum(&spectrum.squares(), kind);
        report.inequality(
            "nQ - sqrt(n) C <= sum g(eta_i)",
            ctx,
            sum,
            nf * rate - nf.sqrt() * constant,
        );
        report.inequality(
            "sum g(eta_i) - p <= nQ + |p|",
            ctx,
            nf * rate + penalty.abs(),
            sum - penalty,
        );
    }
    Ok(())
}

/// Parameter grid for [`run_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    /// Matrix orders for the spectral checks.
    pub ns: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Band half-widths for the rank, truncation and rectangle-rule checks.
    #[serde(default = "default_bands")]
    pub bands: Vec<usize>,
    /// Orders up to which every band `1 ≤ N < n/2` is tried in the step check.
    #[serde(default = "default_step_max_n")]
    pub step_max_n: usize,
    #[serde(default = "default_fourier_ks")]
    pub fourier_ks: Vec<u32>,
    #[serde(default = "default_fourier_bands")]
    pub fourier_bands: Vec<usize>,
    #[serde(default = "default_identity_samples")]
    pub identity_samples: usize,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_bands() -> Vec<usize> {
    vec![1, 4, 8]
}

fn default_step_max_n() -> usize {
    64
}

fn default_fourier_ks() -> Vec<u32> {
    vec![1, 2]
}

fn default_fourier_bands() -> Vec<usize> {
    vec![1, 2, 4, 8, 16]
}

fn default_identity_samples() -> usize {
    1000
}

/// Problems with a grid description.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("cannot parse grid file: {0}")]
    Parse(String),
    #[error("grid field `{0}` must not be empty")]
    Empty(&'static str),
}

impl GridConfig {
    fn with(lambdas: &[f64], mus: &[f64], ns: &[usize]) -> Self {
        Self {
            lambdas: lambdas.to_vec(),
            mus: mus.to_vec(),
            ns: ns.to_vec(),
            epsilon: default_epsilon(),
            bands: default_bands(),
            step_max_n: default_step_max_n(),
            fourier_ks: default_fourier_ks(),
            fourier_bands: default_fourier_bands(),
            identity_samples: default_identity_samples(),
        }
    }

    /// A few seconds of work.
    pub fn quick() -> Self {
        Self::with(&[0.5, 0.9], &[0.0, 0.25], &[4, 16, 64])
    }

    /// λ ∈ {0.3, 0.5, 0.7, 0.9}, μ ∈ {0, 0.1, 0.25, 0.5}, n ∈ {4, 16, 64, 256}.
    pub fn full() -> Self {
        Self::with(
            &[0.3, 0.5, 0.7, 0.9],
            &[0.0, 0.1, 0.25, 0.5],
            &[4, 16, 64, 256],
        )
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, GridError> {
        let grid: Self = toml::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> std::result::Result<(), GridError> {
        if self.lambdas.is_empty() {
            return Err(GridError::Empty("lambdas"));
        }
        if self.mus.is_empty() {
            return Err(GridError::Empty("mus"));
        }
        if self.ns.is_empty() {
            return Err(GridError::Empty("ns"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Vec<ChannelParams>> {
        let mut out = Vec::new();
        for &l in &self.lambdas {
            for &m in &self.mus {
                out.push(ChannelParams::new(l, m)?);
            }
        }
        Ok(out)
    }
}

fn empty_reports() -> BTreeMap<&'static str, CheckReport> {
    CHECK_NAMES
        .iter()
        .map(|&name| (name, CheckReport::new(name)))
        .collect()
}

/// All checks for one parameter pair, sharing coefficients and spectra.
fn run_params(
    params: ChannelParams,
    grid: &GridConfig,
    eps: ErrorBudget,
) -> BTreeMap<&'static str, CheckReport> {
    let mut out = empty_reports();
    let ctx = CaseContext::new(params);

    out.get_mut("symbol_identity")
        .unwrap()
        .absorb(check_symbol_identity(params, grid.identity_samples));
    out.get_mut("second_derivative_estimate")
        .unwrap()
        .absorb(check_second_derivative_estimate(params));
    out.get_mut("fourier_truncation")
        .unwrap()
        .absorb(check_fourier_truncation(
            params,
            &grid.fourier_ks,
            &grid.fourier_bands,
        ));

    let coeffs = match coefficients(params) {
        Ok(c) => c,
        Err(e) => {
            for report in out.values_mut() {
                report.error(ctx, &e);
            }
            return out;
        }
    };
    out.get_mut("symbol_coefficients")
        .unwrap()
        .absorb(check_symbol_coefficients(params, default_fft_size(&coeffs)));

    let spectra: Vec<(usize, SingularSpectrum)> = match grid
        .ns
        .iter()
        .map(|&n| Ok((n, spectrum_of(&coeffs, n)?)))
        .collect::<Result<Vec<_>>>()
    {
        Ok(s) => s,
        Err(e) => {
            for name in [
                "norm_bound",
                "ap_bound",
                "theorem1_consistency",
                "step_bounds",
            ] {
                out.get_mut(name).unwrap().error(ctx, &e);
            }
            Vec::new()
        }
    };

    norm_bound_cases(
        out.get_mut("norm_bound").unwrap(),
        params,
        &coeffs,
        &spectra,
    );

    for &n in &grid.ns {
        for &band in grid.bands.iter().filter(|&&b| b >= 1 && 2 * b < n) {
            out.get_mut("rank_perturbation")
                .unwrap()
                .absorb(check_rank_perturbation(params, n, band));
        }
    }

    for kind in [CapacityKind::Qubit, CapacityKind::Ebit] {
        ap_bound_cases(
            out.get_mut("ap_bound").unwrap(),
            params,
            kind,
            &coeffs,
            &spectra,
        );

        let report = out.get_mut("theorem1_consistency").unwrap();
        if let Err(e) = theorem1_cases(report, params, kind, eps, &spectra) {
            report.error(ctx.kind(kind), &e);
        }

        for (n, spectrum) in &spectra {
            let n = *n;
            if n < 4 {
                continue;
            }
            let kctx = ctx.kind(kind).n(n);
            let mut probe = CheckReport::new("step_bounds");
            let Some(f) = test_function(&mut probe, params, kind, kctx) else {
                out.get_mut("step_bounds").unwrap().absorb(probe);
                continue;
            };
            if n <= grid.step_max_n {
                let report = out.get_mut("step_bounds").unwrap();
                if let Err(e) =
                    step_bound_cases(report, params, &f, &coeffs, spectrum, kctx.k(CHANNEL_K))
                {
                    report.error(kctx, &e);
                }
            }
            for &band in grid.bands.iter().filter(|&&b| b >= 1 && 2 * b < n) {
                let bctx = kctx.band(band);
                let report = out.get_mut("band_truncation").unwrap();
                if let Err(e) = band_truncation_cases(
                    report,
                    params,
                    &f,
                    &coeffs,
                    spectrum,
                    band,
                    bctx.k(CHANNEL_K),
                ) {
                    report.error(bctx, &e);
                }
                let report = out.get_mut("rectangle_rule").unwrap();
                if let Err(e) = rectangle_rule_cases(report, &f, &coeffs, n, band, bctx) {
                    report.error(bctx, &e);
                }
            }
        }
    }
    out
}

/// Runs every check over the grid; reports come back in [`CHECK_NAMES`] order.
pub fn run_all(grid: &GridConfig) -> Result<Vec<CheckReport>> {
    let eps = ErrorBudget::new(grid.epsilon)?;
    let params = grid.params()?;
    let per_params: Vec<BTreeMap<&'static str, CheckReport>> = params
        .par_iter()
        .map(|&p| run_params(p, grid, eps))
        .collect();
    let mut merged = empty_reports();
    for mut partial in per_params {
        for (name, report) in merged.iter_mut() {
            report.absorb(partial.remove(name).expect("every check present"));
        }
    }
    Ok(CHECK_NAMES
        .iter()
        .map(|name| merged.remove(name).expect("every check present"))
        .collect())
}
