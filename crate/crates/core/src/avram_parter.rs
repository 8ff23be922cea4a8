//! Ergodic averages over singular spectra, symbol-side integrals and the
//! explicit Avram–Parter convergence bound with its four-step decomposition.

use std::f64::consts::{LOG2_E, PI};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::capacities::{capacity_of, CapacityKind};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::symbol::{
    channel_coefficients, derivative_l2_norm, effective_transmissivity, max_transmissivity,
    transmissivity_level_angle, ChannelParams, CoefficientSequence, DEFAULT_COEFF_TOL,
};
use crate::toeplitz::{build_toeplitz, singular_values, SingularSpectrum};

/// Derivative order used for every channel-facing report.
pub const CHANNEL_K: u32 = 2;

/// Absolute tolerance for symbol integrals inside reports.
pub const REPORT_QUAD_TOL: f64 = 1e-12;

// Grid resolution for locating level crossings of a truncated symbol.
const CROSSING_SCAN_POINTS: usize = 2048;

/// A real, compactly supported Lipschitz test function with its constants.
#[derive(Clone)]
pub struct TestFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lipschitz: f64,
    pub sup_norm: f64,
    pub derivative_l1: f64,
    pub support_upper: f64,
    /// Points where `F` is not differentiable.
    pub kinks: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("lipschitz", &self.lipschitz)
            .field("sup_norm", &self.sup_norm)
            .field("derivative_l1", &self.derivative_l1)
            .field("support_upper", &self.support_upper)
            .field("kinks", &self.kinks)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new<F>(
        eval: F,
        lipschitz: f64,
        sup_norm: f64,
        derivative_l1: f64,
        support_upper: f64,
    ) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            lipschitz,
            sup_norm,
            derivative_l1,
            support_upper,
            kinks: Vec::new(),
        }
    }

    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

/// `(1/n) Σ_j F(s_j)`.
pub fn ergodic_average(spectrum: &SingularSpectrum, f: &TestFunction) -> f64 {
    let values = spectrum.values();
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|&s| f.eval(s)).sum::<f64>() / values.len() as f64
}

/// `(1/2π) ∫₀^{2π} F(|f(θ)|) dθ` for the closed-form channel symbol.
///
/// The integrand is even about `θ = π`, so only `[0, π]` is integrated. Each
/// kink of `F` becomes a breakpoint at the angle where `|f|` crosses it.
pub fn symbol_integral(params: ChannelParams, f: &TestFunction, tol: f64) -> Result<f64> {
    check_tolerance(tol)?;
    if params.mu() == 0.0 {
        return Ok(f.eval(params.lambda().sqrt()));
    }
    let breaks: Vec<f64> = f
        .kinks
        .iter()
        .filter_map(|&x| transmissivity_level_angle(params, x * x))
        .collect();
    let r = quadrature::integrate(
        |t| f.eval(effective_transmissivity(params, t).sqrt()),
        0.0,
        PI,
        &breaks,
        tol * PI,
    )?;
    Ok(r.value / PI)
}

/// `(1/2π) ∫₀^{2π} F(|f_N(θ)|) dθ` for a finite coefficient sequence.
///
/// Kink crossings are located by a grid scan followed by bisection.
pub fn partial_symbol_integral(
    coeffs: &CoefficientSequence,
    f: &TestFunction,
    tol: f64,
) -> Result<f64> {
    check_tolerance(tol)?;
    let modulus = |t: f64| coeffs.eval(t).norm();
    let breaks = level_crossings(&modulus, &f.kinks, 0.0, PI, CROSSING_SCAN_POINTS);
    let r = quadrature::integrate(|t| f.eval(modulus(t)), 0.0, PI, &breaks, tol * PI)?;
    Ok(r.value / PI)
}

fn check_tolerance(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            range: "(0, inf)",
        })
    }
}

/// Angles in `[a, b]` where `g` crosses any of `levels`.
fn level_crossings<G: Fn(f64) -> f64>(
    g: &G,
    levels: &[f64],
    a: f64,
    b: f64,
    samples: usize,
) -> Vec<f64> {
    let mut roots = Vec::new();
    if levels.is_empty() {
        return roots;
    }
    let h = (b - a) / samples as f64;
    let mut prev_t = a;
    let mut prev_g = g(a);
    for i in 1..=samples {
        let t = if i == samples { b } else { a + h * i as f64 };
        let gt = g(t);
        for &level in levels {
            if (prev_g - level) * (gt - level) < 0.0 {
                roots.push(bisect(g, level, prev_t, t));
            }
        }
        prev_t = t;
        prev_g = gt;
    }
    roots
}

fn bisect<G: Fn(f64) -> f64>(g: &G, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    let lo_sign = g(lo) - level > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) - level > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn require_n_at_least_four(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Domain(format!(
            "the explicit convergence bound needs n >= 4, got n = {n}"
        )));
    }
    Ok(())
}

fn require_k_positive(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain(
            "derivative order k must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Explicit bound on `|(1/n) Σ F(s_j) − (1/2π) ∫ F(|s|)|`:
///
/// ```text
/// (2^{k+1} ‖s^{(k)}‖ L / √(2π) + 4π L ‖s‖) n^{-k/(k+3/2)}
///     + (2 ‖F'‖₁ + 4 ‖F‖∞) n^{-(k+1/2)/(k+3/2)}
/// ```
#[allow(clippy::too_many_arguments)]
pub fn ap_error_bound(
    n: usize,
    k: u32,
    lipschitz: f64,
    norm_sk: f64,
    norm_s: f64,
    norm_fp1: f64,
    norm_finf: f64,
) -> Result<f64> {
    require_n_at_least_four(n)?;
    require_k_positive(k)?;
    let kf = k as f64;
    let nf = n as f64;
    let denom = kf + 1.5;
    let lead = 2f64.powi(k as i32 + 1) * norm_sk * lipschitz / (2.0 * PI).sqrt()
        + 4.0 * PI * lipschitz * norm_s;
    let tail = 2.0 * norm_fp1 + 4.0 * norm_finf;
    Ok(lead * nf.powf(-kf / denom) + tail * nf.powf(-(kf + 0.5) / denom))
}

/// `N = ⌊n^{1/(k+3/2)}⌋`, computed exactly as the largest `N` with
/// `N^{2k+3} ≤ n²`.
pub fn optimal_band(n: usize, k: u32) -> Result<usize> {
    require_n_at_least_four(n)?;
    require_k_positive(k)?;
    let exp = 2 * k + 3;
    let target = (n as u128) * (n as u128);
    let fits = |band: usize| match (band as u128).checked_pow(exp) {
        Some(p) => p <= target,
        None => false,
    };
    let mut band = (n as f64).powf(1.0 / (k as f64 + 1.5)).floor() as usize;
    while band > 0 && !fits(band) {
        band -= 1;
    }
    while fits(band + 1) {
        band += 1;
    }
    Ok(band)
}

/// The four error contributions of the banded/circulant argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepBounds {
    /// Toeplitz of `f` to Toeplitz of `f_N`.
    pub c1: f64,
    /// Banded Toeplitz to circulant (rank perturbation).
    pub c2: f64,
    /// Circulant samples to the integral of `f_N` (rectangle rule).
    pub c3: f64,
    /// Integral of `f_N` to the integral of `f`.
    pub c4: f64,
    pub total: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn step_bounds(
    n: usize,
    band: usize,
    k: u32,
    lipschitz: f64,
    norm_sk: f64,
    norm_s: f64,
    norm_fp1: f64,
    norm_finf: f64,
) -> Result<StepBounds> {
    if 2 * band >= n {
        return Err(Error::BandTooWide { band, n });
    }
    if band == 0 {
        return Err(Error::Domain("band half-width N must be at least 1".into()));
    }
    let nf = n as f64;
    let bf = band as f64;
    let c1 = lipschitz * norm_sk / ((2.0 * PI).sqrt() * bf.powi(k as i32));
    let c2 = 2.0 * bf * norm_fp1 / nf;
    let c3 = 4.0 * bf.powf(1.5) * PI * lipschitz * norm_s / nf + 4.0 * bf * norm_finf / nf;
    let c4 = c1;
    Ok(StepBounds {
        c1,
        c2,
        c3,
        c4,
        total: c1 + c2 + c3 + c4,
    })
}

/// Rectangle-rule bound `π L ‖f_N'‖∞ / n + 4 N ‖F‖∞ / n`.
pub fn rectangle_rule_bound(
    n: usize,
    band: usize,
    lipschitz: f64,
    derivative_sup: f64,
    norm_finf: f64,
) -> f64 {
    let nf = n as f64;
    PI * lipschitz * derivative_sup / nf + 4.0 * band as f64 * norm_finf / nf
}

/// `√(4π) N^{3/2} ‖f‖₂`, the coefficient-side bound on `‖f_N'‖∞`.
pub fn derivative_sup_from_l2(band: usize, norm_s: f64) -> f64 {
    (4.0 * PI).sqrt() * (band as f64).powf(1.5) * norm_s
}

/// `F(x) = g(x²)` up to `√M`, then a linear descent of slope `-L` to zero,
/// with `g` the pure-loss capacity of the given kind.
pub fn capped_test_function(params: ChannelParams, kind: CapacityKind) -> Result<TestFunction> {
    let m = max_transmissivity(params);
    let cap = m.sqrt();
    let kind = kind.canonical();
    let (lipschitz, height) = match kind {
        CapacityKind::Qubit => {
            if m <= 0.5 {
                return Err(Error::ZeroCapacityRegion {
                    max_transmissivity: m,
                });
            }
            (2.0 * LOG2_E / (cap * (1.0 - m)), (m / (1.0 - m)).log2())
        }
        _ => (2.0 * LOG2_E * cap / (1.0 - m), -(-m).ln_1p() * LOG2_E),
    };
    let support_upper = cap + height / lipschitz;
    let eval = move |x: f64| {
        if x <= 0.0 {
            0.0
        } else if x <= cap {
            capacity_of(x * x, kind)
        } else if x < support_upper {
            height - lipschitz * (x - cap)
        } else {
            0.0
        }
    };
    let mut kinks = vec![cap, support_upper];
    if kind == CapacityKind::Qubit {
        kinks.insert(0, std::f64::consts::FRAC_1_SQRT_2);
    }
    Ok(TestFunction::new(eval, lipschitz, height, 2.0 * height, support_upper).with_kinks(kinks))
}

/// `‖f‖₂` and `‖f^{(k)}‖₂` of the channel symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolNorms {
    pub k: u32,
    pub norm_s: f64,
    pub norm_sk: f64,
}

pub fn symbol_norms(coeffs: &CoefficientSequence, k: u32) -> Result<SymbolNorms> {
    Ok(SymbolNorms {
        k,
        norm_s: derivative_l2_norm(coeffs, 0)?,
        norm_sk: derivative_l2_norm(coeffs, k)?,
    })
}

/// Empirical vs. theoretical ergodic error for one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErgodicReport {
    pub n: usize,
    pub sample_average: f64,
    pub symbol_integral: f64,
    pub empirical_error: f64,
    pub theoretical_bound: f64,
    pub bound_respected: bool,
}

impl ErgodicReport {
    /// `theoretical_bound − empirical_error`.
    pub fn slack(&self) -> f64 {
        self.theoretical_bound - self.empirical_error
    }
}

pub fn ergodic_report(
    params: ChannelParams,
    kind: CapacityKind,
    n: usize,
) -> Result<ErgodicReport> {
    require_n_at_least_four(n)?;
    let coeffs = channel_coefficients(params, DEFAULT_COEFF_TOL)?;
    let spectrum = singular_values(&build_toeplitz(&coeffs, n))?;
    ergodic_report_with_spectrum(params, kind, &coeffs, &spectrum)
}

/// Same as [`ergodic_report`] with the coefficients and spectrum supplied.
pub fn ergodic_report_with_spectrum(
    params: ChannelParams,
    kind: CapacityKind,
    coeffs: &CoefficientSequence,
    spectrum: &SingularSpectrum,
) -> Result<ErgodicReport> {
    let n = spectrum.len();
    require_n_at_least_four(n)?;
    let f = capped_test_function(params, kind)?;
    let norms = symbol_norms(coeffs, CHANNEL_K)?;
    let sample_average = ergodic_average(spectrum, &f);
    let integral = symbol_integral(params, &f, REPORT_QUAD_TOL)?;
    let theoretical_bound = ap_error_bound(
        n,
        CHANNEL_K,
        f.lipschitz,
        norms.norm_sk,
        norms.norm_s,
        f.derivative_l1,
        f.sup_norm,
    )?;
    let empirical_error = (sample_average - integral).abs();
    Ok(ErgodicReport {
        n,
        sample_average,
        symbol_integral: integral,
        empirical_error,
        theoretical_bound,
        bound_respected: empirical_error <= theoretical_bound,
    })
}
