//! Channel parameters, Fourier coefficients and the closed-form symbol.
//!
//! The fibre with memory is described by the lower-triangular Toeplitz
//! coefficients
//!
//! ```text
//! a_j = √λ · μ^{j/2} · L_j^{(-1)}(-ln λ),   j ≥ 0,   a_j = 0 for j < 0
//! ```
//!
//! whose Fourier series sums to `f(θ) = λ^{-1/2 + 1/(1 - √μ e^{iθ})}`, with
//! `|f(θ)|² = η(θ) = λ^{(1-μ)/(1 - 2√μ cos θ + μ)}`.
//!
//! All L² norms use the un-normalised convention `‖s‖₂² = ∫₀^{2π} |s|²`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default relative cutoff for coefficient truncation.
pub const DEFAULT_COEFF_TOL: f64 = 1e-14;

/// Default cap on the number of generated coefficients.
pub const DEFAULT_MAX_TERMS: usize = 100_000;

/// Transmissivity `λ ∈ (0,1)` and memory parameter `μ ∈ [0,1)` of the fibre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams {
    lambda: f64,
    mu: f64,
}

impl ChannelParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                range: "(0, 1)",
            });
        }
        if !(0.0..1.0).contains(&mu) {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: mu,
                range: "[0, 1)",
            });
        }
        Ok(Self { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sqrt_mu(&self) -> f64 {
        self.mu.sqrt()
    }

    /// `ln(1/λ)`, strictly positive.
    pub fn log_inv_lambda(&self) -> f64 {
        -self.lambda.ln()
    }
}

/// Generalised Laguerre polynomial `L_m^{(-1)}(x)`.
///
/// Uses the forward three-term recurrence
/// `m L_m = (2m - 2 - x) L_{m-1} - (m - 2) L_{m-2}` seeded with
/// `L_0 = 1`, `L_1 = -x`. The explicit binomial sum alternates in sign for
/// `x > 0` and loses all precision once `m` reaches a few dozen.
pub fn laguerre_minus_one(m: usize, x: f64) -> f64 {
    let mut iter = LaguerreMinusOne::new(x);
    let mut value = 1.0;
    for _ in 0..=m {
        value = iter.next_value();
    }
    value
}

/// Streams `L_0^{(-1)}(x), L_1^{(-1)}(x), ...`.
struct LaguerreMinusOne {
    x: f64,
    m: usize,
    prev: f64,
    prev2: f64,
}

impl LaguerreMinusOne {
    fn new(x: f64) -> Self {
        Self {
            x,
            m: 0,
            prev: 0.0,
            prev2: 0.0,
        }
    }

    fn next_value(&mut self) -> f64 {
        let value = match self.m {
            0 => 1.0,
            1 => -self.x,
            m => {
                let mf = m as f64;
                ((2.0 * mf - 2.0 - self.x) * self.prev - (mf - 2.0) * self.prev2) / mf
            }
        };
        self.prev2 = self.prev;
        self.prev = value;
        self.m += 1;
        value
    }
}

/// Geometric envelope `|a_j| ≤ scale · ratio^j` valid for every `j ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEnvelope {
    pub scale: f64,
    pub ratio: f64,
}

impl TailEnvelope {
    /// Upper bound on `Σ_{j>J} |a_j|`.
    pub fn tail_l1(&self, truncation_index: usize) -> f64 {
        if self.ratio == 0.0 {
            return 0.0;
        }
        self.scale * self.ratio.powi(truncation_index as i32 + 1) / (1.0 - self.ratio)
    }

    /// Upper bound on `Σ_{j>J} j^{2k} |a_j|²`.
    fn weighted_tail_sq(&self, truncation_index: usize, k: u32) -> Option<f64> {
        if self.ratio == 0.0 {
            return Some(0.0);
        }
        let r2 = self.ratio * self.ratio;
        let power = 2 * k as i32;
        let first = truncation_index + 1;
        let mut term = self.scale * self.scale * (first as f64).powi(power) * r2.powi(first as i32);
        let mut total = 0.0;
        // Sum until the remaining terms are dominated by a geometric series
        // whose sum is negligible against what has been accumulated.
        for j in first..first + 10_000_000 {
            total += term;
            let jf = j as f64;
            let step = ((jf + 1.0) / jf).powi(power) * r2;
            let next = term * step;
            if step < 1.0 {
                let remainder = next / (1.0 - step);
                if remainder <= 1e-6 * total || remainder == 0.0 {
                    return Some(total + remainder);
                }
            }
            term = next;
        }
        None
    }
}

/// Truncated Toeplitz coefficients `a_0, …, a_J` (all `a_j` with `j < 0` are zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSequence {
    values: Vec<f64>,
    relative_tolerance: f64,
    truncation_index: usize,
    envelope: Option<TailEnvelope>,
}

impl CoefficientSequence {
    /// An exactly finite sequence: every coefficient past the last is zero.
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "coefficient sequence needs a_0");
        let truncation_index = values.len() - 1;
        Self {
            values,
            relative_tolerance: 0.0,
            truncation_index,
            envelope: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn relative_tolerance(&self) -> f64 {
        self.relative_tolerance
    }

    pub fn truncation_index(&self) -> usize {
        self.truncation_index
    }

    pub fn envelope(&self) -> Option<TailEnvelope> {
        self.envelope
    }

    /// `a_j`, zero for negative `j` and past the truncation index.
    pub fn get(&self, j: i64) -> f64 {
        if j < 0 {
            return 0.0;
        }
        self.values.get(j as usize).copied().unwrap_or(0.0)
    }

    /// Coefficients of the degree-`band` partial sum `f_N`.
    pub fn truncated(&self, band: usize) -> Self {
        let end = (band + 1).min(self.values.len());
        Self::from_values(self.values[..end].to_vec())
    }

    /// Partial Fourier sum `Σ_j a_j e^{ijθ}`.
    pub fn eval(&self, theta: f64) -> Complex64 {
        // Horner in z = e^{iθ}
        let z = Complex64::from_polar(1.0, theta);
        self.values
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    }

    /// `Σ_j |j a_j|`, the exact sup-norm bound on the derivative of the partial sum.
    pub fn derivative_sup_bound(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, a)| j as f64 * a.abs())
            .sum()
    }
}

/// Coefficients `a_0..a_J` of the channel, truncated where the provable tail
/// drops below `relative_tolerance · |a_0|`.
pub fn channel_coefficients(
    params: ChannelParams,
    relative_tolerance: f64,
) -> Result<CoefficientSequence> {
    channel_coefficients_with_cap(params, relative_tolerance, DEFAULT_MAX_TERMS)
}

pub fn channel_coefficients_with_cap(
    params: ChannelParams,
    relative_tolerance: f64,
    max_terms: usize,
) -> Result<CoefficientSequence> {
    if !(relative_tolerance > 0.0 && relative_tolerance < 1.0) {
        return Err(Error::InvalidParameter {
            name: "relative_tolerance",
            value: relative_tolerance,
            range: "(0, 1)",
        });
    }
    let x = params.log_inv_lambda();
    let sqrt_lambda = params.lambda().sqrt();
    let sqrt_mu = params.sqrt_mu();
    // |L_m^{(-1)}(x)| ≤ x e^{x/2} for x ≥ 0, hence |a_j| ≤ ln(1/λ) μ^{j/2}.
    let envelope = TailEnvelope {
        scale: x,
        ratio: sqrt_mu,
    };
    let threshold = relative_tolerance * sqrt_lambda;

    let mut laguerre = LaguerreMinusOne::new(x);
    let mut values = Vec::new();
    let mut weight = 1.0;
    for j in 0..max_terms {
        values.push(sqrt_lambda * weight * laguerre.next_value());
        if envelope.tail_l1(j) < threshold {
            return Ok(CoefficientSequence {
                values,
                relative_tolerance,
                truncation_index: j,
                envelope: Some(envelope),
            });
        }
        weight *= sqrt_mu;
    }
    Err(Error::TruncationBudgetExceeded {
        cap: max_terms,
        tolerance: relative_tolerance,
        mu: params.mu(),
    })
}

/// Closed-form symbol `f(θ) = λ^{-1/2 + 1/(1 - √μ e^{iθ})}`.
pub fn symbol_eval(params: ChannelParams, theta: f64) -> Complex64 {
    let exponent = -0.5 + one_minus_w(params, theta).inv();
    (exponent * params.lambda().ln()).exp()
}

/// `1 − √μ e^{iθ}`, with the real part written as `(1−√μ) + 2√μ sin²(θ/2)`
/// so it stays accurate when `√μ → 1` and `θ → 0`.
fn one_minus_w(params: ChannelParams, theta: f64) -> Complex64 {
    let s = params.sqrt_mu();
    let half = (0.5 * theta).sin();
    Complex64::new((1.0 - s) + 2.0 * s * half * half, -s * theta.sin())
}

/// `[f(θ), f'(θ), f''(θ)]` by analytic differentiation of the closed form.
pub fn symbol_with_derivatives(params: ChannelParams, theta: f64) -> [Complex64; 3] {
    let ln_lambda = params.lambda().ln();
    let i = Complex64::new(0.0, 1.0);
    let w = Complex64::from_polar(params.sqrt_mu(), theta);
    let d = one_minus_w(params, theta);
    let f = ((-0.5 + d.inv()) * ln_lambda).exp();
    // g = 1/(1-w), w' = i w, w'' = -w
    let dw = i * w;
    let g1 = dw / (d * d);
    let g2 = (-w * d + 2.0 * dw * dw) / (d * d * d);
    let f1 = f * ln_lambda * g1;
    let f2 = f * (ln_lambda * ln_lambda * g1 * g1 + ln_lambda * g2);
    [f, f1, f2]
}

/// `η(θ) = λ^{(1-μ)/(1 - 2√μ cos θ + μ)}`.
pub fn effective_transmissivity(params: ChannelParams, theta: f64) -> f64 {
    // 1 − 2√μ cos θ + μ = (1−√μ)² + 4√μ sin²(θ/2)
    let s = params.sqrt_mu();
    let half = (0.5 * theta).sin();
    let exponent = (1.0 - s) * (1.0 + s) / ((1.0 - s) * (1.0 - s) + 4.0 * s * half * half);
    (exponent * params.lambda().ln()).exp()
}

fn power_of_lambda(params: ChannelParams, exponent: f64) -> f64 {
    (exponent * params.lambda().ln()).exp()
}

/// `M = max_θ η(θ) = λ^{(1-√μ)/(1+√μ)}`, attained at `θ = π`.
pub fn max_transmissivity(params: ChannelParams) -> f64 {
    let s = params.sqrt_mu();
    power_of_lambda(params, (1.0 - s) / (1.0 + s))
}

/// `min_θ η(θ) = λ^{(1+√μ)/(1-√μ)}`, attained at `θ = 0`.
pub fn min_transmissivity(params: ChannelParams) -> f64 {
    let s = params.sqrt_mu();
    power_of_lambda(params, (1.0 + s) / (1.0 - s))
}

/// The unique `θ ∈ (0, π)` with `η(θ) = level`, if `level` lies strictly
/// between the minimum and maximum transmissivity.
///
/// `η` is increasing on `[0, π]`, so the equation inverts in closed form for
/// `cos θ`.
pub fn transmissivity_level_angle(params: ChannelParams, level: f64) -> Option<f64> {
    let mu = params.mu();
    if mu == 0.0 || !(level > 0.0 && level < 1.0) {
        return None;
    }
    let target_exponent = level.ln() / params.lambda().ln();
    let cos_theta = (1.0 + mu - (1.0 - mu) / target_exponent) / (2.0 * params.sqrt_mu());
    if cos_theta > -1.0 && cos_theta < 1.0 {
        Some(cos_theta.acos())
    } else {
        None
    }
}

/// `‖f^{(k)}‖₂ = √(2π Σ_j j^{2k} |a_j|²)`.
///
/// Fails with [`Error::TruncationBudgetExceeded`] when the envelope bound on
/// the discarded weighted tail is not below the sequence's tolerance relative
/// to the retained sum.
pub fn derivative_l2_norm(coeffs: &CoefficientSequence, k: u32) -> Result<f64> {
    let power = 2 * k as i32;
    let retained: f64 = coeffs
        .values
        .iter()
        .enumerate()
        .map(|(j, a)| (j as f64).powi(power) * a * a)
        .sum();
    if let Some(envelope) = coeffs.envelope {
        let tail = envelope.weighted_tail_sq(coeffs.truncation_index, k);
        match tail {
            Some(t) if t <= coeffs.relative_tolerance * retained || t == 0.0 => {}
            _ => {
                return Err(Error::TruncationBudgetExceeded {
                    cap: coeffs.values.len(),
                    tolerance: coeffs.relative_tolerance,
                    mu: envelope.ratio * envelope.ratio,
                })
            }
        }
    }
    Ok((2.0 * PI * retained).sqrt())
}

/// `‖f‖₂` from Parseval.
pub fn symbol_l2_norm(coeffs: &CoefficientSequence) -> Result<f64> {
    derivative_l2_norm(coeffs, 0)
}

/// Closed-form majorant of `‖f''‖₂`:
/// `√M √(2πμ) ln(1/λ) (1 + √μ ln(1/λ) + μ) / (1-√μ)⁴`.
pub fn second_derivative_norm_estimate(params: ChannelParams) -> f64 {
    let m = max_transmissivity(params);
    let s = params.sqrt_mu();
    let x = params.log_inv_lambda();
    m.sqrt() * (2.0 * PI * params.mu()).sqrt() * x * (1.0 + s * x + params.mu()) / (1.0 - s).powi(4)
}
