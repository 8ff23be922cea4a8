//! Pure-loss capacities, asymptotic capacities of the memory channel,
//! non-asymptotic lower bounds and the uses-needed solver.

use std::f64::consts::{LOG2_E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::symbol::{
    effective_transmissivity, max_transmissivity, transmissivity_level_angle, ChannelParams,
};
use crate::toeplitz::mode_transmissivities;

/// Default absolute tolerance for capacity integrals.
pub const DEFAULT_CAPACITY_TOL: f64 = 1e-10;

/// Largest `n` the solver will return; beyond this `n` is no longer exact in `f64`.
pub const MAX_SOLVER_USES: u64 = 1 << 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityKind {
    /// Quantum capacity `Q`.
    Qubit,
    /// Two-way quantum capacity `Q₂`.
    Ebit,
    /// Secret-key capacity `K`, equal to `Q₂` for every bound here.
    Key,
}

impl CapacityKind {
    pub const ALL: [CapacityKind; 3] = [CapacityKind::Qubit, CapacityKind::Ebit, CapacityKind::Key];

    /// `Key` maps to `Ebit`; the formulas coincide.
    pub fn canonical(self) -> Self {
        match self {
            CapacityKind::Key => CapacityKind::Ebit,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CapacityKind::Qubit => "qubit",
            CapacityKind::Ebit => "ebit",
            CapacityKind::Key => "key",
        }
    }
}

/// Error tolerance `ε ∈ (0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ErrorBudget(f64);

impl ErrorBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon < 1.0 {
            Ok(Self(epsilon))
        } else {
            Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
                range: "(0, 1)",
            })
        }
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }
}

/// Unchecked pure-loss capacity for `η ∈ [0, 1)`.
pub(crate) fn capacity_of(eta: f64, kind: CapacityKind) -> f64 {
    match kind.canonical() {
        CapacityKind::Qubit => {
            if eta > 0.5 {
                (eta / (1.0 - eta)).log2()
            } else {
                0.0
            }
        }
        _ => -(-eta).ln_1p() * LOG2_E,
    }
}

/// `Q(λ) = max(0, log₂(λ/(1−λ)))`, `Q₂(λ) = K(λ) = log₂(1/(1−λ))`.
pub fn pure_loss_capacity(lambda: f64, kind: CapacityKind) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            range: "[0, 1]",
        });
    }
    if lambda == 1.0 {
        return Err(Error::DivergentCapacity);
    }
    Ok(capacity_of(lambda, kind))
}

/// `(1/2π) ∫₀^{2π} g(η(θ)) dθ` with `g` the pure-loss capacity of `kind`.
pub fn asymptotic_capacity(params: ChannelParams, kind: CapacityKind, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            range: "(0, inf)",
        });
    }
    let kind = kind.canonical();
    if params.mu() == 0.0 {
        return Ok(capacity_of(params.lambda(), kind));
    }
    if kind == CapacityKind::Qubit && !positive_q_region(params) {
        return Ok(0.0);
    }
    let mut breaks = Vec::new();
    let mut lower = 0.0;
    if kind == CapacityKind::Qubit {
        // q(η(θ)) vanishes on [0, θ*] and has a kink there.
        if let Some(t) = transmissivity_level_angle(params, 0.5) {
            lower = t;
            breaks.push(t);
        }
    }
    let r = quadrature::integrate(
        |t| capacity_of(effective_transmissivity(params, t), kind),
        lower,
        PI,
        &breaks,
        tol * PI,
    )?;
    Ok(r.value / PI)
}

/// `M > 1/2`, the region where the quantum capacity is positive.
pub fn positive_q_region(params: ChannelParams) -> bool {
    max_transmissivity(params) > 0.5
}

/// The constant `C(λ,μ)` (qubit) or `C₂(λ,μ)` (ebit/key) multiplying `√n`.
pub fn theorem1_constant(params: ChannelParams, kind: CapacityKind) -> Result<f64> {
    let m = max_transmissivity(params);
    let s = params.sqrt_mu();
    let x = params.log_inv_lambda();
    let shared = 8f64.sqrt() * m * s * x * (1.0 + s * x + params.mu()) / (1.0 - s).powi(4);
    let lead = 4.0 * (2.0 * PI).powf(1.5) * LOG2_E;
    match kind.canonical() {
        CapacityKind::Qubit => {
            if m <= 0.5 {
                return Err(Error::ZeroCapacityRegion {
                    max_transmissivity: m,
                });
            }
            Ok(shared + lead / (1.0 - m) + 8.0 * (m / (1.0 - m)).log2())
        }
        _ => Ok(shared + lead * m / (1.0 - m) - 8.0 * (-m).ln_1p() * LOG2_E),
    }
}

/// Additive `ε`-penalty of the one-shot bounds, in bits.
pub fn epsilon_penalty(eps: ErrorBudget, kind: CapacityKind) -> f64 {
    let e = eps.epsilon();
    match kind.canonical() {
        CapacityKind::Qubit => {
            23.0 + (2.0 * (32.0 - e).log2()) - (16.0 - e).log2() - 6.0 * e.log2()
        }
        _ => {
            let r = e.sqrt();
            6.0 + 3f64.log2() + 2.0 * (4.0 - r).log2() - (2.0 - r).log2() - 3.0 * e.log2()
        }
    }
}

/// The three numbers that define `n ↦ n·Q − √n·C − p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCoefficients {
    pub rate: f64,
    pub sqrt_constant: f64,
    pub penalty: f64,
}

impl BoundCoefficients {
    pub fn for_channel(
        params: ChannelParams,
        eps: ErrorBudget,
        kind: CapacityKind,
        tol: f64,
    ) -> Result<Self> {
        let rate = asymptotic_capacity(params, kind, tol)?;
        let sqrt_constant = if kind.canonical() == CapacityKind::Qubit && !positive_q_region(params)
        {
            0.0
        } else {
            theorem1_constant(params, kind)?
        };
        Ok(Self {
            rate,
            sqrt_constant,
            penalty: epsilon_penalty(eps, kind),
        })
    }

    /// Unclamped `n·Q − √n·C − p`.
    pub fn raw(&self, n: u64) -> f64 {
        let nf = n as f64;
        nf * self.rate - nf.sqrt() * self.sqrt_constant - self.penalty
    }

    /// `max(0, raw)`.
    pub fn lower(&self, n: u64) -> f64 {
        self.raw(n).max(0.0)
    }

    /// Minimal `n ≥ 4` with `lower(n) ≥ target`.
    pub fn uses_needed(&self, target: f64) -> Result<u64> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "target_k",
                value: target,
                range: "(0, inf)",
            });
        }
        if !(self.rate > 0.0) {
            return Err(Error::UnreachableTarget {
                capacity: self.rate,
            });
        }
        let q = self.rate;
        let c = self.sqrt_constant;
        let x = (c + (c * c + 4.0 * q * (self.penalty + target)).sqrt()) / (2.0 * q);
        let x2 = (x * x).ceil();
        if !(x2 <= MAX_SOLVER_USES as f64) {
            return Err(Error::Domain(format!(
                "target needs about {x2:e} channel uses, above the solver limit {MAX_SOLVER_USES}"
            )));
        }
        let mut n = (x2 as u64).max(4);
        while n > 4 && self.lower(n - 1) >= target {
            n -= 1;
        }
        while self.lower(n) < target {
            n += 1;
        }
        Ok(n)
    }
}

/// The three additive parts of the `n·Q − √n·C − p` lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundComponents {
    /// `n·Q` or `n·Q₂`.
    pub asymptotic_term: f64,
    /// `√n·C` or `√n·C₂`.
    pub sqrt_term: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NShotBound {
    pub kind: CapacityKind,
    pub n: u64,
    pub lower: f64,
    pub raw_lower: f64,
    pub components: BoundComponents,
    /// The raw value was negative and `lower` is reported as zero.
    pub clamped: bool,
    /// Qubit bound in the zero-capacity region `M ≤ 1/2`.
    pub trivial: bool,
}

fn require_sqrt_bound_n(n: u64) -> Result<()> {
    if n < 4 {
        return Err(Error::Domain(format!(
            "the sqrt(n) lower bound holds for n >= 4 only (got n = {n}); use the exact mode-sum bound for smaller n"
        )));
    }
    Ok(())
}

pub fn nshot_lower_bound(
    params: ChannelParams,
    n: u64,
    eps: ErrorBudget,
    kind: CapacityKind,
) -> Result<NShotBound> {
    nshot_lower_bound_with_tol(params, n, eps, kind, DEFAULT_CAPACITY_TOL)
}

pub fn nshot_lower_bound_with_tol(
    params: ChannelParams,
    n: u64,
    eps: ErrorBudget,
    kind: CapacityKind,
    tol: f64,
) -> Result<NShotBound> {
    require_sqrt_bound_n(n)?;
    let coeffs = BoundCoefficients::for_channel(params, eps, kind, tol)?;
    let nf = n as f64;
    let components = BoundComponents {
        asymptotic_term: nf * coeffs.rate,
        sqrt_term: nf.sqrt() * coeffs.sqrt_constant,
        penalty: coeffs.penalty,
    };
    let raw_lower = coeffs.raw(n);
    Ok(NShotBound {
        kind,
        n,
        lower: raw_lower.max(0.0),
        raw_lower,
        components,
        clamped: raw_lower < 0.0,
        trivial: kind.canonical() == CapacityKind::Qubit && !positive_q_region(params),
    })
}

/// `Σ_i g(η_i)` over a list of mode transmissivities.
pub fn mode_capacity_sum(transmissivities: &[f64], kind: CapacityKind) -> f64 {
    transmissivities.iter().map(|&e| capacity_of(e, kind)).sum()
}

/// `Σ_i g(η_i^{(n)}) − p` from the SVD transmissivities; not clamped.
pub fn exact_sum_lower_bound(
    params: ChannelParams,
    n: usize,
    eps: ErrorBudget,
    kind: CapacityKind,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let etas = mode_transmissivities(params, n)?;
    Ok(mode_capacity_sum(&etas, kind) - epsilon_penalty(eps, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemorylessBounds {
    pub lower: f64,
    pub raw_lower: f64,
    pub upper: f64,
}

/// n-shot bracket for the memoryless pure-loss channel.
pub fn memoryless_nshot_bounds(
    lambda: f64,
    n: u64,
    eps: ErrorBudget,
    kind: CapacityKind,
) -> Result<MemorylessBounds> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let cap = pure_loss_capacity(lambda, kind)?;
    let nf = n as f64;
    let e = eps.epsilon();
    let raw_lower = nf * cap - epsilon_penalty(eps, kind);
    let upper = match kind.canonical() {
        CapacityKind::Qubit => {
            if e >= 0.5 {
                return Err(Error::Domain(format!(
                    "the qubit upper bound needs epsilon < 1/2, got {e}"
                )));
            }
            nf * cap / (1.0 - 2.0 * e) - e * e.log2() - (1.0 - e) * (1.0 - e).log2()
        }
        _ => nf * cap + 6f64.log2() + 2.0 * ((1.0 + e) / (1.0 - e)).log2(),
    };
    let lower = raw_lower.max(0.0);
    debug_assert!(lower <= upper);
    Ok(MemorylessBounds {
        lower,
        raw_lower,
        upper,
    })
}

/// Minimal `n ≥ 4` whose lower bound reaches `target_k`.
pub fn uses_needed(
    params: ChannelParams,
    eps: ErrorBudget,
    kind: CapacityKind,
    target_k: f64,
) -> Result<u64> {
    BoundCoefficients::for_channel(params, eps, kind, DEFAULT_CAPACITY_TOL)?.uses_needed(target_k)
}
