//! Finite Toeplitz corners, wrap-around circulants and their singular spectra.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbol::{channel_coefficients, ChannelParams, CoefficientSequence, DEFAULT_COEFF_TOL};

/// Orders above this use the Gram-matrix eigensolve instead of a dense SVD.
pub const DEFAULT_DENSE_SVD_LIMIT: usize = 2048;

const SVD_MAX_ITER: usize = 0; // 0 = no limit in nalgebra

/// The `n×n` corner with entry `(i,k) = a_{i-k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCorner {
    entries: DMatrix<f64>,
}

/// Wrap-around circulant `C_n(f_N)` of the degree-`N` partial symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantMatrix {
    band: usize,
    coeffs: CoefficientSequence,
    entries: DMatrix<f64>,
}

/// Anything whose singular values we can take.
pub trait DenseMatrix {
    fn as_dense(&self) -> &DMatrix<f64>;

    fn order(&self) -> usize {
        self.as_dense().nrows()
    }

    /// Hilbert–Schmidt (Frobenius) norm.
    fn frobenius_norm(&self) -> f64 {
        self.as_dense().norm()
    }
}

impl DenseMatrix for ToeplitzCorner {
    fn as_dense(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

impl DenseMatrix for CirculantMatrix {
    fn as_dense(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

impl ToeplitzCorner {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

impl CirculantMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `|f_N(2πi/n)|` for `i = 1..n`, in grid order.
    pub fn symbol_samples(&self) -> Vec<f64> {
        let n = self.n();
        (1..=n)
            .map(|i| self.coeffs.eval(2.0 * PI * i as f64 / n as f64).norm())
            .collect()
    }
}

/// Ascending singular values `s_1 ≤ … ≤ s_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    /// Sorts and validates raw singular values.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Squared singular values: the per-mode transmissivities.
    pub fn squares(&self) -> Vec<f64> {
        self.values.iter().map(|s| s * s).collect()
    }
}

pub fn build_toeplitz(coeffs: &CoefficientSequence, n: usize) -> ToeplitzCorner {
    assert!(n >= 1, "Toeplitz order must be at least 1");
    let entries = DMatrix::from_fn(n, n, |i, k| coeffs.get(i as i64 - k as i64));
    ToeplitzCorner { entries }
}

/// Circulant whose first column holds `a_0..a_N` and whose entries wrap
/// modulo `n`. Requires `2N < n` so the wrapped bands never overlap.
pub fn build_circulant(
    coeffs: &CoefficientSequence,
    band: usize,
    n: usize,
) -> Result<CirculantMatrix> {
    if 2 * band >= n {
        return Err(Error::BandTooWide { band, n });
    }
    let truncated = coeffs.truncated(band);
    let band_i = band as i64;
    let n_i = n as i64;
    let entries = DMatrix::from_fn(n, n, |i, j| {
        let d = (i as i64 - j as i64).rem_euclid(n_i);
        if d <= band_i {
            truncated.get(d)
        } else if n_i - d <= band_i {
            truncated.get(d - n_i)
        } else {
            0.0
        }
    });
    Ok(CirculantMatrix {
        band,
        coeffs: truncated,
        entries,
    })
}

/// Controls the decomposition used by [`singular_values_with`].
#[derive(Debug, Clone, Copy)]
pub struct SvdConfig {
    pub dense_limit: usize,
}

impl Default for SvdConfig {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_SVD_LIMIT,
        }
    }
}

pub fn singular_values<M: DenseMatrix + ?Sized>(m: &M) -> Result<SingularSpectrum> {
    singular_values_with(m, SvdConfig::default())
}

pub fn singular_values_with<M: DenseMatrix + ?Sized>(
    m: &M,
    config: SvdConfig,
) -> Result<SingularSpectrum> {
    let a = m.as_dense();
    let n = a.nrows();
    if n <= config.dense_limit {
        let svd = a
            .clone()
            .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
            .ok_or(Error::ConvergenceFailure { n })?;
        Ok(SingularSpectrum::from_values(
            svd.singular_values.iter().copied().collect(),
        ))
    } else {
        gram_singular_values(a)
    }
}

/// `√eig(AᵀA)` with negative eigenvalues clamped to zero.
pub fn gram_singular_values(a: &DMatrix<f64>) -> Result<SingularSpectrum> {
    let n = a.nrows();
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::ConvergenceFailure { n })?;
    Ok(SingularSpectrum::from_values(
        eig.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).collect(),
    ))
}

/// Singular spectrum of the channel's `n×n` Toeplitz corner.
pub fn channel_spectrum(params: ChannelParams, n: usize) -> Result<SingularSpectrum> {
    let coeffs = channel_coefficients(params, DEFAULT_COEFF_TOL)?;
    singular_values(&build_toeplitz(&coeffs, n))
}

/// `η_i = s_i²`, ascending.
pub fn mode_transmissivities(params: ChannelParams, n: usize) -> Result<Vec<f64>> {
    Ok(channel_spectrum(params, n)?.squares())
}
