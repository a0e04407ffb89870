//! Odd trigonometric interpolation on a uniform grid.
//!
//! An odd function `f` with period `2b` is represented by the pure sine
//! polynomial
//!
//! ```text
//! p(x) = Σ_{0 <= j < M} c_j sin(jπx/b)
//! ```
//!
//! Given samples `y_j = f(x_j)` at the `N = 2M` equispaced nodes
//! `x_j = -b + j·(2b/N)`, the interpolation coefficients are
//!
//! ```text
//! c_j = (2/N) Σ_{0 <= k < N} (-1)^j y_k sin(2πjk/N),
//! ```
//!
//! which [`odd_interpolate`] evaluates in `O(N log N)` through the identity
//! `c_j = 2·(-1)^j · Im(ifft(y))[j]` (normalized inverse DFT). The resulting
//! polynomial matches the samples exactly at every node and converges
//! spectrally for smooth periodic data: if `f` has `K+1` bounded derivatives
//! the max error decays at least like `N^{-K}`, and for analytic data the
//! decay is faster than any power.
//!
//! [`TrigPolyOdd`] also exposes closed-form derivatives up to order 4 and the
//! two antiderivative building blocks needed to rebuild a function from a
//! sine expansion of its second derivative.

use crate::fft::InverseDft;
use std::f64::consts::PI;
use thiserror::Error;

/// Relative tolerance used to reject asymmetric sample vectors.
pub const ASYMMETRY_TOL: f64 = 1e-9;

/// Errors produced by the interpolation routines.
#[derive(Debug, Error, PartialEq)]
pub enum TrigError {
    /// Sample count must be a power of two, at least 4.
    #[error("sample count {0} is not a power of two >= 4")]
    BadSampleCount(usize),
    /// Samples must satisfy the odd grid symmetry `y_0 = 0`,
    /// `y_k = -y_{N-k}`.
    #[error("samples violate odd grid symmetry: max asymmetry {max_asymmetry:e} exceeds {tol:e}")]
    AsymmetricSamples {
        /// Largest `|y_k + y_{N-k}|` (or `|y_0|`) found.
        max_asymmetry: f64,
        /// Tolerance the asymmetry was compared against.
        tol: f64,
    },
    /// The half period must be strictly positive.
    #[error("half period must be positive, got {0}")]
    NonPositiveHalfPeriod(f64),
    /// Derivative order outside the supported range 0..=4.
    #[error("derivative order {0} not supported (max 4)")]
    UnsupportedOrder(u32),
    /// Coefficient vector may not be empty.
    #[error("coefficient vector may not be empty")]
    EmptyCoefficients,
}

/// Odd sine polynomial `Σ c_j sin(jπx/b)` with half period `b`.
///
/// The `j = 0` coefficient multiplies `sin(0) = 0`; it is stored for
/// index alignment but forced to zero at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolyOdd {
    half_period: f64,
    coeffs: Vec<f64>,
}

impl TrigPolyOdd {
    /// Builds a polynomial from explicit coefficients. `coeffs[0]` is forced
    /// to zero (it multiplies the identically-zero mode).
    pub fn new(half_period: f64, mut coeffs: Vec<f64>) -> Result<Self, TrigError> {
        if half_period <= 0.0 || half_period.is_nan() {
            return Err(TrigError::NonPositiveHalfPeriod(half_period));
        }
        if coeffs.is_empty() {
            return Err(TrigError::EmptyCoefficients);
        }
        coeffs[0] = 0.0;
        Ok(Self {
            half_period,
            coeffs,
        })
    }

    /// Half period `b`; the polynomial has period `2b`.
    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    /// Sine coefficients `c_j`, index-aligned with mode number.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Evaluates `p(x) = Σ c_j sin(jπx/b)` by direct summation.
    pub fn eval(&self, x: f64) -> f64 {
        let w = PI * x / self.half_period;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate().skip(1) {
            if c != 0.0 {
                acc += c * (j as f64 * w).sin();
            }
        }
        acc
    }

    /// Evaluates the `order`-th derivative (orders 0 through 4).
    ///
    /// Differentiation multiplies mode `j` by `(jπ/b)^order` and rotates the
    /// phase through the cycle sin → cos → -sin → -cos.
    pub fn eval_derivative(&self, x: f64, order: u32) -> Result<f64, TrigError> {
        if order > 4 {
            return Err(TrigError::UnsupportedOrder(order));
        }
        let w = PI * x / self.half_period;
        let rate = PI / self.half_period;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate().skip(1) {
            if c == 0.0 {
                continue;
            }
            let jf = j as f64;
            let amp = c * (jf * rate).powi(order as i32);
            let phase = jf * w;
            acc += match order % 4 {
                0 => amp * phase.sin(),
                1 => amp * phase.cos(),
                2 => -amp * phase.sin(),
                _ => -amp * phase.cos(),
            };
        }
        Ok(acc)
    }

    /// First antiderivative building block:
    /// `A1(x) = -(b/π) Σ_{j>=1} (c_j/j) cos(jπx/b)`, so that `A1' = p`.
    ///
    /// No integration constant is added; callers supply their own affine
    /// part.
    pub fn eval_antiderivative(&self, x: f64) -> f64 {
        let w = PI * x / self.half_period;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate().skip(1) {
            if c != 0.0 {
                acc += c / j as f64 * (j as f64 * w).cos();
            }
        }
        -self.half_period / PI * acc
    }

    /// Second antiderivative building block:
    /// `A2(x) = -(b/π)² Σ_{j>=1} (c_j/j²) sin(jπx/b)`, so that `A2' = A1`.
    pub fn eval_second_antiderivative(&self, x: f64) -> f64 {
        let w = PI * x / self.half_period;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate().skip(1) {
            if c != 0.0 {
                acc += c / (j * j) as f64 * (j as f64 * w).sin();
            }
        }
        -(self.half_period / PI).powi(2) * acc
    }
}

/// Samples of an odd periodic function on the canonical grid
/// `x_j = -b + j·(2b/N)`, `j = 0..N-1`.
///
/// Constructing a `GridSamples` validates the structural requirements:
/// `N` is a power of two (at least 4), `y_0 = 0`, and `y_k = -y_{N-k}` for
/// `1 <= k < N/2`, all up to a relative tolerance of
/// `1e-9·(1 + max|y|)`. The midpoint slot `y_{N/2}` (the sample at `x = 0`)
/// is left unconstrained: it multiplies `sin(jπ) = 0` in every coefficient,
/// so the interpolation operator ignores it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSamples {
    values: Vec<f64>,
}

impl GridSamples {
    /// Validates and wraps a sample vector.
    pub fn new(values: Vec<f64>) -> Result<Self, TrigError> {
        let n = values.len();
        if n < 4 || !n.is_power_of_two() {
            return Err(TrigError::BadSampleCount(n));
        }
        let max_abs = values.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let tol = ASYMMETRY_TOL * (1.0 + max_abs);
        let mut max_asym = values[0].abs();
        for k in 1..n / 2 {
            max_asym = max_asym.max((values[k] + values[n - k]).abs());
        }
        if max_asym > tol {
            return Err(TrigError::AsymmetricSamples {
                max_asymmetry: max_asym,
                tol,
            });
        }
        Ok(Self { values })
    }

    /// Samples an odd `2b`-periodic function on the canonical grid.
    pub fn from_fn(n: usize, half_period: f64, f: impl Fn(f64) -> f64) -> Result<Self, TrigError> {
        let values = (0..n)
            .map(|j| f(half_period * (2.0 * j as f64 / n as f64 - 1.0)))
            .collect();
        Self::new(values)
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the sample vector is empty (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The raw sample values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Interpolates odd grid samples by a sine polynomial with `M = N/2` modes.
///
/// The coefficients are computed through a normalized inverse FFT:
/// `c_j = 2·(-1)^j·Im(ifft(y))[j]`, which is an `O(N log N)` evaluation of
/// the direct sum `c_j = (2/N) Σ_k (-1)^j y_k sin(2πjk/N)`. The returned
/// polynomial reproduces the samples exactly at every grid node (slot `N/2`
/// maps to `x = 0` where a sine polynomial always vanishes).
pub fn odd_interpolate(samples: &GridSamples, half_period: f64) -> Result<TrigPolyOdd, TrigError> {
    if half_period <= 0.0 || half_period.is_nan() {
        return Err(TrigError::NonPositiveHalfPeriod(half_period));
    }
    let n = samples.len();
    let m = n / 2;
    let plan = InverseDft::new(n);
    let im = plan.sine_projection(samples.values());
    let mut coeffs = Vec::with_capacity(m);
    coeffs.push(0.0);
    for (j, &s) in im.iter().enumerate().take(m).skip(1) {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(2.0 * sign * s);
    }
    TrigPolyOdd::new(half_period, coeffs)
}
