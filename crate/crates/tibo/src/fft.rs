//! Thin wrapper around `rustfft` providing the normalized inverse DFT of a
//! real vector, which is the single transform primitive the rest of the crate
//! builds on.
//!
//! Convention: for input `x` of length `N`,
//!
//! ```text
//! ifft(x)[j] = (1/N) * sum_k x[k] * exp(+2*pi*i*j*k/N)
//! ```
//!
//! so `Re(ifft(x))[j] = (1/N) Σ x_k cos(2πjk/N)` and
//! `Im(ifft(x))[j] = (1/N) Σ x_k sin(2πjk/N)`. All sine/cosine summation
//! kernels in the solver are expressed through these two projections.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

/// A cached inverse-FFT plan for one transform length.
///
/// Plans are cheap to clone (`Arc` inside) and safe to share across threads;
/// working buffers are allocated per call so a single plan can be used
/// concurrently.
#[derive(Clone)]
pub(crate) struct InverseDft {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl InverseDft {
    pub(crate) fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft(len, FftDirection::Inverse);
        Self { fft, len }
    }

    /// Normalized inverse DFT of a real vector. Returns the complex spectrum
    /// scaled by `1/N`.
    pub(crate) fn real_ifft(&self, x: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(x.len(), self.len, "input length must match the plan");
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        self.fft.process_with_scratch(&mut buf, &mut scratch);
        let scale = 1.0 / self.len as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Imaginary part of the normalized inverse DFT:
    /// `out[j] = (1/N) Σ_k x_k sin(2πjk/N)`.
    pub(crate) fn sine_projection(&self, x: &[f64]) -> Vec<f64> {
        self.real_ifft(x).iter().map(|c| c.im).collect()
    }
}
