use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Lattice;

/// Diagonal operator in the discrete Fourier basis of a periodic lattice.
///
/// Multipliers are indexed by wavenumber `k = 0..L` and act on
/// `x_hat_k = sum_j x_j e^{-2 pi i k j / L}`.
pub struct SpectralMultiplier {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl SpectralMultiplier {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Apply `multiplier[k]` to each Fourier coefficient of a real signal.
    /// The imaginary part of the result is discarded.
    pub fn apply(&self, x: &[f64], multiplier: &[Complex64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (c, m) in buf.iter_mut().zip(multiplier) {
            *c *= m;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Forward transform of a real signal.
    pub fn transform(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }
}

/// `exp(tau * lap)` on one lattice, with FFT plans built once.
pub struct HeatSemigroup {
    spectral: SpectralMultiplier,
    eigenvalues: Vec<f64>,
}

impl HeatSemigroup {
    pub fn new(lat: &Lattice) -> Self {
        Self {
            spectral: SpectralMultiplier::new(lat.sites()),
            eigenvalues: (0..lat.sites())
                .map(|k| lat.laplacian_eigenvalue(k))
                .collect(),
        }
    }

    /// Laplacian eigenvalue for wavenumber `k`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `exp(tau * lap) x` where `tau = D t`.
    pub fn apply(&self, x: &[f64], tau: f64) -> Vec<f64> {
        if tau == 0.0 {
            return x.to_vec();
        }
        let mult: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&lam| Complex64::new((tau * lam).exp(), 0.0))
            .collect();
        self.spectral.apply(x, &mult)
    }

    /// In-place application along the rows of a row-major `rows x L` block.
    pub fn apply_rows(&self, data: &mut [f64], tau: f64) {
        let n = self.eigenvalues.len();
        for row in data.chunks_mut(n) {
            let out = self.apply(row, tau);
            row.copy_from_slice(&out);
        }
    }

    pub fn spectral(&self) -> &SpectralMultiplier {
        &self.spectral
    }
}
