use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

use super::spectral::HeatSemigroup;

/// Periodic 1-D lattice of `sites` points with spacing `spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    sites: usize,
    spacing: f64,
}

impl Lattice {
    pub fn new(sites: usize, spacing: f64) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidArgument(format!(
                "lattice needs at least 2 sites, got {sites}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lattice spacing must be positive and finite, got {spacing}"
            )));
        }
        Ok(Self { sites, spacing })
    }

    /// Lattice covering a periodic interval of total length `length`.
    pub fn with_length(sites: usize, length: f64) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidArgument(
                "lattice needs at least 2 sites, got 0".into(),
            ));
        }
        Self::new(sites, length / sites as f64)
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.sites
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total length `L * eps` of the periodic interval.
    pub fn length(&self) -> f64 {
        self.sites as f64 * self.spacing
    }

    #[inline]
    pub fn right(&self, i: usize) -> usize {
        (i + 1) % self.sites
    }

    #[inline]
    pub fn left(&self, i: usize) -> usize {
        (i + self.sites - 1) % self.sites
    }

    /// Position of site `i` in `[0, length)`.
    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    /// Discrete inner product `eps * sum_i x_i y_i`.
    pub fn inner_product(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(self.sites, x.len())?;
        check_len(self.sites, y.len())?;
        Ok(self.spacing * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Discrete integral `eps * sum_i x_i`.
    pub fn integral(&self, x: &[f64]) -> f64 {
        self.spacing * x.iter().sum::<f64>()
    }

    /// Periodic second difference `(x_{i+1} - 2 x_i + x_{i-1}) / eps^2`.
    pub fn laplacian(&self, x: &[f64]) -> Result<Field> {
        check_len(self.sites, x.len())?;
        let h2 = self.spacing * self.spacing;
        let out = (0..self.sites)
            .map(|i| (x[self.right(i)] - 2.0 * x[i] + x[self.left(i)]) / h2)
            .collect();
        Ok(Field(out))
    }

    /// Eigenvalue of the lattice Laplacian on Fourier mode `k`.
    pub fn laplacian_eigenvalue(&self, k: usize) -> f64 {
        let theta = 2.0 * PI * k as f64 / self.sites as f64;
        -2.0 / (self.spacing * self.spacing) * (1.0 - theta.cos())
    }

    /// Dense Laplacian matrix, row-major.
    pub fn laplacian_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.sites;
        let h2 = self.spacing * self.spacing;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] -= 2.0 / h2;
            m[(i, self.right(i))] += 1.0 / h2;
            m[(i, self.left(i))] += 1.0 / h2;
        }
        m
    }

    /// `exp(t D lap) x`, exact through the discrete Fourier basis.
    pub fn heat_propagator(&self, x: &[f64], diffusion: f64, t: f64) -> Result<Field> {
        check_len(self.sites, x.len())?;
        if diffusion < 0.0 || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "heat propagator needs D >= 0 and t >= 0, got D={diffusion}, t={t}"
            )));
        }
        Ok(Field(HeatSemigroup::new(self).apply(x, diffusion * t)))
    }
}

/// Real values on the sites of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "field entry {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(lat: &Lattice) -> Self {
        Self(vec![0.0; lat.sites()])
    }

    pub fn constant(lat: &Lattice, value: f64) -> Self {
        Self(vec![value; lat.sites()])
    }

    /// `offset + amplitude * cos(2 pi mode p / |Y|)` sampled on the sites.
    pub fn cosine(lat: &Lattice, offset: f64, amplitude: f64, mode: usize) -> Self {
        let n = lat.sites() as f64;
        Self(
            (0..lat.sites())
                .map(|i| offset + amplitude * (2.0 * PI * mode as f64 * i as f64 / n).cos())
                .collect(),
        )
    }

    pub fn from_fn(lat: &Lattice, f: impl Fn(usize) -> f64) -> Self {
        Self((0..lat.sites()).map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
