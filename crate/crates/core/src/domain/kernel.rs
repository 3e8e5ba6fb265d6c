use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

use super::Lattice;

/// Two-point kernel `K[i][j]`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel2 {
    n: usize,
    values: Vec<f64>,
    symmetric: bool,
}

impl Kernel2 {
    /// Build from row-major values. With `symmetric` set, entries must match
    /// their transpose exactly.
    pub fn new(n: usize, values: Vec<f64>, symmetric: bool) -> Result<Self> {
        check_len(n * n, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel entry ({}, {}) is not finite",
                i / n,
                i % n
            )));
        }
        let k = Self {
            n,
            values,
            symmetric,
        };
        if symmetric {
            if let Some((i, j)) = k.asymmetry() {
                return Err(Error::Validation(format!(
                    "kernel declared symmetric but K[{i}][{j}] != K[{j}][{i}]"
                )));
            }
        }
        Ok(k)
    }

    pub fn from_fn(n: usize, symmetric: bool, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self::new(n, values, symmetric)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
            symmetric: true,
        }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            n,
            values: vec![value; n * n],
            symmetric: true,
        }
    }

    /// Translation-invariant kernel `K[i][j] = rho[(j - i) mod L]`.
    pub fn homogeneous(rho: &[f64]) -> Result<Self> {
        let n = rho.len();
        let symmetric = (0..n).all(|r| rho[r] == rho[(n - r) % n]);
        Self::from_fn(n, symmetric, |i, j| rho[(j + n - i) % n])
    }

    /// Homogeneous Gaussian profile `amplitude * exp(-d^2 / (2 width^2))`
    /// with `d` the periodic distance.
    pub fn gaussian(lat: &Lattice, amplitude: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian width must be positive, got {width}"
            )));
        }
        let n = lat.sites();
        let rho: Vec<f64> = (0..n)
            .map(|r| {
                let d = r.min(n - r) as f64 * lat.spacing();
                amplitude * (-d * d / (2.0 * width * width)).exp()
            })
            .collect();
        Self::homogeneous(&rho)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// First index pair violating exact symmetry, if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.get(i, j) != self.get(j, i) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Profile `rho` when `K[i][j]` depends only on `(j - i) mod L`.
    pub fn homogeneous_profile(&self) -> Option<Vec<f64>> {
        let n = self.n;
        let rho: Vec<f64> = (0..n).map(|r| self.get(0, r)).collect();
        for i in 0..n {
            for j in 0..n {
                if self.get(i, j) != rho[(j + n - i) % n] {
                    return None;
                }
            }
        }
        Some(rho)
    }

    /// Most negative entry with its indices.
    pub fn min_entry(&self) -> (usize, usize, f64) {
        let (idx, v) = self
            .values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        (idx / self.n, idx % self.n, v)
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    /// Overwrite one entry, dropping the symmetry flag if it breaks.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
        if self.symmetric && self.get(j, i) != v {
            self.symmetric = false;
        }
    }

    /// Same values, symmetry flag forced on without checking. Used to build
    /// corrupted fixtures.
    pub fn declare_symmetric_unchecked(mut self) -> Self {
        self.symmetric = true;
        self
    }
}

/// Three-point kernel `K[p][q][r]`, symmetric in `(p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel3 {
    n: usize,
    values: Vec<f64>,
}

impl Kernel3 {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n * n * n, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "three-point kernel has non-finite entries".into(),
            ));
        }
        let k = Self { n, values };
        if let Some((p, q, r)) = k.asymmetry() {
            return Err(Error::Validation(format!(
                "three-point kernel not symmetric in its first two indices at ({p}, {q}, {r})"
            )));
        }
        Ok(k)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n * n);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    values.push(f(p, q, r));
                }
            }
        }
        Self::new(n, values)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize) -> f64 {
        self.values[(p * self.n + q) * self.n + r]
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn asymmetry(&self) -> Option<(usize, usize, usize)> {
        for p in 0..self.n {
            for q in (p + 1)..self.n {
                for r in 0..self.n {
                    if self.get(p, q, r) != self.get(q, p, r) {
                        return Some((p, q, r));
                    }
                }
            }
        }
        None
    }

    /// `eps * sum_r K[p][q][r] x_r` as a two-point kernel.
    pub fn contract(&self, lat: &Lattice, x: &[f64]) -> Result<Kernel2> {
        check_len(self.n, x.len())?;
        let eps = lat.spacing();
        Kernel2::from_fn(self.n, false, |p, q| {
            eps * (0..self.n).map(|r| self.get(p, q, r) * x[r]).sum::<f64>()
        })
    }

    /// `eps * sum_r K[p][q][r]`: total amalgamation rate of an ordered pair.
    pub fn row_total(&self, lat: &Lattice, p: usize, q: usize) -> f64 {
        lat.spacing() * (0..self.n).map(|r| self.get(p, q, r)).sum::<f64>()
    }

    pub fn min_entry(&self) -> (usize, usize, usize, f64) {
        let (idx, v) = self
            .values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n, v)
    }

    /// Build without the symmetry check. Used to build corrupted fixtures.
    pub fn new_unchecked(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n * n);
        Self { n, values }
    }
}
