use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

use super::{Field, Kernel2, Lattice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    TraceClass,
    Cylindrical,
}

/// Covariance operator `Q` as eigenpairs `(lambda_k, xi_k)`, or the
/// cylindrical (identity covariance) noise which carries no modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralNoise {
    kind: NoiseKind,
    eigenvalues: Vec<f64>,
    modes: Vec<Field>,
}

impl SpectralNoise {
    /// Trace-class noise. Modes must be orthonormal under the lattice inner
    /// product and eigenvalues nonnegative.
    pub fn trace_class(lat: &Lattice, eigenvalues: Vec<f64>, modes: Vec<Field>) -> Result<Self> {
        check_len(eigenvalues.len(), modes.len())?;
        if let Some(k) = eigenvalues
            .iter()
            .position(|l| !(*l >= 0.0 && l.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue {k} must be finite and nonnegative, got {}",
                eigenvalues[k]
            )));
        }
        for (j, a) in modes.iter().enumerate() {
            check_len(lat.sites(), a.len())?;
            for (k, b) in modes.iter().enumerate().skip(j) {
                let g = lat.inner_product(a, b)?;
                let want = if j == k { 1.0 } else { 0.0 };
                if (g - want).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "noise modes {j} and {k} are not orthonormal: <xi_{j}, xi_{k}> = {g}"
                    )));
                }
            }
        }
        Ok(Self {
            kind: NoiseKind::TraceClass,
            eigenvalues,
            modes,
        })
    }

    /// One constant mode `xi_0 = 1/sqrt(|Y|)` with eigenvalue `lambda0`.
    pub fn single_constant_mode(lat: &Lattice, lambda0: f64) -> Result<Self> {
        let xi = Field::constant(lat, 1.0 / lat.length().sqrt());
        Self::trace_class(lat, vec![lambda0], vec![xi])
    }

    pub fn cylindrical() -> Self {
        Self {
            kind: NoiseKind::Cylindrical,
            eigenvalues: Vec::new(),
            modes: Vec::new(),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[Field] {
        &self.modes
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// `R_pq = 1/2 sum_k lambda_k xi_k(p) xi_k(q)`.
pub fn build_q_kernel(noise: &SpectralNoise) -> Result<Kernel2> {
    if noise.kind == NoiseKind::Cylindrical {
        return Err(Error::InvalidArgument(
            "cylindrical noise has no pointwise covariance kernel on the lattice".into(),
        ));
    }
    let n = noise.modes.first().map_or(0, |m| m.len());
    if n == 0 {
        return Err(Error::InvalidArgument(
            "trace-class noise without modes".into(),
        ));
    }
    Kernel2::from_fn(n, true, |p, q| {
        0.5 * noise
            .eigenvalues
            .iter()
            .zip(&noise.modes)
            .map(|(lam, xi)| lam * (xi[p] * xi[q]))
            .sum::<f64>()
    })
}

/// One Wiener increment over `dt`:
/// `sum_k sqrt(lambda_k) N(0, dt) xi_k` for trace-class noise, i.i.d.
/// `N(0, dt / eps)` per site for cylindrical noise.
pub fn sample_noise_increment<R: Rng + ?Sized>(
    noise: &SpectralNoise,
    lat: &Lattice,
    dt: f64,
    rng: &mut R,
) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise increment needs dt > 0, got {dt}"
        )));
    }
    let mut out = vec![0.0; lat.sites()];
    match noise.kind {
        NoiseKind::TraceClass => {
            let sd = dt.sqrt();
            for (lam, xi) in noise.eigenvalues.iter().zip(&noise.modes) {
                let g: f64 = rng.sample(StandardNormal);
                let c = lam.sqrt() * sd * g;
                for (o, x) in out.iter_mut().zip(xi.iter()) {
                    *o += c * x;
                }
            }
        }
        NoiseKind::Cylindrical => {
            let sd = (dt / lat.spacing()).sqrt();
            for o in out.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *o = sd * g;
            }
        }
    }
    Ok(Field(out))
}
