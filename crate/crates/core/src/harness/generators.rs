use serde::{Deserialize, Serialize};

use crate::domain::{Field, Kernel2, Lattice, SpectralNoise};
use crate::error::{Error, Result};

/// Named two-point kernel recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelGen {
    /// Homogeneous periodic Gaussian profile.
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    Constant {
        value: f64,
    },
    /// Covariance kernel `lambda0 / (2 |Y|)` of one constant noise mode.
    SingleMode {
        lambda0: f64,
    },
    /// Explicit `L x L` table, row-major.
    Inline {
        values: Vec<Vec<f64>>,
    },
}

impl KernelGen {
    pub fn build(&self, lat: &Lattice) -> Result<Kernel2> {
        let n = lat.sites();
        match self {
            KernelGen::Gaussian { amplitude, width } => Kernel2::gaussian(lat, *amplitude, *width),
            KernelGen::Constant { value } => Ok(Kernel2::constant(n, *value)),
            KernelGen::SingleMode { lambda0 } => {
                Ok(Kernel2::constant(n, 0.5 * lambda0 / lat.length()))
            }
            KernelGen::Inline { values } => {
                if values.len() != n || values.iter().any(|r| r.len() != n) {
                    return Err(Error::Validation(format!(
                        "inline kernel must be {n} x {n} to match the lattice"
                    )));
                }
                let symmetric = (0..n).all(|i| (0..n).all(|j| values[i][j] == values[j][i]));
                Kernel2::new(n, values.iter().flatten().copied().collect(), symmetric)
            }
        }
    }
}

/// Named field recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldGen {
    Constant {
        value: f64,
    },
    /// `offset + amplitude cos(2 pi mode i / L)`.
    Cosine {
        offset: f64,
        amplitude: f64,
        mode: usize,
    },
    Inline {
        values: Vec<f64>,
    },
}

impl FieldGen {
    pub fn build(&self, lat: &Lattice) -> Result<Field> {
        match self {
            FieldGen::Constant { value } => Ok(Field::constant(lat, *value)),
            FieldGen::Cosine {
                offset,
                amplitude,
                mode,
            } => Ok(Field::cosine(lat, *offset, *amplitude, *mode)),
            FieldGen::Inline { values } => {
                if values.len() != lat.sites() {
                    return Err(Error::Validation(format!(
                        "inline field has {} values, lattice has {} sites",
                        values.len(),
                        lat.sites()
                    )));
                }
                Field::new(values.clone())
            }
        }
    }
}

/// Trace-class noise whose covariance kernel `1/2 sum_k lambda_k xi_k(p) xi_k(q)`
/// equals `r`, by eigendecomposition of `2 r`.
pub fn noise_for_kernel(lat: &Lattice, r: &Kernel2) -> Result<SpectralNoise> {
    if !r.is_symmetric() {
        return Err(Error::Validation(
            "noise covariance kernel must be symmetric".into(),
        ));
    }
    let eps = lat.spacing();
    let eig = (r.to_matrix() * 2.0).symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut lambdas = Vec::new();
    let mut modes = Vec::new();
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu < -floor {
            return Err(Error::Validation(format!(
                "noise covariance kernel is not positive semidefinite (eigenvalue {mu:.3e})"
            )));
        }
        if mu <= floor {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        lambdas.push(eps * mu);
        modes.push(Field(v.iter().map(|x| x / eps.sqrt()).collect()));
    }
    if lambdas.is_empty() {
        return SpectralNoise::single_constant_mode(lat, 0.0);
    }
    SpectralNoise::trace_class(lat, lambdas, modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_q_kernel;

    #[test]
    fn noise_reproduces_kernel() {
        let lat = Lattice::new(8, 0.125).unwrap();
        let r = KernelGen::Gaussian {
            amplitude: 0.8,
            width: 0.1,
        }
        .build(&lat)
        .unwrap();
        let q = build_q_kernel(&noise_for_kernel(&lat, &r).unwrap()).unwrap();
        for (a, b) in q.values().iter().zip(r.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let single = KernelGen::SingleMode { lambda0: 0.6 }.build(&lat).unwrap();
        let n = noise_for_kernel(&lat, &single).unwrap();
        assert_eq!(n.mode_count(), 1);
        assert!((n.eigenvalues()[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn inline_shapes_are_checked() {
        let lat = Lattice::new(3, 0.5).unwrap();
        assert!(KernelGen::Inline {
            values: vec![vec![1.0; 3]; 2]
        }
        .build(&lat)
        .is_err());
        assert!(FieldGen::Inline {
            values: vec![1.0; 4]
        }
        .build(&lat)
        .is_err());
        let k = KernelGen::Inline {
            values: vec![
                vec![1.0, 2.0, 3.0],
                vec![2.0, 1.0, 0.0],
                vec![3.0, 0.0, 1.0],
            ],
        }
        .build(&lat)
        .unwrap();
        assert!(k.is_symmetric());
    }
}
