//! Spatial discretization shared by every solver: a periodic 1-D lattice,
//! real fields on it, two- and three-point kernels, spectral noise data and
//! the exact lattice heat semigroup.
//!
//! Continuum integrals map to `eps * sum_i` and double integrals to
//! `eps^2 * sum_ij` everywhere in the crate.

mod kernel;
mod lattice;
mod noise;
mod spectral;

pub use kernel::{Kernel2, Kernel3};
pub use lattice::{Field, Lattice};
pub use noise::{build_q_kernel, sample_noise_increment, NoiseKind, SpectralNoise};
pub use spectral::{HeatSemigroup, SpectralMultiplier};
