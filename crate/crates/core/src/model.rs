//! Particle reaction schemes and their parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Field, Kernel2, Kernel3, Lattice};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Diffusion plus kernel jumps `A_p -> A_q` at `R_pq`.
    JumpDiffusion,
    /// Diffusion plus pairwise annihilation `A_p + A_q -> 0` at `R_pq`.
    DiffusionAnnihilation,
    /// Diffusion-annihilation with the cable Feynman-Kac potential attached.
    CableDual,
    /// Death at `mu_p`, budding `A_p -> A_p + A_q` at `beta_pq`.
    Bbd,
    /// Spontaneous birth at `mu_p`, assassination `A_p + A_q -> A_p` at `beta_pq`.
    Sba,
    /// Fission with sign flip at `gamma_p`, amalgamation `A_p + A_q -> A_r` at `R_pqr`.
    FissionAmalgamation,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::JumpDiffusion,
        ModelKind::DiffusionAnnihilation,
        ModelKind::CableDual,
        ModelKind::Bbd,
        ModelKind::Sba,
        ModelKind::FissionAmalgamation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::JumpDiffusion => "jump_diffusion",
            ModelKind::DiffusionAnnihilation => "diffusion_annihilation",
            ModelKind::CableDual => "cable_dual",
            ModelKind::Bbd => "bbd",
            ModelKind::Sba => "sba",
            ModelKind::FissionAmalgamation => "fission_amalgamation",
        }
    }

    /// Whether states carry the system-wide sign.
    pub fn is_signed(self) -> bool {
        self == ModelKind::FissionAmalgamation
    }

    /// Whether a Feynman-Kac potential is defined.
    pub fn has_potential(self) -> bool {
        matches!(
            self,
            ModelKind::JumpDiffusion
                | ModelKind::CableDual
                | ModelKind::Bbd
                | ModelKind::FissionAmalgamation
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown model '{s}', expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// A particle model on a lattice. Unused parameters stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lattice: Lattice,
    /// Homogeneous diffusion coefficient; each neighbor hop fires at `D / eps^2`.
    pub diffusion: f64,
    /// Jump kernel (jump-diffusion) or annihilation kernel (diffusion-annihilation, cable).
    pub pair_kernel: Option<Kernel2>,
    /// Death rate (BBD) or spontaneous birth density (SBA).
    pub mu: Option<Field>,
    /// Budding (BBD) or assassination (SBA) kernel.
    pub beta: Option<Kernel2>,
    /// Fission rate.
    pub gamma: Option<Field>,
    /// Amalgamation kernel.
    pub amalgamation: Option<Kernel3>,
}

impl ModelSpec {
    fn empty(kind: ModelKind, lattice: Lattice, diffusion: f64) -> Self {
        Self {
            kind,
            lattice,
            diffusion,
            pair_kernel: None,
            mu: None,
            beta: None,
            gamma: None,
            amalgamation: None,
        }
    }

    pub fn jump_diffusion(lattice: Lattice, diffusion: f64, jump: Kernel2) -> Result<Self> {
        let mut s = Self::empty(ModelKind::JumpDiffusion, lattice, diffusion);
        s.pair_kernel = Some(jump);
        s.check_shapes()?;
        Ok(s)
    }

    pub fn diffusion_annihilation(
        lattice: Lattice,
        diffusion: f64,
        annihilation: Kernel2,
    ) -> Result<Self> {
        let mut s = Self::empty(ModelKind::DiffusionAnnihilation, lattice, diffusion);
        s.pair_kernel = Some(annihilation);
        s.check_shapes()?;
        Ok(s)
    }

    /// Dual of the stochastic cable equation `dX = (lap X - X) dt + dW`:
    /// unit diffusion, annihilation at `R`, potential `-N + sum R`.
    pub fn cable_dual(lattice: Lattice, annihilation: Kernel2) -> Result<Self> {
        let mut s = Self::empty(ModelKind::CableDual, lattice, 1.0);
        s.pair_kernel = Some(annihilation);
        s.check_shapes()?;
        Ok(s)
    }

    pub fn bbd(lattice: Lattice, mu: Field, beta: Kernel2) -> Result<Self> {
        let mut s = Self::empty(ModelKind::Bbd, lattice, 0.0);
        s.mu = Some(mu);
        s.beta = Some(beta);
        s.check_shapes()?;
        Ok(s)
    }

    pub fn sba(lattice: Lattice, mu: Field, beta: Kernel2) -> Result<Self> {
        let mut s = Self::empty(ModelKind::Sba, lattice, 0.0);
        s.mu = Some(mu);
        s.beta = Some(beta);
        s.check_shapes()?;
        Ok(s)
    }

    pub fn fission_amalgamation(
        lattice: Lattice,
        gamma: Field,
        amalgamation: Kernel3,
    ) -> Result<Self> {
        let mut s = Self::empty(ModelKind::FissionAmalgamation, lattice, 0.0);
        s.gamma = Some(gamma);
        s.amalgamation = Some(amalgamation);
        s.check_shapes()?;
        Ok(s)
    }

    /// The same rates under the dual particle scheme (BBD <-> SBA).
    pub fn particle_dual(&self) -> Result<Self> {
        let kind = match self.kind {
            ModelKind::Bbd => ModelKind::Sba,
            ModelKind::Sba => ModelKind::Bbd,
            other => {
                return Err(Error::Unsupported(format!(
                    "{other} has no particle-particle dual"
                )));
            }
        };
        let mut s = self.clone();
        s.kind = kind;
        Ok(s)
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    pub(crate) fn pair(&self) -> Result<&Kernel2> {
        self.pair_kernel
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} requires a pair kernel", self.kind)))
    }

    pub(crate) fn mu(&self) -> Result<&Field> {
        self.mu
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} requires mu", self.kind)))
    }

    pub(crate) fn beta(&self) -> Result<&Kernel2> {
        self.beta
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} requires beta", self.kind)))
    }

    pub(crate) fn gamma(&self) -> Result<&Field> {
        self.gamma
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} requires gamma", self.kind)))
    }

    pub(crate) fn amalgamation(&self) -> Result<&Kernel3> {
        self.amalgamation.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("{} requires an amalgamation kernel", self.kind))
        })
    }

    /// Parameter shapes agree with the lattice and required parameters exist.
    pub fn check_shapes(&self) -> Result<()> {
        let l = self.sites();
        if !(self.diffusion.is_finite()) {
            return Err(Error::InvalidArgument(
                "diffusion coefficient is not finite".into(),
            ));
        }
        match self.kind {
            ModelKind::JumpDiffusion | ModelKind::DiffusionAnnihilation | ModelKind::CableDual => {
                check_len(l, self.pair()?.size())?;
            }
            ModelKind::Bbd | ModelKind::Sba => {
                check_len(l, self.mu()?.len())?;
                check_len(l, self.beta()?.size())?;
            }
            ModelKind::FissionAmalgamation => {
                check_len(l, self.gamma()?.len())?;
                check_len(l, self.amalgamation()?.size())?;
            }
        }
        Ok(())
    }

    /// Every parameter used as a stochastic rate must be nonnegative.
    pub fn validate_rates(&self) -> Result<()> {
        self.check_shapes()?;
        if self.diffusion < 0.0 {
            return Err(Error::Validation(format!(
                "diffusion D = {} is negative",
                self.diffusion
            )));
        }
        let field_check = |name: &str, f: &Field| -> Result<()> {
            if let Some(i) = f.iter().position(|v| *v < 0.0) {
                return Err(Error::Validation(format!(
                    "{name}[{i}] = {} is a negative rate",
                    f[i]
                )));
            }
            Ok(())
        };
        let kernel_check = |name: &str, k: &Kernel2| -> Result<()> {
            let (i, j, v) = k.min_entry();
            if v < 0.0 {
                return Err(Error::Validation(format!(
                    "{name}[{i}][{j}] = {v} is a negative rate"
                )));
            }
            Ok(())
        };
        match self.kind {
            ModelKind::JumpDiffusion => kernel_check("R", self.pair()?)?,
            ModelKind::DiffusionAnnihilation | ModelKind::CableDual => {
                kernel_check("R", self.pair()?)?
            }
            ModelKind::Bbd | ModelKind::Sba => {
                field_check("mu", self.mu()?)?;
                kernel_check("beta", self.beta()?)?;
            }
            ModelKind::FissionAmalgamation => {
                field_check("gamma", self.gamma()?)?;
                let (p, q, r, v) = self.amalgamation()?.min_entry();
                if v < 0.0 {
                    return Err(Error::Validation(format!(
                        "R[{p}][{q}][{r}] = {v} is a negative rate"
                    )));
                }
            }
        }
        Ok(())
    }
}
