use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::Lattice;
use crate::error::{Error, Result};

use super::generators::{FieldGen, KernelGen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioName {
    #[serde(rename = "S1_jump_diffusion", alias = "S1")]
    S1JumpDiffusion,
    #[serde(rename = "S2_cable", alias = "S2")]
    S2Cable,
    #[serde(rename = "S3_fermionic_decay", alias = "S3")]
    S3FermionicDecay,
    #[serde(rename = "S4_bbd_sba", alias = "S4")]
    S4BbdSba,
    #[serde(rename = "S5_diffusion_diffusion", alias = "S5")]
    S5DiffusionDiffusion,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::S1JumpDiffusion,
        ScenarioName::S2Cable,
        ScenarioName::S3FermionicDecay,
        ScenarioName::S4BbdSba,
        ScenarioName::S5DiffusionDiffusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::S1JumpDiffusion => "S1_jump_diffusion",
            ScenarioName::S2Cable => "S2_cable",
            ScenarioName::S3FermionicDecay => "S3_fermionic_decay",
            ScenarioName::S4BbdSba => "S4_bbd_sba",
            ScenarioName::S5DiffusionDiffusion => "S5_diffusion_diffusion",
        }
    }

    pub fn short(self) -> &'static str {
        &self.as_str()[..2]
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioName::S1JumpDiffusion => {
                "jump-diffusion particles vs deterministic jump-diffusion flow"
            }
            ScenarioName::S2Cable => {
                "annihilating random walks with decay vs stochastic cable equation"
            }
            ScenarioName::S3FermionicDecay => {
                "signed fission-amalgamation particles vs quadratic-decay SPDE"
            }
            ScenarioName::S4BbdSba => {
                "budding-birth-death vs spontaneous-birth-assassination densities"
            }
            ScenarioName::S5DiffusionDiffusion => "geometric-noise SPDE vs square-root-noise SPDE",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ScenarioName::ALL
            .into_iter()
            .find(|n| {
                n.as_str().to_ascii_lowercase() == lower || n.short().to_ascii_lowercase() == lower
            })
            .ok_or_else(|| {
                let valid: Vec<&str> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
                Error::InvalidArgument(format!(
                    "unknown scenario '{s}'; valid scenarios: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    AnalyticFourier,
    SpdeDeterministic,
    ParticleMc,
    PairingSum,
    Bbgky,
    SpdeEnsemble,
    ParticleFkMc,
    OracleSigned,
    ParticleSignedFkMc,
    OracleDensities,
    ParticleEndpointMc,
    SpdeXSide,
    SpdeYSide,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::AnalyticFourier => "analytic_fourier",
            Method::SpdeDeterministic => "spde_deterministic",
            Method::ParticleMc => "particle_mc",
            Method::PairingSum => "pairing_sum",
            Method::Bbgky => "bbgky",
            Method::SpdeEnsemble => "spde_ensemble",
            Method::ParticleFkMc => "particle_fk_mc",
            Method::OracleSigned => "oracle_signed",
            Method::ParticleSignedFkMc => "particle_signed_fk_mc",
            Method::OracleDensities => "oracle_densities",
            Method::ParticleEndpointMc => "particle_endpoint_mc",
            Method::SpdeXSide => "spde_x_side",
            Method::SpdeYSide => "spde_y_side",
        }
    }

    /// Stable tag for seed derivation.
    pub(crate) fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Methods that apply to a scenario, in report order.
pub fn method_matrix(name: ScenarioName) -> Vec<Method> {
    use Method::*;
    match name {
        ScenarioName::S1JumpDiffusion => {
            vec![Oracle, AnalyticFourier, SpdeDeterministic, ParticleMc]
        }
        ScenarioName::S2Cable => vec![Oracle, PairingSum, Bbgky, SpdeEnsemble, ParticleFkMc],
        ScenarioName::S3FermionicDecay => vec![OracleSigned, SpdeEnsemble, ParticleSignedFkMc],
        ScenarioName::S4BbdSba => vec![OracleDensities, ParticleEndpointMc],
        ScenarioName::S5DiffusionDiffusion => vec![SpdeXSide, SpdeYSide, Oracle],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    #[serde(rename = "L")]
    pub sites: usize,
    /// Total length `|Y|`; the spacing is `length / L`.
    pub length: f64,
}

impl LatticeParams {
    pub fn build(&self) -> Result<Lattice> {
        Lattice::with_length(self.sites, self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    pub n_max: u32,
    #[serde(rename = "N_max")]
    pub total: u32,
}

/// Pass iff `|a - b| <= sigmas sqrt(se_a^2 + se_b^2) + abs_tol + rel_tol max(|a|, |b|)`
/// plus each side's own bias allowance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub sigmas: f64,
    pub abs_tol: f64,
    #[serde(default)]
    pub rel_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            sigmas: 3.0,
            abs_tol: 1e-6,
            rel_tol: 0.0,
        }
    }
}

/// One duality experiment. Fields that a scenario does not use are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: ScenarioName,
    pub lattice: LatticeParams,
    pub t: f64,
    /// Particle positions `p_m`.
    #[serde(default)]
    pub positions: Vec<usize>,
    /// Second particle configuration `q_n` (S4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<usize>>,
    /// Initial field of the dual diffusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<FieldGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    /// Jump kernel (S1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<KernelGen>,
    /// Pair kernel `R`, also the noise covariance kernel (S2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<KernelGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<FieldGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<FieldGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<FieldGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<KernelGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<FieldGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<FieldGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<FieldGen>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<FieldGen>,
    pub caps: Caps,
    pub reps: usize,
    pub dt: f64,
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Subset of the method matrix to run; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
}

impl Scenario {
    fn base(name: ScenarioName, sites: usize, t: f64, caps: Caps, reps: usize, dt: f64) -> Self {
        Self {
            name,
            lattice: LatticeParams { sites, length: 1.0 },
            t,
            positions: Vec::new(),
            start: None,
            z: None,
            diffusion: None,
            jump: None,
            noise: None,
            gamma: None,
            lambda0: None,
            u0: None,
            mu: None,
            beta: None,
            x: None,
            y: None,
            rate: None,
            omega: None,
            caps,
            reps,
            dt,
            tolerance: Tolerance::default(),
            methods: None,
        }
    }

    /// Desk-scale defaults.
    pub fn default_for(name: ScenarioName) -> Self {
        match name {
            ScenarioName::S1JumpDiffusion => Self {
                positions: vec![2, 5],
                z: Some(FieldGen::Cosine {
                    offset: 1.0,
                    amplitude: 0.5,
                    mode: 1,
                }),
                diffusion: Some(1.0),
                jump: Some(KernelGen::Gaussian {
                    amplitude: 0.3,
                    width: 1.5,
                }),
                lattice: LatticeParams {
                    sites: 8,
                    length: 8.0,
                },
                ..Self::base(name, 8, 0.5, Caps { n_max: 2, total: 2 }, 10_000, 1e-4)
            },
            ScenarioName::S2Cable => Self {
                positions: vec![1, 4],
                z: Some(FieldGen::Cosine {
                    offset: 1.0,
                    amplitude: 0.4,
                    mode: 1,
                }),
                noise: Some(KernelGen::SingleMode { lambda0: 1.0 }),
                ..Self::base(name, 8, 0.5, Caps { n_max: 4, total: 6 }, 10_000, 1e-3)
            },
            ScenarioName::S3FermionicDecay => Self {
                positions: vec![1],
                z: Some(FieldGen::Cosine {
                    offset: 0.8,
                    amplitude: 0.2,
                    mode: 1,
                }),
                gamma: Some(FieldGen::Cosine {
                    offset: 0.5,
                    amplitude: 0.1,
                    mode: 1,
                }),
                lambda0: Some(0.5),
                u0: Some(FieldGen::Cosine {
                    offset: 1.0,
                    amplitude: 0.3,
                    mode: 1,
                }),
                ..Self::base(name, 4, 0.3, Caps { n_max: 6, total: 8 }, 10_000, 1e-3)
            },
            ScenarioName::S4BbdSba => Self {
                positions: vec![0, 1],
                start: Some(vec![1]),
                mu: Some(FieldGen::Inline {
                    values: vec![0.6, 0.4, 0.5],
                }),
                beta: Some(KernelGen::Constant { value: 0.3 }),
                tolerance: Tolerance {
                    sigmas: 3.0,
                    abs_tol: 0.0,
                    rel_tol: 1e-8,
                },
                ..Self::base(
                    name,
                    3,
                    0.3,
                    Caps {
                        n_max: 10,
                        total: 10,
                    },
                    100_000,
                    1e-3,
                )
            },
            ScenarioName::S5DiffusionDiffusion => Self {
                x: Some(FieldGen::Cosine {
                    offset: 0.15,
                    amplitude: 0.05,
                    mode: 1,
                }),
                y: Some(FieldGen::Cosine {
                    offset: 0.15,
                    amplitude: -0.05,
                    mode: 2,
                }),
                rate: Some(FieldGen::Constant { value: 0.3 }),
                omega: Some(FieldGen::Constant { value: 0.5 }),
                ..Self::base(name, 8, 0.1, Caps { n_max: 4, total: 4 }, 10_000, 1e-3)
            },
        }
    }

    pub fn lattice(&self) -> Result<Lattice> {
        self.lattice.build()
    }

    pub fn methods(&self) -> Vec<Method> {
        let all = method_matrix(self.name);
        match &self.methods {
            None => all,
            Some(sel) => all.into_iter().filter(|m| sel.contains(m)).collect(),
        }
    }

    pub(crate) fn need<'a, T>(&self, value: &'a Option<T>, field: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| {
            Error::Validation(format!("scenario {} requires field '{field}'", self.name))
        })
    }

    pub fn validate(&self) -> Result<()> {
        let lat = self.lattice()?;
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Validation(format!(
                "t must be finite and >= 0, got {}",
                self.t
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.reps < 2 {
            return Err(Error::Validation(format!(
                "reps must be at least 2, got {}",
                self.reps
            )));
        }
        let l = lat.sites();
        for (field, list) in [
            ("positions", Some(&self.positions)),
            ("start", self.start.as_ref()),
        ] {
            if let Some(p) = list.and_then(|v| v.iter().find(|&&p| p >= l)) {
                return Err(Error::Validation(format!(
                    "{field} contains site {p} outside lattice of {l} sites"
                )));
            }
        }
        if let Some(sel) = &self.methods {
            let all = method_matrix(self.name);
            if let Some(m) = sel.iter().find(|m| !all.contains(m)) {
                return Err(Error::Validation(format!(
                    "method {m} does not apply to {}",
                    self.name
                )));
            }
        }
        if self.tolerance.sigmas < 0.0
            || self.tolerance.abs_tol < 0.0
            || self.tolerance.rel_tol < 0.0
        {
            return Err(Error::Validation(
                "tolerance entries must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse_short_and_long() {
        assert_eq!(
            "S1".parse::<ScenarioName>().unwrap(),
            ScenarioName::S1JumpDiffusion
        );
        assert_eq!(
            "s4_bbd_sba".parse::<ScenarioName>().unwrap(),
            ScenarioName::S4BbdSba
        );
        let err = "S9".parse::<ScenarioName>().unwrap_err().to_string();
        assert!(err.contains("S5_diffusion_diffusion"));
    }

    #[test]
    fn defaults_validate() {
        for n in ScenarioName::ALL {
            Scenario::default_for(n).validate().unwrap();
        }
    }
}
