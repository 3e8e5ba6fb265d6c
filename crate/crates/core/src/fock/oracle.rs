use serde::{Deserialize, Serialize};

use crate::domain::Field;
use crate::error::{check_len, Error, Result};
use crate::model::ModelSpec;

use super::basis::FockBasis;
use super::expm::expm_action;
use super::operator::{assemble_liouvillian, cap_states, OperatorMatrix, Role, Which};
use super::states::{
    coherent_vector, dot, flat_coherent_vector, occupation_weight, pure_state_vector, MINUS_NORM_SQ,
};

pub const DEFAULT_LEAKAGE_BOUND: f64 = 1e-4;

/// `exp(t M) v`.
pub fn evolve(v: &[f64], m: &OperatorMatrix, t: f64) -> Result<Vec<f64>> {
    check_len(m.dim(), v.len())?;
    expm_action(m.matrix(), v, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConservationMode {
    /// Left vector is the truncated coherent state of `x = 1` (both sign sectors).
    FlatLeft,
    /// Left vector is the vacuum.
    VacuumLeft,
}

/// Max-norm of `left^T M` over columns of states that are not capped.
/// `cap` is indexed by occupation; pass an all-false slice to check every column.
pub fn check_conservation(
    m: &OperatorMatrix,
    basis: &FockBasis,
    cap: &[bool],
    mode: ConservationMode,
) -> Result<f64> {
    check_len(basis.dim(), m.dim())?;
    check_len(basis.occupation_count(), cap.len())?;
    let left = match mode {
        ConservationMode::FlatLeft => {
            flat_coherent_vector(&Field::constant(basis.lattice(), 1.0), basis)?
        }
        ConservationMode::VacuumLeft => {
            let mut v = vec![0.0; basis.dim()];
            v[0] = 1.0;
            if basis.is_signed() {
                v[1] = 1.0;
            }
            v
        }
    };
    let r = m.left_apply(&left)?;
    // residual relative to the column scale of the flat weight
    let eps = basis.lattice().spacing();
    let mut worst = 0.0f64;
    for (s, v) in r.iter().enumerate() {
        let (occ_idx, _) = basis.split(s);
        if cap[occ_idx] {
            continue;
        }
        let scale = match mode {
            ConservationMode::FlatLeft => occupation_weight(basis.occupation(occ_idx), eps),
            ConservationMode::VacuumLeft => 1.0,
        };
        worst = worst.max((v / scale).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BraketResult {
    pub value: f64,
    /// Probability mass on cap states at the horizon.
    pub leakage: f64,
    pub flagged: bool,
    pub dim: usize,
}

/// Assembled operators of one model on one basis.
#[derive(Debug, Clone)]
pub struct FockOracle {
    spec: ModelSpec,
    basis: FockBasis,
    cap: Vec<bool>,
    process: OperatorMatrix,
    full: OperatorMatrix,
    leakage_bound: f64,
}

impl FockOracle {
    pub fn new(spec: &ModelSpec, basis: FockBasis) -> Result<Self> {
        let process = assemble_liouvillian(spec, &basis, Which::Process)?;
        let full = if spec.kind.has_potential() {
            process.add(
                &assemble_liouvillian(spec, &basis, Which::Potential)?,
                Role::Liouvillian,
            )?
        } else {
            process.clone()
        };
        let cap = cap_states(spec, &basis)?;
        Ok(Self {
            spec: spec.clone(),
            basis,
            cap,
            process,
            full,
            leakage_bound: DEFAULT_LEAKAGE_BOUND,
        })
    }

    pub fn with_leakage_bound(mut self, bound: f64) -> Self {
        self.leakage_bound = bound;
        self
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn cap_states(&self) -> &[bool] {
        &self.cap
    }

    /// Probability-conserving process generator.
    pub fn process(&self) -> &OperatorMatrix {
        &self.process
    }

    /// `L' + V`, evolving particle-side kets.
    pub fn full(&self) -> &OperatorMatrix {
        &self.full
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        self.full.transpose(Role::AdjointLiouvillian)
    }

    /// Cap-state probability mass at `t`, starting from the probability
    /// distribution proportional to `|c . v|`.
    pub fn leakage(&self, v: &[f64], t: f64) -> Result<f64> {
        check_len(self.basis.dim(), v.len())?;
        let eps = self.basis.lattice().spacing();
        let w: Vec<f64> = (0..v.len())
            .map(|s| occupation_weight(self.basis.occupation(self.basis.split(s).0), eps))
            .collect();
        let mass: Vec<f64> = v.iter().zip(&w).map(|(a, c)| (a * c).abs()).collect();
        let total: f64 = mass.iter().sum();
        if total == 0.0 {
            return Ok(0.0);
        }
        let start: Vec<f64> = mass.iter().zip(&w).map(|(m, c)| m / total / c).collect();
        let end = evolve(&start, &self.process, t)?;
        Ok(end
            .iter()
            .enumerate()
            .filter(|(s, _)| self.cap[self.basis.split(*s).0])
            .map(|(s, x)| x * w[s])
            .sum::<f64>()
            .max(0.0))
    }

    /// `<bra| exp(L^dag t) |ket>`, evaluated as `ket^T exp(L t) bra`.
    pub fn braket(&self, bra: &[f64], ket: &[f64], t: f64) -> Result<BraketResult> {
        check_len(self.basis.dim(), bra.len())?;
        check_len(self.basis.dim(), ket.len())?;
        let evolved = evolve(bra, &self.full, t)?;
        let mut value = dot(ket, &evolved);
        if self.basis.is_signed() {
            value /= MINUS_NORM_SQ;
        }
        if !value.is_finite() {
            return Err(Error::Numerical(format!("braket evaluated to {value}")));
        }
        let leakage = self.leakage(bra, t)?;
        Ok(BraketResult {
            value,
            leakage,
            flagged: leakage > self.leakage_bound,
            dim: self.basis.dim(),
        })
    }

    /// `C(p, z; t)` with `bra = pure(p)` and `ket = coherent(z)`.
    pub fn duality_c(&self, positions: &[usize], z: &Field, t: f64) -> Result<BraketResult> {
        let bra = pure_state_vector(positions, &self.basis)?;
        let ket = coherent_vector(z, &self.basis)?;
        self.braket(&bra, &ket, t)
    }

    /// Distribution over basis states at `t` starting from `positions` with
    /// sign bit 0, in probability coordinates. With `weighted`, each path
    /// carries `exp(int V)`.
    pub fn endpoint_distribution(
        &self,
        positions: &[usize],
        t: f64,
        weighted: bool,
    ) -> Result<Vec<f64>> {
        let occ = self.basis.occupation_of_positions(positions)?;
        let start = self.basis.state_index(&occ, 0).ok_or_else(|| {
            Error::CapExceeded(format!(
                "initial configuration {occ:?} is outside the basis"
            ))
        })?;
        let eps = self.basis.lattice().spacing();
        let mut v = vec![0.0; self.basis.dim()];
        v[start] = 1.0 / occupation_weight(&occ, eps);
        let m = if weighted { &self.full } else { &self.process };
        let end = evolve(&v, m, t)?;
        Ok(end
            .iter()
            .enumerate()
            .map(|(s, x)| x * occupation_weight(self.basis.occupation(self.basis.split(s).0), eps))
            .collect())
    }

    /// `|<a| e^{L^dag t} |b> - <b| e^{L t} |a>|`, each side by its own matrix.
    pub fn transpose_residual(&self, a: &[f64], b: &[f64], t: f64) -> Result<f64> {
        let adj = self.adjoint();
        let lhs = dot(a, &evolve(b, &adj, t)?);
        let rhs = dot(b, &evolve(a, &self.full, t)?);
        Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0))
    }
}

/// `<bra| exp(A t) |ket>` for an operator without a process interpretation.
pub fn raw_braket(bra: &[f64], a: &OperatorMatrix, ket: &[f64], t: f64) -> Result<f64> {
    check_len(a.dim(), bra.len())?;
    let v = dot(bra, &evolve(ket, a, t)?);
    if !v.is_finite() {
        return Err(Error::Numerical(format!("braket evaluated to {v}")));
    }
    Ok(v)
}
