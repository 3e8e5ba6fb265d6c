use std::io::Write;

use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::error::{check_len, Error, Result};
use crate::model::ModelSpec;
use crate::rates::{channels, potential};

use super::basis::FockBasis;
use super::states::occupation_weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Liouvillian,
    AdjointLiouvillian,
    PotentialV,
    Observable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// Probability-conserving process generator (the paper's `L'`, or `L`
    /// for models without a potential).
    Process,
    /// `(L' + V)^T`, the operator evolving the coherent side.
    Adjoint,
    /// Diagonal Feynman-Kac potential.
    Potential,
}

/// Sparse operator on a Fock basis, tagged with its role.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    role: Role,
    matrix: CsMat<f64>,
}

impl OperatorMatrix {
    pub fn new(role: Role, matrix: CsMat<f64>) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::InvalidArgument(format!(
                "operator must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if let Some((v, (i, j))) = matrix.iter().find(|(v, _)| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "operator entry ({i}, {j}) = {v} is not finite"
            )));
        }
        let matrix = if matrix.is_csr() {
            matrix
        } else {
            matrix.to_csr()
        };
        Ok(Self { role, matrix })
    }

    pub(crate) fn from_triplets(
        role: Role,
        dim: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut tri = TriMat::with_capacity((dim, dim), triplets.len());
        for &(i, j, v) in triplets {
            tri.add_triplet(i, j, v);
        }
        Self::new(role, tri.to_csr())
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j).copied().unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for (v, (i, j)) in self.matrix.iter() {
            if i == j {
                d[i] += *v;
            }
        }
        d
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut y = vec![0.0; self.dim()];
        sprs::prod::mul_acc_mat_vec_csr(self.matrix.view(), x, &mut y[..]);
        Ok(y)
    }

    /// `x^T A` as a vector.
    pub fn left_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut y = vec![0.0; self.dim()];
        for (v, (i, j)) in self.matrix.iter() {
            y[j] += x[i] * v;
        }
        Ok(y)
    }

    pub fn transpose(&self, role: Role) -> Self {
        Self {
            role,
            matrix: self.matrix.transpose_view().to_csr(),
        }
    }

    pub fn add(&self, other: &OperatorMatrix, role: Role) -> Result<Self> {
        check_len(self.dim(), other.dim())?;
        Self::new(role, &self.matrix + &other.matrix)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        super::expm::to_dense(&self.matrix)
    }

    /// Coordinate triples `row col value`, one per line.
    pub fn write_triples<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# {:?} {}x{} nnz={}",
            self.role,
            self.dim(),
            self.dim(),
            self.nnz()
        )?;
        for (v, (i, j)) in self.matrix.iter() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

fn check_signedness(spec: &ModelSpec, basis: &FockBasis) -> Result<()> {
    check_len(spec.sites(), basis.lattice().sites())?;
    if spec.lattice != *basis.lattice() {
        return Err(Error::InvalidArgument(
            "model and basis lattices differ".into(),
        ));
    }
    if spec.kind.is_signed() != basis.is_signed() {
        return Err(Error::InvalidArgument(format!(
            "model {} needs a {} basis",
            spec.kind,
            if spec.kind.is_signed() {
                "signed"
            } else {
                "unsigned"
            }
        )));
    }
    Ok(())
}

/// Occupation states from which some enabled channel leaves the basis.
pub fn cap_states(spec: &ModelSpec, basis: &FockBasis) -> Result<Vec<bool>> {
    check_signedness(spec, basis)?;
    let mut chs = Vec::new();
    let mut out = Vec::with_capacity(basis.occupation_count());
    for occ in basis.occupations() {
        channels(spec, occ, &mut chs)?;
        let mut leaves = false;
        let mut next = occ.clone();
        for ch in &chs {
            next.copy_from_slice(occ);
            ch.kind.apply(&mut next);
            if basis.index_of(&next).is_none() {
                leaves = true;
                break;
            }
        }
        out.push(leaves);
    }
    Ok(out)
}

/// Assemble the requested operator from the lattice rate table.
///
/// States are represented in the normalized occupation basis, where the
/// probability-basis rate `Q[t][s]` becomes `Q[t][s] c_s / c_t` with
/// `c_n = prod eps^{n_i/2} / sqrt(n_i!)`. Columns of cap states are zero.
pub fn assemble_liouvillian(
    spec: &ModelSpec,
    basis: &FockBasis,
    which: Which,
) -> Result<OperatorMatrix> {
    spec.check_shapes()?;
    check_signedness(spec, basis)?;
    match which {
        Which::Process => assemble_process(spec, basis),
        Which::Potential => assemble_potential(spec, basis),
        Which::Adjoint => {
            let process = assemble_process(spec, basis)?;
            let full = if spec.kind.has_potential() {
                process.add(&assemble_potential(spec, basis)?, Role::Liouvillian)?
            } else {
                process
            };
            Ok(full.transpose(Role::AdjointLiouvillian))
        }
    }
}

fn assemble_process(spec: &ModelSpec, basis: &FockBasis) -> Result<OperatorMatrix> {
    let eps = basis.lattice().spacing();
    let weights: Vec<f64> = basis
        .occupations()
        .iter()
        .map(|o| occupation_weight(o, eps))
        .collect();
    let bits: &[usize] = if basis.is_signed() { &[0, 1] } else { &[0] };
    let mut chs = Vec::new();
    let mut trip = Vec::new();
    let mut next = vec![0u32; basis.lattice().sites()];
    let mut targets = Vec::new();
    for (s, occ) in basis.occupations().iter().enumerate() {
        channels(spec, occ, &mut chs)?;
        targets.clear();
        let mut capped = false;
        for ch in &chs {
            next.copy_from_slice(occ);
            let flip = ch.kind.apply(&mut next);
            match basis.index_of(&next) {
                Some(t) => targets.push((t, flip, ch.rate)),
                None => {
                    capped = true;
                    break;
                }
            }
        }
        if capped {
            continue;
        }
        let total: f64 = chs.iter().map(|c| c.rate).sum();
        for &bit in bits {
            let col = if basis.is_signed() { 2 * s + bit } else { s };
            trip.push((col, col, -total));
            for &(t, flip, rate) in &targets {
                let tbit = if flip { 1 - bit } else { bit };
                let row = if basis.is_signed() { 2 * t + tbit } else { t };
                trip.push((row, col, rate * weights[s] / weights[t]));
            }
        }
    }
    OperatorMatrix::from_triplets(Role::Liouvillian, basis.dim(), &trip)
}

fn assemble_potential(spec: &ModelSpec, basis: &FockBasis) -> Result<OperatorMatrix> {
    let mut trip = Vec::with_capacity(basis.dim());
    for (s, occ) in basis.occupations().iter().enumerate() {
        let v = potential(spec, occ)?;
        if basis.is_signed() {
            trip.push((2 * s, 2 * s, v));
            trip.push((2 * s + 1, 2 * s + 1, v));
        } else {
            trip.push((s, s, v));
        }
    }
    OperatorMatrix::from_triplets(Role::PotentialV, basis.dim(), &trip)
}
