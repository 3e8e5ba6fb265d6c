//! Operators built directly from normal-ordered products of field
//! operators, independently of the rate table.
//!
//! A continuum monomial `coeff * int^k psi^+_{c_1}..psi^+_{c_C} psi_{a_1}..psi_{a_A}`
//! becomes `coeff * eps^{k - (C + A)/2} a^+..a^+ a..a` on the lattice. The
//! lattice Laplacian contributes its own `1 / eps^2`.

use crate::domain::{Field, Lattice};
use crate::error::{check_len, Error, Result};
use crate::model::{ModelKind, ModelSpec};

use super::basis::FockBasis;
use super::operator::{OperatorMatrix, Role};

/// `coeff * a^+_{create} a_{annihilate}`, optionally times the sign swap.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTerm {
    pub coeff: f64,
    pub create: Vec<usize>,
    pub annihilate: Vec<usize>,
    pub flip: bool,
}

impl LadderTerm {
    /// Lattice term from a continuum monomial with `integrals` space integrals.
    pub fn continuum(
        coeff: f64,
        integrals: i32,
        create: Vec<usize>,
        annihilate: Vec<usize>,
        eps: f64,
    ) -> Self {
        let power = integrals as f64 - (create.len() + annihilate.len()) as f64 / 2.0;
        Self {
            coeff: coeff * eps.powf(power),
            create,
            annihilate,
            flip: false,
        }
    }

    pub fn flipped(mut self) -> Self {
        self.flip = true;
        self
    }

    /// Image of occupation `occ` and its amplitude, projected on the basis.
    fn act(&self, occ: &[u32], basis: &FockBasis) -> Option<(usize, f64)> {
        let mut m = occ.to_vec();
        let mut amp = 1.0f64;
        for &a in &self.annihilate {
            if m[a] == 0 {
                return None;
            }
            amp *= m[a] as f64;
            m[a] -= 1;
        }
        for &c in &self.create {
            m[c] += 1;
            amp *= m[c] as f64;
        }
        basis.index_of(&m).map(|t| (t, self.coeff * amp.sqrt()))
    }
}

/// `coeff * int psi^+ (lap) psi` as hop terms plus diagonal.
fn laplacian_terms(lat: &Lattice, coeff: f64, out: &mut Vec<LadderTerm>) {
    let eps = lat.spacing();
    let h = coeff / (eps * eps);
    for i in 0..lat.sites() {
        for j in [lat.right(i), lat.left(i)] {
            out.push(LadderTerm::continuum(h, 1, vec![i], vec![j], eps));
        }
        out.push(LadderTerm::continuum(-2.0 * h, 1, vec![i], vec![i], eps));
    }
}

/// The full ket-side operator `L = L' + V` of a particle model, written
/// from the field-operator form of each model.
pub fn ladder_terms(spec: &ModelSpec) -> Result<Vec<LadderTerm>> {
    let lat = &spec.lattice;
    let eps = lat.spacing();
    let l = lat.sites();
    let mut t = Vec::new();
    let term = LadderTerm::continuum;
    match spec.kind {
        ModelKind::JumpDiffusion => {
            let r = spec
                .pair_kernel
                .as_ref()
                .ok_or_else(|| missing(spec, "R"))?;
            laplacian_terms(lat, spec.diffusion, &mut t);
            for p in 0..l {
                let tot = eps * (0..l).map(|q| r.get(p, q)).sum::<f64>();
                t.push(term(-tot, 1, vec![p], vec![p], eps));
                for q in 0..l {
                    t.push(term(r.get(p, q), 2, vec![q], vec![p], eps));
                }
            }
        }
        ModelKind::DiffusionAnnihilation => {
            let r = spec
                .pair_kernel
                .as_ref()
                .ok_or_else(|| missing(spec, "R"))?;
            laplacian_terms(lat, spec.diffusion, &mut t);
            for p in 0..l {
                for q in 0..l {
                    t.push(term(r.get(p, q), 2, vec![], vec![p, q], eps));
                    t.push(term(-r.get(p, q), 2, vec![p, q], vec![p, q], eps));
                }
            }
        }
        ModelKind::CableDual => {
            let r = spec
                .pair_kernel
                .as_ref()
                .ok_or_else(|| missing(spec, "R"))?;
            laplacian_terms(lat, spec.diffusion, &mut t);
            for p in 0..l {
                t.push(term(-1.0, 1, vec![p], vec![p], eps));
                for q in 0..l {
                    t.push(term(r.get(p, q), 2, vec![], vec![p, q], eps));
                }
            }
        }
        ModelKind::Bbd => {
            let mu = spec.mu.as_ref().ok_or_else(|| missing(spec, "mu"))?;
            let beta = spec.beta.as_ref().ok_or_else(|| missing(spec, "beta"))?;
            for p in 0..l {
                t.push(term(mu[p], 1, vec![], vec![p], eps));
                t.push(term(-mu[p], 1, vec![], vec![], eps));
                for q in 0..l {
                    t.push(term(beta.get(p, q), 2, vec![p, q], vec![p], eps));
                    t.push(term(-beta.get(p, q), 2, vec![p, q], vec![p, q], eps));
                }
            }
        }
        ModelKind::Sba => {
            let mu = spec.mu.as_ref().ok_or_else(|| missing(spec, "mu"))?;
            let beta = spec.beta.as_ref().ok_or_else(|| missing(spec, "beta"))?;
            for p in 0..l {
                t.push(term(mu[p], 1, vec![p], vec![], eps));
                t.push(term(-mu[p], 1, vec![], vec![], eps));
                for q in 0..l {
                    t.push(term(beta.get(p, q), 2, vec![p], vec![p, q], eps));
                    t.push(term(-beta.get(p, q), 2, vec![p, q], vec![p, q], eps));
                }
            }
        }
        ModelKind::FissionAmalgamation => {
            let gamma = spec.gamma.as_ref().ok_or_else(|| missing(spec, "gamma"))?;
            let r3 = spec
                .amalgamation
                .as_ref()
                .ok_or_else(|| missing(spec, "R"))?;
            for p in 0..l {
                t.push(term(gamma[p], 1, vec![p, p], vec![p], eps).flipped());
                for q in 0..l {
                    for r in 0..l {
                        t.push(term(r3.get(p, q, r), 3, vec![r], vec![p, q], eps));
                    }
                }
            }
        }
    }
    t.retain(|x| x.coeff != 0.0);
    Ok(t)
}

fn missing(spec: &ModelSpec, what: &str) -> Error {
    Error::InvalidArgument(format!("{} requires {what}", spec.kind))
}

/// Terms of the cylindrical-noise diffusion with quadratic drift
/// `dX = (lap X - X + R X^2) dt + omega X dW`, as its adjoint operator
/// `int psi^+ (lap - 1) psi + int R psi^+ psi^2 + int omega^2/2 (psi^+)^2 psi^2`.
pub fn geometric_diffusion_terms(
    lat: &Lattice,
    r: &Field,
    omega: &Field,
) -> Result<Vec<LadderTerm>> {
    check_len(lat.sites(), r.len())?;
    check_len(lat.sites(), omega.len())?;
    let eps = lat.spacing();
    let mut t = Vec::new();
    laplacian_terms(lat, 1.0, &mut t);
    for p in 0..lat.sites() {
        t.push(LadderTerm::continuum(-1.0, 1, vec![p], vec![p], eps));
        t.push(LadderTerm::continuum(r[p], 1, vec![p], vec![p, p], eps));
        t.push(LadderTerm::continuum(
            0.5 * omega[p] * omega[p],
            1,
            vec![p, p],
            vec![p, p],
            eps,
        ));
    }
    t.retain(|x| x.coeff != 0.0);
    Ok(t)
}

/// Matrix of a sum of ladder terms, projected on the basis.
pub fn ladder_matrix(
    terms: &[LadderTerm],
    basis: &FockBasis,
    role: Role,
) -> Result<OperatorMatrix> {
    let l = basis.lattice().sites();
    if let Some(bad) = terms
        .iter()
        .find(|t| t.create.iter().chain(&t.annihilate).any(|&s| s >= l))
    {
        return Err(Error::InvalidArgument(format!(
            "ladder term {bad:?} references a site outside the lattice"
        )));
    }
    if !basis.is_signed() && terms.iter().any(|t| t.flip) {
        return Err(Error::InvalidArgument(
            "sign-flip term on an unsigned basis".into(),
        ));
    }
    let mut trip = Vec::new();
    for (s, occ) in basis.occupations().iter().enumerate() {
        for term in terms {
            if let Some((tgt, v)) = term.act(occ, basis) {
                if basis.is_signed() {
                    for bit in 0..2 {
                        let tbit = if term.flip { 1 - bit } else { bit };
                        trip.push((2 * tgt + tbit, 2 * s + bit, v));
                    }
                } else {
                    trip.push((tgt, s, v));
                }
            }
        }
    }
    OperatorMatrix::from_triplets(role, basis.dim(), &trip)
}

/// `L' + V` of a particle model through the field-operator route.
pub fn ladder_liouvillian(spec: &ModelSpec, basis: &FockBasis) -> Result<OperatorMatrix> {
    ladder_matrix(&ladder_terms(spec)?, basis, Role::Liouvillian)
}
