//! Coherent and pure state vectors in the normalized occupation basis.
//!
//! Lattice ladder operators satisfy `[a_i, a_j^+] = delta_ij` and stand for
//! `sqrt(eps) psi`, so a coherent state of `x` has per-site amplitude
//! `sqrt(eps) x_i` and a particle configuration `prod psi^+ |0>` carries
//! the factor `eps^{-n/2} prod sqrt(n_i!)`.

use crate::domain::Field;
use crate::error::{check_len, Error, Result};

use super::basis::FockBasis;

/// The paper's `|->` in the sign space, taken literally as `(|0> - |1>) / 2`.
pub const MINUS: [f64; 2] = [0.5, -0.5];
/// `<-|->`.
pub const MINUS_NORM_SQ: f64 = 0.5;

/// `c_n = prod eps^{n_i/2} / sqrt(n_i!)`: the coherent-state component of
/// the constant function 1, and the ratio between probability and
/// normalized coordinates.
pub fn occupation_weight(occ: &[u32], eps: f64) -> f64 {
    let mut w = 1.0;
    for &n in occ {
        for k in 1..=n {
            w *= eps.sqrt() / (k as f64).sqrt();
        }
    }
    w
}

fn tensor_minus(basis: &FockBasis, occ_vec: Vec<f64>) -> Vec<f64> {
    if !basis.is_signed() {
        return occ_vec;
    }
    let mut out = Vec::with_capacity(2 * occ_vec.len());
    for v in occ_vec {
        out.push(v * MINUS[0]);
        out.push(v * MINUS[1]);
    }
    out
}

fn coherent_components(x: &[f64], basis: &FockBasis) -> Vec<f64> {
    let eps = basis.lattice().spacing();
    let alpha: Vec<f64> = x.iter().map(|v| eps.sqrt() * v).collect();
    basis
        .occupations()
        .iter()
        .map(|occ| {
            let mut c = 1.0;
            for (n, a) in occ.iter().zip(&alpha) {
                for k in 1..=*n {
                    c *= a / (k as f64).sqrt();
                }
            }
            c
        })
        .collect()
}

/// Truncated coherent state `|x>`; tensored with `|->` in a signed basis.
pub fn coherent_vector(x: &Field, basis: &FockBasis) -> Result<Vec<f64>> {
    check_len(basis.lattice().sites(), x.len())?;
    Ok(tensor_minus(basis, coherent_components(x, basis)))
}

/// Truncated coherent state without the sign factor, `|x>` or `|x> (x) (|0> + |1>)`.
pub fn flat_coherent_vector(x: &Field, basis: &FockBasis) -> Result<Vec<f64>> {
    check_len(basis.lattice().sites(), x.len())?;
    let c = coherent_components(x, basis);
    if basis.is_signed() {
        Ok(c.into_iter().flat_map(|v| [v, v]).collect())
    } else {
        Ok(c)
    }
}

/// Particle configuration `prod_j psi^+_{p_j} |0>`; tensored with `|->` in a
/// signed basis.
pub fn pure_state_vector(positions: &[usize], basis: &FockBasis) -> Result<Vec<f64>> {
    let occ = basis.occupation_of_positions(positions)?;
    let idx = basis.index_of(&occ).ok_or_else(|| {
        Error::CapExceeded(format!(
            "configuration {occ:?} exceeds caps n_max={}, N_max={}",
            basis.n_max(),
            basis.total_cap()
        ))
    })?;
    let mut v = vec![0.0; basis.occupation_count()];
    v[idx] = 1.0 / occupation_weight(&occ, basis.lattice().spacing());
    Ok(tensor_minus(basis, v))
}

/// Unit vector of one basis state.
pub fn basis_vector(basis: &FockBasis, state: usize) -> Vec<f64> {
    let mut v = vec![0.0; basis.dim()];
    v[state] = 1.0;
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::stats::pairwise_sum(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Lattice;

    #[test]
    fn single_site_series() {
        let lat = Lattice::new(2, 0.25).unwrap();
        let basis = FockBasis::new(lat, 4, 4, false).unwrap();
        let x = Field(vec![1.3, 0.0]);
        let v = coherent_vector(&x, &basis).unwrap();
        let a = 0.5 * 1.3;
        let want = [
            1.0,
            a,
            a * a / 2f64.sqrt(),
            a.powi(3) / 6f64.sqrt(),
            a.powi(4) / 24f64.sqrt(),
        ];
        for (n, w) in want.iter().enumerate() {
            let i = basis.index_of(&[n as u32, 0]).unwrap();
            assert!((v[i] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_field_is_vacuum() {
        let lat = Lattice::new(3, 0.5).unwrap();
        let basis = FockBasis::new(lat, 2, 3, false).unwrap();
        let v = coherent_vector(&Field::zeros(&lat), &basis).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|c| *c == 0.0));
        assert_eq!(pure_state_vector(&[], &basis).unwrap(), v);
    }

    #[test]
    fn pure_against_coherent_is_product() {
        let lat = Lattice::new(4, 0.25).unwrap();
        let basis = FockBasis::new(lat, 3, 3, false).unwrap();
        let z = Field(vec![0.3, -1.1, 2.0, 0.7]);
        let c = coherent_vector(&z, &basis).unwrap();
        for ps in [vec![3], vec![0, 2], vec![1, 1], vec![2, 2, 1]] {
            let p = pure_state_vector(&ps, &basis).unwrap();
            let want: f64 = ps.iter().map(|&i| z[i]).product();
            assert!((dot(&p, &c) - want).abs() < 1e-13, "{ps:?}");
        }
        assert!(matches!(
            pure_state_vector(&[0, 0, 0, 0], &basis),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn coherent_overlap_is_exponential() {
        let lat = Lattice::new(3, 1.0 / 3.0).unwrap();
        let basis = FockBasis::new(lat, 12, 12, false).unwrap();
        let x = Field(vec![0.4, 0.9, -0.2]);
        let y = Field(vec![1.0, 0.5, 0.3]);
        let a = coherent_vector(&x, &basis).unwrap();
        let b = coherent_vector(&y, &basis).unwrap();
        let want = lat.inner_product(&x, &y).unwrap().exp();
        assert!((dot(&a, &b) - want).abs() < 1e-12);
    }

    #[test]
    fn signed_states_carry_minus() {
        let lat = Lattice::new(2, 0.5).unwrap();
        let basis = FockBasis::new(lat, 2, 2, true).unwrap();
        let z = Field(vec![0.8, 1.5]);
        let p = pure_state_vector(&[1], &basis).unwrap();
        let c = coherent_vector(&z, &basis).unwrap();
        assert!((dot(&p, &c) - MINUS_NORM_SQ * 1.5).abs() < 1e-15);
    }
}
