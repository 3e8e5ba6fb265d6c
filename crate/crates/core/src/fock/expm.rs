//! Action of the matrix exponential.
//!
//! Small operators go through a dense Pade scaling-and-squaring
//! exponential; larger ones through a truncated-Taylor action with
//! scaling (Al-Mohy and Higham 2011) that only needs sparse products.

use nalgebra::{DMatrix, DVector};
use sprs::CsMat;

use crate::error::{check_len, Error, Result};

/// Dimension up to which `expm_action` forms the dense exponential.
pub const DENSE_LIMIT: usize = 256;

const THETA: [f64; 30] = [
    2.29e-16, 2.58e-8, 1.39e-5, 3.40e-4, 2.40e-3, 9.07e-3, 2.38e-2, 5.00e-2, 8.96e-2, 1.44e-1,
    2.14e-1, 3.00e-1, 4.00e-1, 5.14e-1, 6.41e-1, 7.81e-1, 9.31e-1, 1.09, 1.26, 1.44, 1.62, 1.82,
    2.01, 2.22, 2.43, 2.64, 2.86, 3.08, 3.31, 3.54,
];

const UNIT_ROUNDOFF: f64 = 1.1102230246251565e-16;

pub fn to_dense(a: &CsMat<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.rows(), a.cols());
    for (v, (i, j)) in a.iter() {
        m[(i, j)] += *v;
    }
    m
}

/// `exp(t A)` as a dense matrix.
pub fn expm_dense(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "evolution time must be finite and >= 0, got {t}"
        )));
    }
    let e = (a * t).exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "dense exponential of a {}x{} matrix at t={t} produced non-finite entries (max |A| = {})",
            a.nrows(),
            a.ncols(),
            a.abs().max()
        )));
    }
    Ok(e)
}

/// `exp(t A) v`, choosing the dense or Taylor path by dimension.
pub fn expm_action(a: &CsMat<f64>, v: &[f64], t: f64) -> Result<Vec<f64>> {
    if a.rows() <= DENSE_LIMIT {
        check_len(a.cols(), v.len())?;
        let e = expm_dense(&to_dense(a), t)?;
        let out = e * DVector::from_column_slice(v);
        Ok(out.as_slice().to_vec())
    } else {
        taylor_expmv(a, v, t)
    }
}

fn matvec(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    sprs::prod::mul_acc_mat_vec_csr(a.view(), x, &mut *y);
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Truncated Taylor series action with scaling and a trace shift.
pub fn taylor_expmv(a: &CsMat<f64>, v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "evolution time must be finite and >= 0, got {t}"
        )));
    }
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, not square",
            n,
            a.cols()
        )));
    }
    check_len(n, v.len())?;
    if t == 0.0 || n == 0 {
        return Ok(v.to_vec());
    }
    let a = if a.is_csr() { a.clone() } else { a.to_csr() };

    let mut diag = vec![0.0; n];
    for (val, (i, j)) in a.iter() {
        if i == j {
            diag[i] += *val;
        }
    }
    let mu = diag.iter().sum::<f64>() / n as f64;
    // 1-norm of t (A - mu I)
    let mut col = vec![0.0; n];
    for (val, (i, j)) in a.iter() {
        if i != j {
            col[j] += val.abs();
        }
    }
    let norm = t
        * (0..n)
            .map(|j| col[j] + (diag[j] - mu).abs())
            .fold(0.0, f64::max);
    if !norm.is_finite() {
        return Err(Error::Numerical("operator has non-finite entries".into()));
    }

    let (m, s) = if norm == 0.0 {
        (0, 1)
    } else {
        (1..=THETA.len())
            .map(|m| (m, (norm / THETA[m - 1]).ceil().max(1.0) as usize))
            .min_by_key(|&(m, s)| (m * s, m))
            .expect("nonempty theta table")
    };
    let eta = (t * mu / s as f64).exp();

    let mut f = v.to_vec();
    let mut b = v.to_vec();
    let mut ab = vec![0.0; n];
    for _ in 0..s {
        let mut c1 = inf_norm(&b);
        for k in 1..=m {
            matvec(&a, &b, &mut ab);
            let scale = t / (s * k) as f64;
            for i in 0..n {
                b[i] = scale * (ab[i] - mu * b[i]);
                f[i] += b[i];
            }
            let c2 = inf_norm(&b);
            if c1 + c2 <= UNIT_ROUNDOFF * inf_norm(&f) {
                break;
            }
            c1 = c2;
        }
        for x in f.iter_mut() {
            *x *= eta;
        }
        b.copy_from_slice(&f);
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "Taylor exponential action diverged (dim {n}, ||tA||_1 = {norm:.3e}, {s} scaling steps of degree {m})"
        )));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sprs::TriMat;

    fn two_state(r: f64) -> CsMat<f64> {
        let mut t = TriMat::new((2, 2));
        t.add_triplet(0, 0, -r);
        t.add_triplet(1, 0, r);
        t.add_triplet(0, 1, r);
        t.add_triplet(1, 1, -r);
        t.to_csr()
    }

    #[test]
    fn two_state_chain_closed_form() {
        let r: f64 = 0.7;
        let t = 1.3;
        let want = (1.0 - (-2.0 * r * t).exp()) / 2.0;
        let a = two_state(r);
        let d = expm_action(&a, &[1.0, 0.0], t).unwrap();
        let s = taylor_expmv(&a, &[1.0, 0.0], t).unwrap();
        assert!((d[1] - want).abs() < 1e-14);
        assert!((s[1] - want).abs() < 1e-14);
    }

    #[test]
    fn zero_time_is_identity() {
        let a = two_state(3.0);
        assert_eq!(
            taylor_expmv(&a, &[0.25, 0.5], 0.0).unwrap(),
            vec![0.25, 0.5]
        );
        assert_eq!(expm_action(&a, &[0.25, 0.5], 0.0).unwrap(), vec![0.25, 0.5]);
        assert!(taylor_expmv(&a, &[1.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn taylor_matches_dense_on_random_stiff_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let mut tri = TriMat::new((n, n));
        for i in 0..n {
            for _ in 0..5 {
                let j = rng.random_range(0..n);
                tri.add_triplet(i, j, rng.random_range(-20.0..20.0));
            }
            tri.add_triplet(i, i, -50.0);
        }
        let a: CsMat<f64> = tri.to_csr();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = expm_dense(&to_dense(&a), 0.4).unwrap() * DVector::from_column_slice(&v);
        let taylor = taylor_expmv(&a, &v, 0.4).unwrap();
        let scale = dense.amax();
        for i in 0..n {
            assert!(
                (dense[i] - taylor[i]).abs() <= 1e-10 * scale,
                "{} vs {}",
                dense[i],
                taylor[i]
            );
        }
    }

    #[test]
    fn semigroup_law() {
        let a = two_state(2.5);
        let half = taylor_expmv(&a, &[1.0, 0.0], 0.35).unwrap();
        let twice = taylor_expmv(&a, &half, 0.35).unwrap();
        let once = taylor_expmv(&a, &[1.0, 0.0], 0.7).unwrap();
        assert!((twice[0] - once[0]).abs() < 1e-12);
    }
}
