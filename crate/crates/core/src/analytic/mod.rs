//! Closed-form and semi-analytic evaluators for the linear duals.

mod bbgky;
mod pairing;
mod quadrature;

use rustfft::num_complex::Complex64;

use crate::domain::{Field, HeatSemigroup, Kernel2, Lattice};
use crate::error::{check_len, Error, Result};

pub use bbgky::{bbgky_solve, BBGKY_MAX_ORDER};
pub use pairing::{
    cable_pairing_sum, cable_pairing_terms, enumerate_pairings, write_pairing_terms,
    PairingContribution, PairingTerm, PAIRING_MAX_ORDER,
};
pub use quadrature::{gauss_legendre, integrate};

/// Relative tolerance for time integrals.
pub const QUADRATURE_TOL: f64 = 1e-8;

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

fn check_site(lat: &Lattice, p: usize) -> Result<()> {
    if p >= lat.sites() {
        return Err(Error::InvalidArgument(format!(
            "position {p} outside lattice of {} sites",
            lat.sites()
        )));
    }
    Ok(())
}

fn check_kernel(lat: &Lattice, r: &Kernel2) -> Result<()> {
    check_len(lat.sites(), r.size())
}

/// `dx/dt = D lap x + eps sum_q R[p][q] (x_q - x_p)` from `z`, through the
/// discrete Fourier symbol of a translation-invariant `R`.
pub fn jump_diffusion_fourier(
    lat: &Lattice,
    z: &[f64],
    diffusion: f64,
    r: &Kernel2,
    t: f64,
) -> Result<Field> {
    check_len(lat.sites(), z.len())?;
    check_kernel(lat, r)?;
    check_time(t)?;
    let rho = r
        .homogeneous_profile()
        .ok_or_else(|| Error::Unsupported("jump kernel is not translation invariant".into()))?;
    let n = lat.sites();
    let eps = lat.spacing();
    let r_tot = eps * rho.iter().sum::<f64>();
    let heat = HeatSemigroup::new(lat);
    let mult: Vec<Complex64> = (0..n)
        .map(|k| {
            let m_k: Complex64 = rho
                .iter()
                .enumerate()
                .map(|(s, &v)| {
                    let th = 2.0 * std::f64::consts::PI * (k * s) as f64 / n as f64;
                    Complex64::new(th.cos(), th.sin()) * (eps * v)
                })
                .sum();
            ((m_k - r_tot + diffusion * heat.eigenvalues()[k]) * t).exp()
        })
        .collect();
    Ok(Field(heat.spectral().apply(z, &mult)))
}

/// Drift generator `D lap + eps R - diag(eps sum_q R[p][q])`.
pub fn jump_diffusion_generator(
    lat: &Lattice,
    diffusion: f64,
    r: &Kernel2,
) -> Result<nalgebra::DMatrix<f64>> {
    check_kernel(lat, r)?;
    let eps = lat.spacing();
    let mut a = lat.laplacian_matrix() * diffusion + r.to_matrix() * eps;
    for p in 0..lat.sites() {
        let row: f64 = (0..lat.sites()).map(|q| r.get(p, q)).sum();
        a[(p, p)] -= eps * row;
    }
    Ok(a)
}

/// Same flow by dense matrix exponential; works for any `R`.
pub fn jump_diffusion_dense(
    lat: &Lattice,
    z: &[f64],
    diffusion: f64,
    r: &Kernel2,
    t: f64,
) -> Result<Field> {
    check_len(lat.sites(), z.len())?;
    check_time(t)?;
    let a = jump_diffusion_generator(lat, diffusion, r)? * t;
    let out = a.exp() * nalgebra::DVector::from_column_slice(z);
    Ok(Field(out.iter().copied().collect()))
}

/// Fourier solution when `R` is translation invariant, dense otherwise.
pub fn jump_diffusion_solution(
    lat: &Lattice,
    z: &[f64],
    diffusion: f64,
    r: &Kernel2,
    t: f64,
) -> Result<Field> {
    match jump_diffusion_fourier(lat, z, diffusion, r, t) {
        Err(Error::Unsupported(_)) => jump_diffusion_dense(lat, z, diffusion, r, t),
        other => other,
    }
}

/// `(H_s R H_s)[p][q]` for the unit-rate lattice heat semigroup.
pub(crate) fn smoothed_kernel_entry(
    heat: &HeatSemigroup,
    r: &Kernel2,
    p: usize,
    q: usize,
    s: f64,
) -> f64 {
    let n = r.size();
    let mut ep = vec![0.0; n];
    ep[p] = 1.0;
    let hp = heat.apply(&ep, s);
    let hq = if p == q {
        hp.clone()
    } else {
        let mut eq = vec![0.0; n];
        eq[q] = 1.0;
        heat.apply(&eq, s)
    };
    let mut total = 0.0;
    for (a, &hpa) in hp.iter().enumerate() {
        let row: f64 = (0..n).map(|b| r.get(a, b) * hq[b]).sum();
        total += hpa * row;
    }
    total
}

/// Pair propagator `2 int_0^t e^{-2s} (H_s R H_s)[p_i][p_j] ds` of the cable
/// equation.
pub fn propagator_kk(lat: &Lattice, pi: usize, pj: usize, r: &Kernel2, t: f64) -> Result<f64> {
    check_site(lat, pi)?;
    check_site(lat, pj)?;
    check_kernel(lat, r)?;
    check_time(t)?;
    let heat = HeatSemigroup::new(lat);
    let (a, b) = if pi <= pj { (pi, pj) } else { (pj, pi) };
    let rr = if pi <= pj || r.is_symmetric() {
        r.clone()
    } else {
        transpose(r)?
    };
    integrate(
        |s| Ok(2.0 * (-2.0 * s).exp() * smoothed_kernel_entry(&heat, &rr, a, b, s)),
        0.0,
        t,
        QUADRATURE_TOL,
    )
}

fn transpose(r: &Kernel2) -> Result<Kernel2> {
    Kernel2::from_fn(r.size(), false, |i, j| r.get(j, i))
}

/// Single-line propagator `e^{-t} (H_t z)(p)`.
pub fn propagator_kj(lat: &Lattice, p: usize, z: &[f64], t: f64) -> Result<f64> {
    check_site(lat, p)?;
    check_time(t)?;
    Ok((-t).exp() * lat.heat_propagator(z, 1.0, t)?[p])
}

/// `e^{-t} H_t z` on every site.
pub fn cable_mean(lat: &Lattice, z: &[f64], t: f64) -> Result<Field> {
    check_time(t)?;
    let mut out = lat.heat_propagator(z, 1.0, t)?;
    let d = (-t).exp();
    out.iter_mut().for_each(|v| *v *= d);
    Ok(out)
}
