use crate::domain::{HeatSemigroup, Kernel2, Lattice};
use crate::error::{check_len, Error, Result};

use super::{cable_mean, check_kernel, check_site, check_time, integrate, QUADRATURE_TOL};

pub const BBGKY_MAX_ORDER: usize = 3;

/// Level `k <= 1` of the hierarchy on its full grid at time `s`.
fn low_level(lat: &Lattice, z: &[f64], k: usize, s: f64) -> Result<Vec<f64>> {
    match k {
        0 => Ok(vec![1.0]),
        1 => Ok(cable_mean(lat, z, s)?.into_inner()),
        _ => unreachable!(),
    }
}

/// Source `sum_{i != j} R[q_i][q_j] C_{m-2}(s; q without i, j)` on the
/// `L^m` grid, row-major in `(q_0, .., q_{m-1})`.
fn source(lat: &Lattice, z: &[f64], r: &Kernel2, m: usize, s: f64) -> Result<Vec<f64>> {
    let n = lat.sites();
    let lower = low_level(lat, z, m - 2, s)?;
    let size = n.pow(m as u32);
    let mut out = vec![0.0; size];
    let mut q = vec![0usize; m];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rem = flat;
        for d in (0..m).rev() {
            q[d] = rem % n;
            rem /= n;
        }
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let rest: usize = (0..m)
                    .filter(|&k| k != i && k != j)
                    .fold(0, |idx, k| idx * n + q[k]);
                acc += r.get(q[i], q[j]) * lower[rest];
            }
        }
        *slot = acc;
    }
    Ok(out)
}

/// `(H_tau^{(x)m} f)(p)` for a grid function `f` on `L^m`.
fn product_heat_at(
    heat: &HeatSemigroup,
    f: &[f64],
    positions: &[usize],
    tau: f64,
    n: usize,
) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = positions
        .iter()
        .map(|&p| {
            let mut e = vec![0.0; n];
            e[p] = 1.0;
            heat.apply(&e, tau)
        })
        .collect();
    let mut acc = f.to_vec();
    for row in rows.iter().rev() {
        acc = acc
            .chunks(n)
            .map(|c| c.iter().zip(row).map(|(a, b)| a * b).sum())
            .collect();
    }
    acc
}

/// `E prod_k X_t(p_k)` for the cable equation, from the moment hierarchy:
/// each level is propagated by the product heat semigroup with decay
/// `e^{-m t}`, and the level two below enters as a Duhamel source.
pub fn bbgky_solve(
    lat: &Lattice,
    positions: &[usize],
    z: &[f64],
    r: &Kernel2,
    t: f64,
) -> Result<f64> {
    let m = positions.len();
    if m > BBGKY_MAX_ORDER {
        return Err(Error::Limit(format!(
            "hierarchy solver supports at most {BBGKY_MAX_ORDER} points, got {m}"
        )));
    }
    check_len(lat.sites(), z.len())?;
    check_kernel(lat, r)?;
    check_time(t)?;
    for &p in positions {
        check_site(lat, p)?;
    }
    let line = cable_mean(lat, z, t)?;
    let free: f64 = positions.iter().map(|&p| line[p]).product();
    if m < 2 {
        return Ok(free);
    }
    let n = lat.sites();
    let heat = HeatSemigroup::new(lat);
    let driven = integrate(
        |s| {
            let src = source(lat, z, r, m, s)?;
            let tau = t - s;
            let v = product_heat_at(&heat, &src, positions, tau, n)[0];
            Ok((-(m as f64) * tau).exp() * v)
        },
        0.0,
        t,
        QUADRATURE_TOL,
    )?;
    Ok(free + driven)
}
