use crate::error::{Error, Result};

const ORDER: usize = 10;
const MAX_PANELS: usize = 1 << 14;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`, doubling the
/// panel count until the relative change is below `rel_tol`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let (x, w) = gauss_legendre(ORDER);
    let mut rule = |panels: usize| -> Result<f64> {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mut s = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                s += wi * f(lo + 0.5 * h * (xi + 1.0))?;
            }
            total += 0.5 * h * s;
        }
        Ok(total)
    };
    let mut panels = 1;
    let mut prev = rule(panels)?;
    loop {
        panels *= 2;
        let cur = rule(panels)?;
        if !cur.is_finite() {
            return Err(Error::Numerical(format!("quadrature produced {cur}")));
        }
        let change = (cur - prev).abs();
        if change <= rel_tol * cur.abs() || change == 0.0 {
            return Ok(cur);
        }
        if panels >= MAX_PANELS {
            return Err(Error::Numerical(format!(
                "quadrature did not reach relative tolerance {rel_tol} with {panels} panels (last change {change:.3e})"
            )));
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_match_known_values() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        let (_, w) = gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_converges() {
        let v = integrate(|s| Ok((-2.0 * s).exp() * (5.0 * s).cos()), 0.0, 3.0, 1e-12).unwrap();
        // int e^{-2s} cos 5s = e^{-2s}(-2 cos 5s + 5 sin 5s)/29
        let f = |s: f64| (-2.0 * s).exp() * (-2.0 * (5.0 * s).cos() + 5.0 * (5.0 * s).sin()) / 29.0;
        assert!((v - (f(3.0) - f(0.0))).abs() < 1e-12);
        assert_eq!(integrate(|_| Ok(1.0), 1.0, 1.0, 1e-8).unwrap(), 0.0);
    }
}
