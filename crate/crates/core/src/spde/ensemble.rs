use serde::{Deserialize, Serialize};

use crate::domain::Field;
use crate::error::{check_len, Error, Result};
use crate::rng::replica_rng;
use crate::stats::{par_replicas, MeanEstimate};

use super::spec::{step_count, SpdeSpec, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub blowups: usize,
}

impl EnsembleEstimate {
    pub fn blowup_fraction(&self) -> f64 {
        self.blowups as f64 / (self.samples + self.blowups).max(1) as f64
    }
}

/// Estimates at `dt` and `dt / 2` from coupled paths (the coarse increment
/// is the sum of the two fine ones), and of their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalvingEstimate {
    pub coarse: EnsembleEstimate,
    pub fine: EnsembleEstimate,
    /// `fine - coarse` per replica.
    pub shift: EnsembleEstimate,
}

impl HalvingEstimate {
    /// `2 fine - coarse`, first-order bias removed.
    pub fn extrapolated(&self) -> f64 {
        2.0 * self.fine.mean - self.coarse.mean
    }
}

fn reduce(values: Vec<Option<f64>>) -> Result<EnsembleEstimate> {
    let blowups = values.iter().filter(|v| v.is_none()).count();
    let samples: Vec<f64> = values.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::Estimation(format!("all {blowups} replicas blew up")));
    }
    let e = MeanEstimate::from_samples(&samples);
    if !e.mean.is_finite() {
        return Err(Error::Numerical(format!("ensemble mean is {}", e.mean)));
    }
    Ok(EnsembleEstimate {
        mean: e.mean,
        stderr: e.stderr,
        samples: e.samples,
        blowups,
    })
}

fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 replicas, got {n_reps}"
        )));
    }
    Ok(())
}

/// Monte Carlo mean of `f(X_t)`. A deterministic spec runs one path.
pub fn ensemble<F>(
    z: &Field,
    spec: &SpdeSpec,
    t_end: f64,
    n_reps: usize,
    seed: u64,
    f: F,
) -> Result<EnsembleEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_reps(n_reps)?;
    check_len(spec.lattice.sites(), z.len())?;
    let n = step_count(t_end, spec.dt)?;
    let stepper = Stepper::new(spec)?;
    if spec.is_deterministic() {
        let mut x = z.to_vec();
        for k in 0..n {
            stepper.step_with(&mut x, spec.dt, None, k)?;
        }
        let v = f(&x);
        return Ok(EnsembleEstimate {
            mean: v,
            stderr: 0.0,
            samples: n_reps,
            blowups: 0,
        });
    }
    let values = par_replicas(n_reps, |rep| -> Result<Option<f64>> {
        let mut rng = replica_rng(seed, rep);
        let mut x = z.to_vec();
        for k in 0..n {
            let dw = spec.sample_increment(spec.dt, &mut rng)?;
            match stepper.step_with(&mut x, spec.dt, dw.as_deref(), k) {
                Ok(()) => {}
                Err(Error::Blowup { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Some(f(&x)))
    });
    reduce(values.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Coupled estimates at `dt` and `dt / 2`.
pub fn ensemble_halving<F>(
    z: &Field,
    spec: &SpdeSpec,
    t_end: f64,
    n_reps: usize,
    seed: u64,
    f: F,
) -> Result<HalvingEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_reps(n_reps)?;
    check_len(spec.lattice.sites(), z.len())?;
    let n = step_count(t_end, spec.dt)?;
    let fine_spec = spec.clone().with_dt(spec.dt / 2.0)?;
    let coarse = Stepper::new(spec)?;
    let fine = Stepper::new(&fine_spec)?;
    let h = spec.dt / 2.0;
    let values = par_replicas(n_reps, |rep| -> Result<Option<(f64, f64)>> {
        let mut rng = replica_rng(seed, rep);
        let mut xc = z.to_vec();
        let mut xf = z.to_vec();
        for k in 0..n {
            let d1 = spec.sample_increment(h, &mut rng)?;
            let d2 = spec.sample_increment(h, &mut rng)?;
            let dc: Option<Vec<f64>> = match (&d1, &d2) {
                (Some(a), Some(b)) => Some(a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()),
                _ => None,
            };
            let r = coarse
                .step_with(&mut xc, spec.dt, dc.as_deref(), k)
                .and_then(|_| fine.step_with(&mut xf, h, d1.as_deref(), 2 * k))
                .and_then(|_| fine.step_with(&mut xf, h, d2.as_deref(), 2 * k + 1));
            match r {
                Ok(()) => {}
                Err(Error::Blowup { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Some((f(&xc), f(&xf))))
    });
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(HalvingEstimate {
        coarse: reduce(values.iter().map(|v| v.map(|p| p.0)).collect())?,
        fine: reduce(values.iter().map(|v| v.map(|p| p.1)).collect())?,
        shift: reduce(values.iter().map(|v| v.map(|p| p.1 - p.0)).collect())?,
    })
}

/// `E prod_i X_t(p_i)`.
pub fn ensemble_product_moment(
    z: &Field,
    spec: &SpdeSpec,
    positions: &[usize],
    t_end: f64,
    n_reps: usize,
    seed: u64,
) -> Result<EnsembleEstimate> {
    check_positions(spec, positions)?;
    if positions.is_empty() {
        check_reps(n_reps)?;
        return Ok(EnsembleEstimate {
            mean: 1.0,
            stderr: 0.0,
            samples: n_reps,
            blowups: 0,
        });
    }
    ensemble(z, spec, t_end, n_reps, seed, |x| {
        positions.iter().map(|&p| x[p]).product()
    })
}

/// `E exp(<X_t, y>)`.
pub fn ensemble_exp_moment(
    x0: &Field,
    spec: &SpdeSpec,
    y: &Field,
    t_end: f64,
    n_reps: usize,
    seed: u64,
) -> Result<EnsembleEstimate> {
    check_len(spec.lattice.sites(), y.len())?;
    let lat = spec.lattice;
    ensemble(x0, spec, t_end, n_reps, seed, |x| {
        lat.inner_product(x, y).map(f64::exp).unwrap_or(f64::NAN)
    })
}

pub(crate) fn check_positions(spec: &SpdeSpec, positions: &[usize]) -> Result<()> {
    let l = spec.lattice.sites();
    if let Some(p) = positions.iter().find(|&&p| p >= l) {
        return Err(Error::InvalidArgument(format!(
            "position {p} outside lattice of {l} sites"
        )));
    }
    Ok(())
}
