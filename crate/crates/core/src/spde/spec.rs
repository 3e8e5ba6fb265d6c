use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{
    sample_noise_increment, Field, Kernel2, Kernel3, Lattice, NoiseKind, SpectralMultiplier,
    SpectralNoise,
};
use crate::error::{check_len, Error, Result};

pub const DEFAULT_BLOWUP_CEILING: f64 = 1e6;

/// Reaction drift `Z(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Drift {
    None,
    /// `eps sum_q R_pq (x_q - x_p)`.
    JumpRedistribution {
        kernel: Kernel2,
    },
    /// `-gamma_p x_p^2`.
    QuadraticDecay {
        gamma: Field,
    },
    /// `R_p x_p^2`.
    QuadraticGrowth {
        rate: Field,
    },
    /// `x_p eps sum_q R_pq x_q`.
    NonlocalQuadratic {
        kernel: Kernel2,
    },
}

/// `B(x) xi_k = sqrt(<u_k, x>_+) xi_k` with nonnegative weights `u_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseOperatorSpec {
    pub noise: SpectralNoise,
    pub weights: Vec<Field>,
}

impl NoiseOperatorSpec {
    pub fn new(noise: SpectralNoise, weights: Vec<Field>) -> Result<Self> {
        if noise.kind() != NoiseKind::TraceClass {
            return Err(Error::Unsupported(
                "state-dependent noise operator needs trace-class noise".into(),
            ));
        }
        check_len(noise.mode_count(), weights.len())?;
        Ok(Self { noise, weights })
    }

    /// `beta_km(x) = delta_km sqrt(<u_k, x>_+)`.
    pub fn coefficients(&self, lat: &Lattice, x: &[f64]) -> Result<Vec<f64>> {
        self.weights
            .iter()
            .map(|u| Ok(lat.inner_product(u, x)?.max(0.0).sqrt()))
            .collect()
    }

    /// `B(x) dW = sum_k beta_k(x) <xi_k, dW> xi_k`.
    pub fn apply(&self, lat: &Lattice, x: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
        let beta = self.coefficients(lat, x)?;
        let mut out = vec![0.0; lat.sites()];
        for (b, xi) in beta.iter().zip(self.noise.modes()) {
            let c = b * lat.inner_product(xi, dw)?;
            for (o, v) in out.iter_mut().zip(xi.iter()) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// `(B(x) xi_k)(p)`.
    pub fn mode_image(&self, lat: &Lattice, x: &[f64], k: usize) -> Result<Vec<f64>> {
        let beta = self.coefficients(lat, x)?;
        Ok(self.noise.modes()[k].iter().map(|v| beta[k] * v).collect())
    }
}

/// Three-point kernel with `eps sum_r R_pqr x_r = 1/2 sum_k lambda_k (B(x) xi_k)(p) (B(x) xi_k)(q)`
/// for nonnegative `x`: `R_pqr = 1/2 sum_k lambda_k u_k(r) xi_k(p) xi_k(q)`.
pub fn build_match_kernel(spec: &NoiseOperatorSpec) -> Result<Kernel3> {
    for (k, u) in spec.weights.iter().enumerate() {
        if let Some(r) = u.iter().position(|v| *v < 0.0) {
            return Err(Error::Unsupported(format!(
                "weight u_{k}({r}) = {} is negative; the clipped family is not linear there",
                u[r]
            )));
        }
    }
    let modes = spec.noise.modes();
    let n = modes.first().map_or(0, |m| m.len());
    let lam = spec.noise.eigenvalues();
    Kernel3::from_fn(n, |p, q, r| {
        0.5 * (0..modes.len())
            .map(|k| lam[k] * spec.weights[k][r] * (modes[k][p] * modes[k][q]))
            .sum::<f64>()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseSpec {
    None,
    /// `dW` with covariance `Q`.
    AdditiveQ {
        noise: SpectralNoise,
    },
    /// `B(x) dW` with the clipped square-root family.
    Multiplicative {
        operator: NoiseOperatorSpec,
    },
    /// `omega_p x_p dW_p`, cylindrical.
    GeometricCylindrical {
        omega: Field,
    },
    /// `sqrt(|x_p| (2 R_p + omega_p^2 |x_p|)) dW_p`, cylindrical.
    SqrtCylindrical {
        rate: Field,
        omega: Field,
    },
}

impl NoiseSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, NoiseSpec::None)
    }

    fn driving(&self) -> Option<SpectralNoise> {
        match self {
            NoiseSpec::None => None,
            NoiseSpec::AdditiveQ { noise } => Some(noise.clone()),
            NoiseSpec::Multiplicative { operator } => Some(operator.noise.clone()),
            NoiseSpec::GeometricCylindrical { .. } | NoiseSpec::SqrtCylindrical { .. } => {
                Some(SpectralNoise::cylindrical())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEm,
    ImexEm,
}

/// `dX = (D lap X - decay X + Z(X)) dt + B(X) dW` on a periodic lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdeSpec {
    pub lattice: Lattice,
    pub diffusion: f64,
    pub decay: f64,
    pub drift: Drift,
    pub noise: NoiseSpec,
    pub dt: f64,
    pub scheme: Scheme,
    pub blowup_ceiling: f64,
}

impl SpdeSpec {
    pub fn new(
        lattice: Lattice,
        diffusion: f64,
        decay: f64,
        drift: Drift,
        noise: NoiseSpec,
        dt: f64,
    ) -> Result<Self> {
        let s = Self {
            lattice,
            diffusion,
            decay,
            drift,
            noise,
            dt,
            scheme: Scheme::ExplicitEm,
            blowup_ceiling: DEFAULT_BLOWUP_CEILING,
        };
        s.validate()?;
        Ok(s)
    }

    /// Unit diffusion, unit decay: the cable operator `lap - 1`.
    pub fn cable(lattice: Lattice, drift: Drift, noise: NoiseSpec, dt: f64) -> Result<Self> {
        Self::new(lattice, 1.0, 1.0, drift, noise, dt)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Result<Self> {
        self.scheme = scheme;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_blowup_ceiling(mut self, ceiling: f64) -> Self {
        self.blowup_ceiling = ceiling;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        self.noise = noise;
        self.validate()?;
        Ok(self)
    }

    pub fn is_deterministic(&self) -> bool {
        self.noise.is_none()
    }

    /// `D dt / eps^2`.
    pub fn diffusion_number(&self) -> f64 {
        let eps = self.lattice.spacing();
        self.diffusion * self.dt / (eps * eps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) || !self.decay.is_finite() {
            return Err(Error::Validation(
                "diffusion must be finite and nonnegative, decay finite".into(),
            ));
        }
        if self.scheme == Scheme::ExplicitEm && self.diffusion_number() > 0.5 {
            return Err(Error::Validation(format!(
                "explicit scheme unstable: D dt / eps^2 = {:.3} > 0.5; use imex_em",
                self.diffusion_number()
            )));
        }
        let l = self.lattice.sites();
        match &self.drift {
            Drift::None => {}
            Drift::JumpRedistribution { kernel } | Drift::NonlocalQuadratic { kernel } => {
                check_len(l, kernel.size())?
            }
            Drift::QuadraticDecay { gamma: f } | Drift::QuadraticGrowth { rate: f } => {
                check_len(l, f.len())?
            }
        }
        match &self.noise {
            NoiseSpec::None => {}
            NoiseSpec::AdditiveQ { noise } => {
                if noise.kind() == NoiseKind::TraceClass {
                    check_len(l, noise.modes().first().map_or(l, |m| m.len()))?;
                }
            }
            NoiseSpec::Multiplicative { operator } => {
                for u in &operator.weights {
                    check_len(l, u.len())?;
                }
            }
            NoiseSpec::GeometricCylindrical { omega } => check_len(l, omega.len())?,
            NoiseSpec::SqrtCylindrical { rate, omega } => {
                check_len(l, rate.len())?;
                check_len(l, omega.len())?;
            }
        }
        Ok(())
    }

    /// Linear part `D lap x - decay x`.
    pub fn linear(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lap = self.lattice.laplacian(x)?;
        Ok(lap
            .iter()
            .zip(x)
            .map(|(l, v)| self.diffusion * l - self.decay * v)
            .collect())
    }

    /// Reaction drift `Z(x)`.
    pub fn reaction(&self, x: &[f64]) -> Vec<f64> {
        let l = x.len();
        let eps = self.lattice.spacing();
        match &self.drift {
            Drift::None => vec![0.0; l],
            Drift::JumpRedistribution { kernel } => (0..l)
                .map(|p| {
                    eps * (0..l)
                        .map(|q| kernel.get(p, q) * (x[q] - x[p]))
                        .sum::<f64>()
                })
                .collect(),
            Drift::QuadraticDecay { gamma } => (0..l).map(|p| -gamma[p] * x[p] * x[p]).collect(),
            Drift::QuadraticGrowth { rate } => (0..l).map(|p| rate[p] * x[p] * x[p]).collect(),
            Drift::NonlocalQuadratic { kernel } => (0..l)
                .map(|p| x[p] * eps * (0..l).map(|q| kernel.get(p, q) * x[q]).sum::<f64>())
                .collect(),
        }
    }

    /// Full drift `A x + Z(x)`.
    pub fn drift_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.linear(x)?;
        for (ai, zi) in a.iter_mut().zip(self.reaction(x)) {
            *ai += zi;
        }
        Ok(a)
    }

    /// `B(x) dW`.
    pub fn diffusion_term(&self, x: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.noise {
            NoiseSpec::None => vec![0.0; x.len()],
            NoiseSpec::AdditiveQ { .. } => dw.to_vec(),
            NoiseSpec::Multiplicative { operator } => operator.apply(&self.lattice, x, dw)?,
            NoiseSpec::GeometricCylindrical { omega } => {
                (0..x.len()).map(|p| omega[p] * x[p] * dw[p]).collect()
            }
            NoiseSpec::SqrtCylindrical { rate, omega } => (0..x.len())
                .map(|p| {
                    let y = x[p].abs();
                    (y * (2.0 * rate[p] + omega[p] * omega[p] * y)).sqrt() * dw[p]
                })
                .collect(),
        })
    }

    /// Wiener increment over `dt`, or `None` without noise.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<Option<Field>> {
        match self.noise.driving() {
            None => Ok(None),
            Some(n) => Ok(Some(sample_noise_increment(&n, &self.lattice, dt, rng)?)),
        }
    }
}

/// Reusable stepping workspace (FFT plans for the implicit solve).
pub struct Stepper<'a> {
    spec: &'a SpdeSpec,
    spectral: Option<SpectralMultiplier>,
    eigenvalues: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a SpdeSpec) -> Result<Self> {
        spec.validate()?;
        let lat = &spec.lattice;
        let spectral =
            (spec.scheme == Scheme::ImexEm).then(|| SpectralMultiplier::new(lat.sites()));
        let eigenvalues = (0..lat.sites())
            .map(|k| lat.laplacian_eigenvalue(k))
            .collect();
        Ok(Self {
            spec,
            spectral,
            eigenvalues,
        })
    }

    pub fn spec(&self) -> &SpdeSpec {
        self.spec
    }

    /// One step of size `dt` with a given increment. `step` is only used
    /// in blowup diagnostics.
    pub fn step_with(
        &self,
        x: &mut Vec<f64>,
        dt: f64,
        dw: Option<&[f64]>,
        step: usize,
    ) -> Result<()> {
        let s = self.spec;
        let noise = match dw {
            Some(dw) => s.diffusion_term(x, dw)?,
            None => vec![0.0; x.len()],
        };
        match &self.spectral {
            None => {
                let a = s.drift_field(x)?;
                for i in 0..x.len() {
                    x[i] += dt * a[i] + noise[i];
                }
            }
            Some(fft) => {
                let z = s.reaction(x);
                let rhs: Vec<f64> = (0..x.len()).map(|i| x[i] + dt * z[i] + noise[i]).collect();
                let mult: Vec<Complex64> = self
                    .eigenvalues
                    .iter()
                    .map(|&lam| {
                        Complex64::new(1.0 / (1.0 - dt * (s.diffusion * lam - s.decay)), 0.0)
                    })
                    .collect();
                *x = fft.apply(&rhs, &mult);
            }
        }
        if let Some(i) = x
            .iter()
            .position(|v| !v.is_finite() || v.abs() > s.blowup_ceiling)
        {
            return Err(Error::Blowup {
                step,
                detail: format!(
                    "|x[{i}]| = {} exceeds ceiling {}",
                    x[i].abs(),
                    s.blowup_ceiling
                ),
            });
        }
        Ok(())
    }
}

/// Number of steps of size `dt` covering `t_end`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be finite and >= 0, got {t_end}"
        )));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} is not a whole number of steps dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// One Euler-Maruyama step of size `spec.dt`.
pub fn em_step<R: Rng + ?Sized>(x: &Field, spec: &SpdeSpec, rng: &mut R) -> Result<Field> {
    let stepper = Stepper::new(spec)?;
    let dw = spec.sample_increment(spec.dt, rng)?;
    let mut v = x.to_vec();
    stepper.step_with(&mut v, spec.dt, dw.as_deref(), 0)?;
    Ok(Field(v))
}

/// Integrate from `z` to `t_end`.
pub fn integrate<R: Rng + ?Sized>(
    z: &Field,
    spec: &SpdeSpec,
    t_end: f64,
    rng: &mut R,
) -> Result<Field> {
    check_len(spec.lattice.sites(), z.len())?;
    let n = step_count(t_end, spec.dt)?;
    let stepper = Stepper::new(spec)?;
    let mut x = z.to_vec();
    for k in 0..n {
        let dw = spec.sample_increment(spec.dt, rng)?;
        stepper.step_with(&mut x, spec.dt, dw.as_deref(), k)?;
    }
    Ok(Field(x))
}

/// As `integrate`, writing `step,site,value` rows every `every` steps.
pub fn integrate_recorded<R: Rng + ?Sized, W: std::io::Write>(
    z: &Field,
    spec: &SpdeSpec,
    t_end: f64,
    rng: &mut R,
    every: usize,
    out: &mut csv::Writer<W>,
) -> Result<Field> {
    check_len(spec.lattice.sites(), z.len())?;
    let n = step_count(t_end, spec.dt)?;
    let every = every.max(1);
    let stepper = Stepper::new(spec)?;
    let mut x = z.to_vec();
    let dump = |k: usize, x: &[f64], out: &mut csv::Writer<W>| -> Result<()> {
        for (i, v) in x.iter().enumerate() {
            out.write_record([k.to_string(), i.to_string(), format!("{v:.12e}")])?;
        }
        Ok(())
    };
    out.write_record(["step", "site", "value"])?;
    dump(0, &x, out)?;
    for k in 0..n {
        let dw = spec.sample_increment(spec.dt, rng)?;
        stepper.step_with(&mut x, spec.dt, dw.as_deref(), k)?;
        if (k + 1) % every == 0 || k + 1 == n {
            dump(k + 1, &x, out)?;
        }
    }
    Ok(Field(x))
}

/// Classical fourth-order Runge-Kutta on the drift alone.
pub fn rk4_integrate(z: &Field, spec: &SpdeSpec, t_end: f64, dt: f64) -> Result<Field> {
    let n = step_count(t_end, dt)?;
    let mut x = z.to_vec();
    let add = |a: &[f64], b: &[f64], h: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + h * y).collect()
    };
    for _ in 0..n {
        let k1 = spec.drift_field(&x)?;
        let k2 = spec.drift_field(&add(&x, &k1, dt / 2.0))?;
        let k3 = spec.drift_field(&add(&x, &k2, dt / 2.0))?;
        let k4 = spec.drift_field(&add(&x, &k3, dt))?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "fourth-order integration produced non-finite values".into(),
            ));
        }
    }
    Ok(Field(x))
}
