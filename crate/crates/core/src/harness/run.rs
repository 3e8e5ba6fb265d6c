use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::analytic::{bbgky_solve, cable_pairing_sum, jump_diffusion_solution};
use crate::domain::{Field, Kernel2, Kernel3, Lattice, SpectralNoise};
use crate::error::{Error, Result};
use crate::fock::{
    coherent_vector, dot, geometric_diffusion_terms, ladder_matrix, pure_state_vector, raw_braket,
    FockBasis, FockOracle, OperatorMatrix, Role, DEFAULT_LEAKAGE_BOUND,
};
use crate::model::ModelSpec;
use crate::particle::{endpoint_density_estimate, feynman_kac_estimate, ParticleConfig};
use crate::rng::{derive_seed, replica_rng};
use crate::spde::{
    build_match_kernel, ensemble_halving, integrate, Drift, HalvingEstimate, NoiseOperatorSpec,
    NoiseSpec, Scheme, SpdeSpec, DEFAULT_BLOWUP_CEILING,
};

use super::generators::noise_for_kernel;
use super::report::{compare, Check, ComparisonReport, DualityEstimate, MethodFailure};
use super::scenario::{Method, Scenario, ScenarioName};

pub const ADJOINTNESS_TOL: f64 = 1e-10;
pub const MATCH_TOL: f64 = 1e-12;
pub const MAX_BLOWUP_FRACTION: f64 = 0.01;
/// S4 oracle ratio identity, relative.
pub const RATIO_TOL: f64 = 1e-8;

#[derive(Default)]
struct Output {
    estimates: Vec<DualityEstimate>,
    checks: Vec<Check>,
}

impl Output {
    fn one(e: DualityEstimate) -> Self {
        Self {
            estimates: vec![e],
            checks: Vec::new(),
        }
    }
}

/// Inputs built once from a scenario and shared by every method.
enum Prepared {
    S1 {
        model: ModelSpec,
        z: Field,
        jump: Kernel2,
        diffusion: f64,
    },
    S2 {
        model: ModelSpec,
        z: Field,
        r: Kernel2,
        noise: SpectralNoise,
    },
    S3 {
        model: ModelSpec,
        z: Field,
        gamma: Field,
        op: NoiseOperatorSpec,
    },
    S4 {
        bbd: ModelSpec,
        sba: ModelSpec,
        start: Vec<usize>,
    },
    S5 {
        x: Field,
        y: Field,
        rate: Field,
        omega: Field,
    },
}

struct Ctx<'a> {
    s: &'a Scenario,
    lat: Lattice,
    prep: Prepared,
}

fn failure_kind(e: &Error) -> &'static str {
    match e {
        Error::Numerical(_) => "numerical",
        Error::Blowup { .. } => "blowup",
        Error::Estimation(_) => "estimation",
        Error::Validation(_) | Error::InvalidArgument(_) | Error::LengthMismatch { .. } => {
            "validation"
        }
        Error::CapExceeded(_) => "cap",
        Error::Limit(_) => "limit",
        Error::Unsupported(_) => "unsupported",
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
    }
}

/// Stochastic differential equation with the explicit scheme when its
/// stability guard allows, implicit linear part otherwise.
fn auto_spde(
    lat: Lattice,
    diffusion: f64,
    decay: f64,
    drift: Drift,
    noise: NoiseSpec,
    dt: f64,
) -> Result<SpdeSpec> {
    let eps = lat.spacing();
    let scheme = if diffusion * dt / (eps * eps) > 0.5 {
        Scheme::ImexEm
    } else {
        Scheme::ExplicitEm
    };
    let s = SpdeSpec {
        lattice: lat,
        diffusion,
        decay,
        drift,
        noise,
        dt,
        scheme,
        blowup_ceiling: DEFAULT_BLOWUP_CEILING,
    };
    s.validate()?;
    Ok(s)
}

fn prepare(s: &Scenario, lat: Lattice) -> Result<Prepared> {
    Ok(match s.name {
        ScenarioName::S1JumpDiffusion => {
            let z = s.need(&s.z, "z")?.build(&lat)?;
            let jump = s.need(&s.jump, "jump")?.build(&lat)?;
            let diffusion = *s.need(&s.diffusion, "diffusion")?;
            let model = ModelSpec::jump_diffusion(lat, diffusion, jump.clone())?;
            Prepared::S1 {
                model,
                z,
                jump,
                diffusion,
            }
        }
        ScenarioName::S2Cable => {
            let z = s.need(&s.z, "z")?.build(&lat)?;
            let r = s.need(&s.noise, "noise")?.build(&lat)?;
            let noise = noise_for_kernel(&lat, &r)?;
            let model = ModelSpec::cable_dual(lat, r.clone())?;
            Prepared::S2 { model, z, r, noise }
        }
        ScenarioName::S3FermionicDecay => {
            let z = s.need(&s.z, "z")?.build(&lat)?;
            let gamma = s.need(&s.gamma, "gamma")?.build(&lat)?;
            let lambda0 = *s.need(&s.lambda0, "lambda0")?;
            let u0 = s.need(&s.u0, "u0")?.build(&lat)?;
            let op = NoiseOperatorSpec::new(
                SpectralNoise::single_constant_mode(&lat, lambda0)?,
                vec![u0],
            )?;
            let r3 = build_match_kernel(&op)?;
            let model = ModelSpec::fission_amalgamation(lat, gamma.clone(), r3)?;
            Prepared::S3 {
                model,
                z,
                gamma,
                op,
            }
        }
        ScenarioName::S4BbdSba => {
            let mu = s.need(&s.mu, "mu")?.build(&lat)?;
            let beta = s.need(&s.beta, "beta")?.build(&lat)?;
            let start = s.need(&s.start, "start")?.clone();
            Prepared::S4 {
                bbd: ModelSpec::bbd(lat, mu.clone(), beta.clone())?,
                sba: ModelSpec::sba(lat, mu, beta)?,
                start,
            }
        }
        ScenarioName::S5DiffusionDiffusion => Prepared::S5 {
            x: s.need(&s.x, "x")?.build(&lat)?,
            y: s.need(&s.y, "y")?.build(&lat)?,
            rate: s.need(&s.rate, "rate")?.build(&lat)?,
            omega: s.need(&s.omega, "omega")?.build(&lat)?,
        },
    })
}

impl Ctx<'_> {
    fn basis(&self, signed: bool) -> Result<FockBasis> {
        FockBasis::new(self.lat, self.s.caps.n_max, self.s.caps.total, signed)
    }

    fn oracle(&self, model: &ModelSpec) -> Result<FockOracle> {
        FockOracle::new(model, self.basis(model.kind.is_signed())?)
    }

    fn leakage_check(&self, label: &str, leakage: f64) -> Check {
        Check::at_most(format!("{label} leakage"), leakage, DEFAULT_LEAKAGE_BOUND)
    }

    fn s5_operator(&self, basis: &FockBasis) -> Result<OperatorMatrix> {
        let Prepared::S5 { rate, omega, .. } = &self.prep else {
            unreachable!()
        };
        ladder_matrix(
            &geometric_diffusion_terms(&self.lat, rate, omega)?,
            basis,
            Role::AdjointLiouvillian,
        )
    }

    /// Checks that must hold before any estimator runs.
    fn pre_checks(&self, seed: u64) -> Result<Vec<Check>> {
        let t = self.s.t;
        let mut out = Vec::new();
        let mut transpose = |name: &str, oracle: &FockOracle, a: &[f64], b: &[f64]| -> Result<()> {
            out.push(Check::at_most(
                format!("adjointness {name}"),
                oracle.transpose_residual(a, b, t)?,
                ADJOINTNESS_TOL,
            ));
            Ok(())
        };
        match &self.prep {
            Prepared::S1 { model, z, .. }
            | Prepared::S2 { model, z, .. }
            | Prepared::S3 { model, z, .. } => {
                let o = self.oracle(model)?;
                let a = pure_state_vector(&self.s.positions, o.basis())?;
                let b = coherent_vector(z, o.basis())?;
                transpose(model.kind.name(), &o, &a, &b)?;
            }
            Prepared::S4 { bbd, start, .. } => {
                let o = self.oracle(bbd)?;
                let a = pure_state_vector(&self.s.positions, o.basis())?;
                let b = pure_state_vector(start, o.basis())?;
                transpose(bbd.kind.name(), &o, &a, &b)?;
            }
            Prepared::S5 { x, y, .. } => {
                let basis = self.basis(false)?;
                let m = self.s5_operator(&basis)?;
                let (cx, cy) = (coherent_vector(x, &basis)?, coherent_vector(y, &basis)?);
                let lhs = raw_braket(&cy, &m, &cx, t)?;
                let rhs = raw_braket(&cx, &m.transpose(Role::Liouvillian), &cy, t)?;
                out.push(Check::at_most(
                    "adjointness geometric/square-root pair",
                    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0),
                    ADJOINTNESS_TOL,
                ));
            }
        }
        if let Prepared::S3 { op, .. } = &self.prep {
            out.push(Check::at_most(
                "match kernel residual",
                match_residual(&self.lat, op, 100, seed)?,
                MATCH_TOL,
            ));
        }
        Ok(out)
    }

    fn run(&self, method: Method, seed: u64) -> Result<Output> {
        let s = self.s;
        let (t, pos) = (s.t, s.positions.as_slice());
        let lat = &self.lat;
        let product = |x: &[f64]| pos.iter().map(|&p| x[p]).product::<f64>();
        match (&self.prep, method) {
            (Prepared::S1 { model, z, .. }, Method::Oracle)
            | (Prepared::S2 { model, z, .. }, Method::Oracle)
            | (Prepared::S3 { model, z, .. }, Method::OracleSigned) => {
                let c = self.oracle(model)?.duality_c(pos, z, t)?;
                Ok(Output {
                    estimates: vec![DualityEstimate::exact(method, c.value)
                        .with_leakage(c.leakage)
                        .with_diag("basis_dim", c.dim as f64)],
                    checks: vec![self.leakage_check(method.as_str(), c.leakage)],
                })
            }
            (
                Prepared::S1 {
                    z, jump, diffusion, ..
                },
                Method::AnalyticFourier,
            ) => {
                let x = jump_diffusion_solution(lat, z, *diffusion, jump, t)?;
                Ok(Output::one(DualityEstimate::exact(method, product(&x))))
            }
            (
                Prepared::S1 {
                    z, jump, diffusion, ..
                },
                Method::SpdeDeterministic,
            ) => {
                let drift = Drift::JumpRedistribution {
                    kernel: jump.clone(),
                };
                let coarse =
                    auto_spde(*lat, *diffusion, 0.0, drift.clone(), NoiseSpec::None, s.dt)?;
                let fine = auto_spde(*lat, *diffusion, 0.0, drift, NoiseSpec::None, s.dt / 2.0)?;
                let mut rng = replica_rng(seed, 0);
                let a = product(&integrate(z, &coarse, t, &mut rng)?);
                let b = product(&integrate(z, &fine, t, &mut rng)?);
                Ok(Output::one(
                    DualityEstimate::exact(method, 2.0 * b - a)
                        .with_diag("coarse", a)
                        .with_diag("fine", b),
                ))
            }
            (Prepared::S1 { model, z, .. }, Method::ParticleMc)
            | (Prepared::S2 { model, z, .. }, Method::ParticleFkMc)
            | (Prepared::S3 { model, z, .. }, Method::ParticleSignedFkMc) => {
                let init = ParticleConfig::from_positions(lat.sites(), pos)?;
                let e = feynman_kac_estimate(&init, model, z, t, s.reps, seed)?;
                let mut d = DualityEstimate::sampled(method, e.mean, e.stderr);
                d.diagnostics
                    .insert("exploded_fraction".into(), e.exploded_fraction());
                Ok(Output {
                    estimates: vec![d],
                    checks: vec![Check::at_most(
                        format!("{method} exploded fraction"),
                        e.exploded_fraction(),
                        MAX_BLOWUP_FRACTION,
                    )],
                })
            }
            (Prepared::S2 { z, r, .. }, Method::PairingSum) => Ok(Output::one(
                DualityEstimate::exact(method, cable_pairing_sum(lat, pos, z, r, t)?),
            )),
            (Prepared::S2 { z, r, .. }, Method::Bbgky) => Ok(Output::one(DualityEstimate::exact(
                method,
                bbgky_solve(lat, pos, z, r, t)?,
            ))),
            (Prepared::S2 { z, noise, .. }, Method::SpdeEnsemble) => {
                let spec = auto_spde(
                    *lat,
                    1.0,
                    1.0,
                    Drift::None,
                    NoiseSpec::AdditiveQ {
                        noise: noise.clone(),
                    },
                    s.dt,
                )?;
                self.halving(method, "", z, &spec, seed, product)
            }
            (Prepared::S3 { z, gamma, op, .. }, Method::SpdeEnsemble) => {
                let spec = auto_spde(
                    *lat,
                    0.0,
                    0.0,
                    Drift::QuadraticDecay {
                        gamma: gamma.clone(),
                    },
                    NoiseSpec::Multiplicative {
                        operator: op.clone(),
                    },
                    s.dt,
                )?;
                self.halving(method, "", z, &spec, seed, product)
            }
            (Prepared::S4 { bbd, sba, start }, Method::OracleDensities) => {
                let (sba_side, sba_leak) = self.s4_oracle(sba, start, pos, false)?;
                let (bbd_side, bbd_leak) = self.s4_oracle(bbd, pos, start, true)?;
                let resid = (sba_side - bbd_side).abs()
                    / sba_side.abs().max(bbd_side.abs()).max(f64::MIN_POSITIVE);
                Ok(Output {
                    estimates: vec![
                        DualityEstimate::exact(method, sba_side)
                            .labelled("sba")
                            .with_leakage(sba_leak),
                        DualityEstimate::exact(method, bbd_side)
                            .labelled("bbd_weighted")
                            .with_leakage(bbd_leak),
                    ],
                    checks: vec![
                        Check::at_most("ratio identity residual", resid, RATIO_TOL),
                        self.leakage_check("sba oracle", sba_leak),
                        self.leakage_check("bbd oracle", bbd_leak),
                    ],
                })
            }
            (Prepared::S4 { bbd, sba, start }, Method::ParticleEndpointMc) => {
                let a = self.s4_particle(sba, start, pos, false, derive_seed(seed, 1))?;
                let b = self.s4_particle(bbd, pos, start, true, derive_seed(seed, 2))?;
                let mut out = Output::default();
                for (e, label) in [(a, "sba"), (b, "bbd_weighted")] {
                    let (est, hits) = e;
                    out.checks.push(Check::at_most(
                        format!("{method}:{label} missing hits"),
                        (hits == 0) as u8 as f64,
                        0.0,
                    ));
                    out.estimates.push(est.labelled(label));
                }
                Ok(out)
            }
            (Prepared::S5 { x, y, rate, omega }, Method::SpdeXSide) => {
                let spec = auto_spde(
                    *lat,
                    1.0,
                    1.0,
                    Drift::QuadraticGrowth { rate: rate.clone() },
                    NoiseSpec::GeometricCylindrical {
                        omega: omega.clone(),
                    },
                    s.dt,
                )?;
                let lat = *lat;
                self.halving(method, "", x, &spec, seed, move |v| {
                    lat.inner_product(v, y).map(f64::exp).unwrap_or(f64::NAN)
                })
            }
            (Prepared::S5 { x, y, rate, omega }, Method::SpdeYSide) => {
                let spec = auto_spde(
                    *lat,
                    1.0,
                    1.0,
                    Drift::None,
                    NoiseSpec::SqrtCylindrical {
                        rate: rate.clone(),
                        omega: omega.clone(),
                    },
                    s.dt,
                )?;
                let lat = *lat;
                self.halving(method, "", y, &spec, seed, move |v| {
                    lat.inner_product(x, v).map(f64::exp).unwrap_or(f64::NAN)
                })
            }
            (Prepared::S5 { x, y, .. }, Method::Oracle) => {
                let braket = |n_max: u32| -> Result<(f64, f64)> {
                    let basis = FockBasis::new(*lat, n_max, n_max, false)?;
                    let m = self.s5_operator(&basis)?;
                    let (cx, cy) = (coherent_vector(x, &basis)?, coherent_vector(y, &basis)?);
                    let tail = (lat.inner_product(x, y)?.exp() - dot(&cy, &cx)).abs();
                    Ok((raw_braket(&cy, &m, &cx, t)?, tail))
                };
                let cap = s.caps.total;
                let (value, tail) = braket(cap)?;
                let step = if cap > 1 {
                    (value - braket(cap - 1)?.0).abs()
                } else {
                    tail
                };
                let leak = tail.max(step);
                Ok(Output {
                    estimates: vec![DualityEstimate::exact(method, value)
                        .with_leakage(leak)
                        .with_diag("initial_tail", tail)
                        .with_diag("cap_step", step)],
                    checks: vec![self.leakage_check("oracle", leak)],
                })
            }
            (_, m) => Err(Error::InvalidArgument(format!(
                "method {m} does not apply to {}",
                s.name
            ))),
        }
    }

    /// Coupled `dt`, `dt / 2` ensemble; reports the fine estimate with the
    /// measured shift as its bias allowance.
    fn halving<F>(
        &self,
        method: Method,
        suffix: &str,
        x0: &Field,
        spec: &SpdeSpec,
        seed: u64,
        f: F,
    ) -> Result<Output>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let h = ensemble_halving(x0, spec, self.s.t, self.s.reps, seed, f)?;
        let blow = h.coarse.blowup_fraction().max(h.fine.blowup_fraction());
        let mut e = DualityEstimate::sampled(method, h.fine.mean, h.fine.stderr)
            .with_diag("coarse_mean", h.coarse.mean)
            .with_diag("coarse_stderr", h.coarse.stderr)
            .with_diag("shift", h.shift.mean)
            .with_diag("shift_stderr", h.shift.stderr)
            .with_diag("dt", spec.dt / 2.0);
        if !suffix.is_empty() {
            e = e.labelled(suffix);
        }
        e.blowup_fraction = Some(blow);
        e.bias = h.shift.mean.abs();
        Ok(Output {
            checks: vec![
                Check::below(
                    format!("{} dt-halving shift", e.label),
                    h.shift.mean.abs(),
                    halving_scale(&h, spec.dt),
                ),
                Check::at_most(
                    format!("{} blowup fraction", e.label),
                    blow,
                    MAX_BLOWUP_FRACTION,
                ),
            ],
            estimates: vec![e],
        })
    }

    /// `prod n_i! / eps^{|n|}` times the probability of ending at `to`,
    /// optionally weighted by `exp(int V)`, with the leakage.
    fn s4_oracle(
        &self,
        model: &ModelSpec,
        from: &[usize],
        to: &[usize],
        weighted: bool,
    ) -> Result<(f64, f64)> {
        let o = self.oracle(model)?;
        let dist = o.endpoint_distribution(from, self.s.t, weighted)?;
        let occ = o.basis().occupation_of_positions(to)?;
        let idx = o
            .basis()
            .index_of(&occ)
            .ok_or_else(|| Error::CapExceeded(format!("target {occ:?} outside the basis")))?;
        let bra = pure_state_vector(from, o.basis())?;
        let leak = o.leakage(&bra, self.s.t)?;
        Ok((dist[idx] * density_factor(&occ, self.lat.spacing()), leak))
    }

    fn s4_particle(
        &self,
        model: &ModelSpec,
        from: &[usize],
        to: &[usize],
        weighted: bool,
        seed: u64,
    ) -> Result<(DualityEstimate, usize)> {
        let l = self.lat.sites();
        let init = ParticleConfig::from_positions(l, from)?;
        let target = ParticleConfig::from_positions(l, to)?;
        let e = endpoint_density_estimate(
            &init,
            model,
            &target,
            self.s.t,
            self.s.reps,
            seed,
            weighted,
        )?;
        let k = density_factor(&target.occupations, self.lat.spacing());
        let mut d =
            DualityEstimate::sampled(Method::ParticleEndpointMc, e.probability * k, e.stderr * k)
                .with_diag("hits", e.hits as f64)
                .with_diag("probability", e.probability);
        if let Some(bound) = e.zero_hit_bound {
            d.diagnostics.insert("zero_hit_bound".into(), bound * k);
        }
        d.diagnostics.insert(
            "exploded_fraction".into(),
            e.exploded as f64 / e.samples.max(1) as f64,
        );
        Ok((d, e.hits))
    }
}

/// Sampling error of the fine estimate, or `dt |mean|` for a noise-free ensemble.
fn halving_scale(h: &HalvingEstimate, dt: f64) -> f64 {
    if h.fine.stderr > 1e-12 * h.fine.mean.abs() {
        h.fine.stderr
    } else {
        dt * h.fine.mean.abs()
    }
}

fn density_factor(occ: &[u32], eps: f64) -> f64 {
    occ.iter()
        .map(|&n| (1..=n).map(|k| k as f64 / eps).product::<f64>())
        .product()
}

/// Largest `|eps sum_r R_pqr x_r - 1/2 sum_k lambda_k (B(x) xi_k)(p) (B(x) xi_k)(q)|`
/// over `trials` random nonnegative fields.
pub fn match_residual(
    lat: &Lattice,
    op: &NoiseOperatorSpec,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let k3: Kernel3 = build_match_kernel(op)?;
    let lam = op.noise.eigenvalues();
    let n = lat.sites();
    let mut rng = replica_rng(seed, u64::MAX);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let lhs = k3.contract(lat, &x)?;
        let images: Vec<Vec<f64>> = (0..lam.len())
            .map(|k| op.mode_image(lat, &x, k))
            .collect::<Result<_>>()?;
        for p in 0..n {
            for q in 0..n {
                let rhs = 0.5
                    * (0..lam.len())
                        .map(|k| lam[k] * images[k][p] * images[k][q])
                        .sum::<f64>();
                worst = worst.max((lhs.get(p, q) - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Run every selected method of a scenario and compare all pairs.
///
/// Errors only when the scenario itself is invalid; method failures are
/// recorded in the report.
pub fn run_scenario(s: &Scenario, seed: u64) -> Result<ComparisonReport> {
    let t0 = Instant::now();
    s.validate()?;
    let lat = s.lattice()?;
    let ctx = Ctx {
        s,
        lat,
        prep: prepare(s, lat)?,
    };
    let pre = ctx.pre_checks(seed)?;
    if let Some(c) = pre.iter().find(|c| !c.value.is_finite()) {
        return Err(Error::Numerical(format!(
            "{} evaluated to {}",
            c.name, c.value
        )));
    }
    let mut report = ComparisonReport {
        scenario: s.clone(),
        seed,
        estimates: Vec::new(),
        comparisons: Vec::new(),
        checks: pre,
        failures: Vec::new(),
        pass: false,
        runtime_s: 0.0,
    };
    if report.checks.iter().all(|c| c.pass) {
        let methods = s.methods();
        let results: Vec<(Method, Result<Output>, f64)> = methods
            .par_iter()
            .map(|&m| {
                let start = Instant::now();
                let r = ctx.run(m, derive_seed(seed, m.tag()));
                (m, r, start.elapsed().as_secs_f64())
            })
            .collect();
        for (m, r, secs) in results {
            match r {
                Ok(out) => {
                    for mut e in out.estimates {
                        e.runtime_s = secs;
                        report.estimates.push(e);
                    }
                    report.checks.extend(out.checks);
                }
                Err(e) => report.failures.push(MethodFailure {
                    method: m,
                    kind: failure_kind(&e).to_string(),
                    message: e.to_string(),
                }),
            }
        }
        report.comparisons = compare(&report.estimates, &s.tolerance);
    }
    report.runtime_s = t0.elapsed().as_secs_f64();
    report.finalize();
    Ok(report)
}
