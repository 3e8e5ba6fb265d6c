use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::jump_diffusion_solution;
use crate::domain::{Field, Lattice, SpectralNoise};
use crate::error::Result;
use crate::fock::{check_conservation, evolve, ConservationMode, FockBasis, FockOracle};
use crate::model::{ModelKind, ModelSpec};
use crate::rates::{channels, total_rate};
use crate::rng::{replica_rng, ReplicaRng};
use crate::spde::{build_match_kernel, NoiseOperatorSpec};

use super::generators::{FieldGen, KernelGen};
use super::report::Check;
use super::run::{match_residual, ADJOINTNESS_TOL, MATCH_TOL};
use super::scenario::{Caps, LatticeParams};

pub const CONSERVATION_TOL: f64 = 1e-10;
pub const VACUUM_TOL: f64 = 1e-12;
pub const SEMIGROUP_TOL: f64 = 1e-10;

/// Models and parameters exercised by [`run_invariants`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantSuite {
    pub lattice: LatticeParams,
    pub caps: Caps,
    pub t: f64,
    pub diffusion: f64,
    pub jump: KernelGen,
    /// Annihilation / budding / assassination kernel.
    pub pair: KernelGen,
    pub mu: FieldGen,
    pub gamma: FieldGen,
    pub lambda0: f64,
    pub u0: FieldGen,
    /// Random states sampled per model for the rate and adjointness checks.
    pub samples: usize,
    pub seed: u64,
}

impl Default for InvariantSuite {
    fn default() -> Self {
        Self {
            lattice: LatticeParams {
                sites: 4,
                length: 1.0,
            },
            caps: Caps { n_max: 3, total: 6 },
            t: 0.4,
            diffusion: 0.05,
            jump: KernelGen::Gaussian {
                amplitude: 1.0,
                width: 0.3,
            },
            pair: KernelGen::Gaussian {
                amplitude: 0.6,
                width: 0.3,
            },
            mu: FieldGen::Cosine {
                offset: 0.5,
                amplitude: 0.2,
                mode: 1,
            },
            gamma: FieldGen::Cosine {
                offset: 0.4,
                amplitude: 0.1,
                mode: 1,
            },
            lambda0: 0.5,
            u0: FieldGen::Cosine {
                offset: 1.0,
                amplitude: 0.3,
                mode: 1,
            },
            samples: 50,
            seed: 0,
        }
    }
}

impl InvariantSuite {
    fn models(&self, lat: Lattice) -> Result<(Vec<ModelSpec>, NoiseOperatorSpec)> {
        let jump = self.jump.build(&lat)?;
        let pair = self.pair.build(&lat)?;
        let mu = self.mu.build(&lat)?;
        let op = NoiseOperatorSpec::new(
            SpectralNoise::single_constant_mode(&lat, self.lambda0)?,
            vec![self.u0.build(&lat)?],
        )?;
        let models = vec![
            ModelSpec::jump_diffusion(lat, self.diffusion, jump)?,
            ModelSpec::diffusion_annihilation(lat, self.diffusion, pair.clone())?,
            ModelSpec::cable_dual(lat, pair.clone())?,
            ModelSpec::bbd(lat, mu.clone(), pair.clone())?,
            ModelSpec::sba(lat, mu, pair)?,
            ModelSpec::fission_amalgamation(
                lat,
                self.gamma.build(&lat)?,
                build_match_kernel(&op)?,
            )?,
        ];
        Ok((models, op))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Run every invariant whose name contains `filter` (all when `None`).
///
/// Names are `category/subject`, categories being `conservation`,
/// `semigroup`, `match`, `adjointness` and `rates`.
pub fn run_invariants(suite: &InvariantSuite, filter: Option<&str>) -> Result<Vec<Check>> {
    let lat = suite.lattice.build()?;
    let keep = |name: &str| filter.is_none_or(|f| name.contains(f));
    let (models, op) = suite.models(lat)?;
    let mut rng = replica_rng(suite.seed, 0);
    let mut out = Vec::new();
    let t = suite.t;

    for spec in &models {
        let kind = spec.kind.name();
        let wanted = ["conservation", "semigroup", "adjointness", "rates"]
            .iter()
            .any(|c| keep(&format!("{c}/{kind}")));
        if !wanted {
            continue;
        }
        let basis = FockBasis::new(
            lat,
            suite.caps.n_max,
            suite.caps.total,
            spec.kind.is_signed(),
        )?;
        let oracle = FockOracle::new(spec, basis.clone())?;
        let dim = basis.dim();
        let random = |rng: &mut ReplicaRng| -> Vec<f64> {
            (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
        };

        let name = format!("conservation/{kind} flat-left residual");
        if keep(&name) {
            let r = check_conservation(
                oracle.process(),
                &basis,
                oracle.cap_states(),
                ConservationMode::FlatLeft,
            )?;
            out.push(Check::at_most(name, r, CONSERVATION_TOL));
        }
        let name = format!("conservation/{kind} negative off-diagonal");
        if keep(&name) {
            let worst = oracle
                .process()
                .matrix()
                .iter()
                .filter(|(_, (i, j))| i != j)
                .fold(0.0f64, |m, (v, _)| m.max(-*v));
            out.push(Check::at_most(name, worst, VACUUM_TOL));
        }
        if spec.kind == ModelKind::JumpDiffusion {
            let name = format!("conservation/{kind} vacuum-left adjoint residual");
            if keep(&name) {
                let none = vec![false; basis.occupation_count()];
                let r = check_conservation(
                    &oracle.adjoint(),
                    &basis,
                    &none,
                    ConservationMode::VacuumLeft,
                )?;
                out.push(Check::at_most(name, r, VACUUM_TOL));
            }
        }

        let name = format!("semigroup/{kind} exp((s+t)M) = exp(sM) exp(tM)");
        if keep(&name) {
            let v = random(&mut rng);
            let whole = evolve(&v, oracle.full(), 1.5 * t)?;
            let split = evolve(&evolve(&v, oracle.full(), t)?, oracle.full(), 0.5 * t)?;
            out.push(Check::at_most(
                name,
                max_abs_diff(&whole, &split) / sup(&whole).max(1.0),
                SEMIGROUP_TOL,
            ));
        }

        let name = format!("adjointness/{kind} transpose identity");
        if keep(&name) {
            let mut worst = 0.0f64;
            for _ in 0..suite.samples.clamp(1, 5) {
                let (a, b) = (random(&mut rng), random(&mut rng));
                worst = worst.max(oracle.transpose_residual(&a, &b, t)?);
            }
            out.push(Check::at_most(name, worst, ADJOINTNESS_TOL));
        }

        let name = format!("rates/{kind} simulator total rate = -diagonal");
        if keep(&name) {
            let diag = oracle.process().diagonal();
            let open: Vec<usize> = (0..basis.occupation_count())
                .filter(|&i| !oracle.cap_states()[i])
                .collect();
            let mut chs = Vec::new();
            let mut worst = 0.0f64;
            for _ in 0..suite.samples {
                let occ = basis.occupation(open[rng.random_range(0..open.len())]);
                channels(spec, occ, &mut chs)?;
                let s = basis
                    .state_index(occ, 0)
                    .expect("open state is in the basis");
                worst = worst.max((total_rate(&chs) + diag[s]).abs());
            }
            out.push(Check::at_most(name, worst, 0.0));
        }
    }

    let jd = &models[0];
    let mut zrng = replica_rng(suite.seed, 1);
    let z = Field(
        (0..lat.sites())
            .map(|_| zrng.random_range(0.2..1.5))
            .collect(),
    );
    let name = "conservation/deterministic jump-diffusion mass";
    if keep(name) {
        let x = jump_diffusion_solution(&lat, &z, jd.diffusion, jd.pair()?, t)?;
        let ones = vec![1.0; lat.sites()];
        let (m0, m1) = (lat.inner_product(&z, &ones)?, lat.inner_product(&x, &ones)?);
        out.push(Check::at_most(
            name,
            (m1 - m0).abs() / m0.abs(),
            CONSERVATION_TOL,
        ));
    }
    let name = "semigroup/deterministic jump-diffusion flow";
    if keep(name) {
        let whole = jump_diffusion_solution(&lat, &z, jd.diffusion, jd.pair()?, 1.5 * t)?;
        let half = jump_diffusion_solution(&lat, &z, jd.diffusion, jd.pair()?, t)?;
        let split = jump_diffusion_solution(&lat, &half, jd.diffusion, jd.pair()?, 0.5 * t)?;
        out.push(Check::at_most(
            name,
            max_abs_diff(&whole, &split) / sup(&whole),
            SEMIGROUP_TOL,
        ));
    }
    let name = "match/kernel identity on random nonnegative fields";
    if keep(name) {
        out.push(Check::at_most(
            name,
            match_residual(&lat, &op, 100, suite.seed)?,
            MATCH_TOL,
        ));
    }
    Ok(out)
}
