//! Exact stochastic simulation of the particle models with Feynman-Kac
//! weights and the system sign.

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::domain::Field;
use crate::error::{check_len, Error, Result};
use crate::model::ModelSpec;
use crate::rates::{channels, potential, Channel, ChannelKind};
use crate::rng::replica_rng;
use crate::stats::{par_replicas, MeanEstimate};

pub const DEFAULT_POPULATION_CAP: u32 = 64;

/// Particle configuration as site occupations, with sign, clock and the
/// accumulated `int V ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub occupations: Vec<u32>,
    /// `+1` or `-1`.
    pub sign: i8,
    pub clock: f64,
    pub fk_integral: f64,
    /// Absolute time of the next event, drawn on entering the current state.
    #[serde(skip)]
    next_event: Option<f64>,
}

impl ParticleConfig {
    pub fn from_positions(sites: usize, positions: &[usize]) -> Result<Self> {
        let mut occupations = vec![0u32; sites];
        for &p in positions {
            if p >= sites {
                return Err(Error::InvalidArgument(format!(
                    "site {p} outside lattice of {sites} sites"
                )));
            }
            occupations[p] += 1;
        }
        Ok(Self::from_occupations(occupations))
    }

    pub fn from_occupations(occupations: Vec<u32>) -> Self {
        Self {
            occupations,
            sign: 1,
            clock: 0.0,
            fk_integral: 0.0,
            next_event: None,
        }
    }

    pub fn with_sign(mut self, sign: i8) -> Self {
        self.sign = if sign < 0 { -1 } else { 1 };
        self
    }

    pub fn population(&self) -> u32 {
        self.occupations.iter().sum()
    }

    /// Sorted site indices, one per particle.
    pub fn positions(&self) -> Vec<usize> {
        self.occupations
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(i, n as usize))
            .collect()
    }

    /// `prod_j z(q_j)`.
    pub fn product(&self, z: &[f64]) -> f64 {
        self.occupations
            .iter()
            .zip(z)
            .map(|(&n, &zi)| zi.powi(n as i32))
            .product()
    }

    /// Same particles and sign.
    pub fn same_state(&self, other: &ParticleConfig) -> bool {
        self.occupations == other.occupations && self.sign == other.sign
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub config: ParticleConfig,
    pub event_count: u64,
    pub fission_count: u64,
    pub exploded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Fired(ChannelKind),
    ReachedEnd,
    Exploded,
}

/// Simulator state for one model; owns a reusable channel buffer.
#[derive(Debug, Clone)]
pub struct Gillespie<'a> {
    spec: &'a ModelSpec,
    population_cap: u32,
    chs: Vec<Channel>,
}

impl<'a> Gillespie<'a> {
    pub fn new(spec: &'a ModelSpec) -> Result<Self> {
        spec.validate_rates()?;
        Ok(Self {
            spec,
            population_cap: DEFAULT_POPULATION_CAP,
            chs: Vec::new(),
        })
    }

    pub fn with_population_cap(mut self, cap: u32) -> Self {
        self.population_cap = cap;
        self
    }

    /// Enabled channels at `cfg` and their total rate.
    pub fn total_rate_and_channels(&mut self, cfg: &ParticleConfig) -> Result<(f64, &[Channel])> {
        channels(self.spec, &cfg.occupations, &mut self.chs)?;
        let total = self.chs.iter().map(|c| c.rate).sum();
        Ok((total, &self.chs))
    }

    /// Potential at `cfg`, zero for models without one.
    pub fn evaluate_v(&self, cfg: &ParticleConfig) -> Result<f64> {
        if self.spec.kind.has_potential() {
            potential(self.spec, &cfg.occupations)
        } else {
            Ok(0.0)
        }
    }

    /// Advance to the next event or to `t_end`, whichever is first.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        cfg: &mut ParticleConfig,
        t_end: f64,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        check_len(self.spec.sites(), cfg.occupations.len())?;
        if cfg.clock >= t_end {
            return Ok(StepOutcome::ReachedEnd);
        }
        let v = self.evaluate_v(cfg)?;
        let (total, _) = self.total_rate_and_channels(cfg)?;
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "total event rate {total} at {:?}",
                cfg.occupations
            )));
        }
        let next = match cfg.next_event {
            Some(t) => t,
            None => {
                let t = if total > 0.0 {
                    let e: f64 = rng.sample(Exp1);
                    cfg.clock + e / total
                } else {
                    f64::INFINITY
                };
                cfg.next_event = Some(t);
                t
            }
        };
        if next >= t_end {
            cfg.fk_integral += v * (t_end - cfg.clock);
            cfg.clock = t_end;
            return Ok(StepOutcome::ReachedEnd);
        }
        cfg.fk_integral += v * (next - cfg.clock);
        cfg.clock = next;
        cfg.next_event = None;

        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = self.chs[self.chs.len() - 1].kind;
        for ch in &self.chs {
            acc += ch.rate;
            if u < acc {
                chosen = ch.kind;
                break;
            }
        }
        if matches!(
            chosen,
            ChannelKind::Bud { .. }
                | ChannelKind::SpontaneousBirth { .. }
                | ChannelKind::Fission { .. }
        ) && cfg.population() >= self.population_cap
        {
            return Ok(StepOutcome::Exploded);
        }
        if chosen.apply(&mut cfg.occupations) {
            cfg.sign = -cfg.sign;
        }
        Ok(StepOutcome::Fired(chosen))
    }

    /// Run from `initial` to `t_end`.
    pub fn simulate<R: Rng + ?Sized>(
        &mut self,
        initial: &ParticleConfig,
        t_end: f64,
        rng: &mut R,
    ) -> Result<TrajectoryResult> {
        self.run(initial, t_end, rng, None::<&mut csv::Writer<std::io::Sink>>)
    }

    /// As `simulate`, writing one CSV row per event.
    pub fn simulate_logged<R: Rng + ?Sized, W: Write>(
        &mut self,
        initial: &ParticleConfig,
        t_end: f64,
        rng: &mut R,
        log: &mut csv::Writer<W>,
    ) -> Result<TrajectoryResult> {
        self.run(initial, t_end, rng, Some(log))
    }

    fn run<R: Rng + ?Sized, W: Write>(
        &mut self,
        initial: &ParticleConfig,
        t_end: f64,
        rng: &mut R,
        mut log: Option<&mut csv::Writer<W>>,
    ) -> Result<TrajectoryResult> {
        if !(t_end >= initial.clock) {
            return Err(Error::InvalidArgument(format!(
                "end time {t_end} precedes configuration clock {}",
                initial.clock
            )));
        }
        let mut cfg = initial.clone();
        let mut event_count = 0;
        let mut fission_count = 0;
        loop {
            match self.step(&mut cfg, t_end, rng)? {
                StepOutcome::ReachedEnd => {
                    return Ok(TrajectoryResult {
                        config: cfg,
                        event_count,
                        fission_count,
                        exploded: false,
                    })
                }
                StepOutcome::Exploded => {
                    return Ok(TrajectoryResult {
                        config: cfg,
                        event_count,
                        fission_count,
                        exploded: true,
                    })
                }
                StepOutcome::Fired(kind) => {
                    event_count += 1;
                    if matches!(kind, ChannelKind::Fission { .. }) {
                        fission_count += 1;
                    }
                    if let Some(w) = log.as_deref_mut() {
                        w.write_record([
                            format!("{:.12}", cfg.clock),
                            kind.name().to_string(),
                            kind.sites_label(),
                            if cfg.sign > 0 { "+".into() } else { "-".into() },
                        ])?;
                    }
                }
            }
        }
    }
}

/// CSV writer with the event-log header `time,channel,sites,sign`.
pub fn event_log_writer<W: Write>(w: W) -> Result<csv::Writer<W>> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["time", "channel", "sites", "sign"])?;
    Ok(wr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Replicas that contributed.
    pub samples: usize,
    pub exploded: usize,
}

impl McEstimate {
    pub fn exploded_fraction(&self) -> f64 {
        self.exploded as f64 / (self.samples + self.exploded).max(1) as f64
    }
}

fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 replicas, got {n_reps}"
        )));
    }
    Ok(())
}

fn run_replicas(
    initial: &ParticleConfig,
    spec: &ModelSpec,
    t_end: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<TrajectoryResult>> {
    Gillespie::new(spec)?;
    let results = par_replicas(n_reps, |rep| {
        let mut sim = Gillespie::new(spec)?;
        let mut rng = replica_rng(seed, rep);
        sim.simulate(initial, t_end, &mut rng)
    });
    results.into_iter().collect()
}

/// `E[z(q_t) exp(int V) s]` where `s` is the sign relative to the initial
/// sign for signed models and 1 otherwise.
pub fn feynman_kac_estimate(
    initial: &ParticleConfig,
    spec: &ModelSpec,
    z: &Field,
    t_end: f64,
    n_reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(n_reps)?;
    check_len(spec.sites(), z.len())?;
    let signed = spec.kind.is_signed();
    let runs = run_replicas(initial, spec, t_end, n_reps, seed)?;
    let mut samples = Vec::with_capacity(n_reps);
    let mut exploded = 0;
    for r in &runs {
        if r.exploded {
            exploded += 1;
            continue;
        }
        let mut w = r.config.product(z) * r.config.fk_integral.exp();
        if signed && r.config.sign != initial.sign {
            w = -w;
        }
        samples.push(w);
    }
    finish(samples, exploded)
}

fn finish(samples: Vec<f64>, exploded: usize) -> Result<McEstimate> {
    if samples.is_empty() {
        return Err(Error::Estimation(format!(
            "all {exploded} replicas exploded"
        )));
    }
    let e = MeanEstimate::from_samples(&samples);
    if !e.mean.is_finite() {
        return Err(Error::Numerical(format!("estimator mean is {}", e.mean)));
    }
    Ok(McEstimate {
        mean: e.mean,
        stderr: e.stderr,
        samples: e.samples,
        exploded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointEstimate {
    pub probability: f64,
    pub stderr: f64,
    pub hits: usize,
    pub samples: usize,
    pub exploded: usize,
    /// One-sided 95% upper bound `3 / n` reported when there are no hits.
    pub zero_hit_bound: Option<f64>,
}

/// Fraction of replicas ending exactly at `target` (occupations and sign),
/// each hit weighted by `exp(int V)` when `weighted`.
pub fn endpoint_density_estimate(
    initial: &ParticleConfig,
    spec: &ModelSpec,
    target: &ParticleConfig,
    t_end: f64,
    n_reps: usize,
    seed: u64,
    weighted: bool,
) -> Result<EndpointEstimate> {
    check_reps(n_reps)?;
    check_len(spec.sites(), target.occupations.len())?;
    let runs = run_replicas(initial, spec, t_end, n_reps, seed)?;
    endpoint_from_runs(&runs, target, weighted)
}

/// Endpoint estimates for several targets from one replica set.
pub fn endpoint_histogram(
    initial: &ParticleConfig,
    spec: &ModelSpec,
    targets: &[ParticleConfig],
    t_end: f64,
    n_reps: usize,
    seed: u64,
    weighted: bool,
) -> Result<Vec<EndpointEstimate>> {
    check_reps(n_reps)?;
    let runs = run_replicas(initial, spec, t_end, n_reps, seed)?;
    targets
        .iter()
        .map(|t| endpoint_from_runs(&runs, t, weighted))
        .collect()
}

fn endpoint_from_runs(
    runs: &[TrajectoryResult],
    target: &ParticleConfig,
    weighted: bool,
) -> Result<EndpointEstimate> {
    let mut samples = Vec::with_capacity(runs.len());
    let mut exploded = 0;
    let mut hits = 0;
    for r in runs {
        if r.exploded {
            exploded += 1;
            continue;
        }
        if r.config.same_state(target) {
            hits += 1;
            samples.push(if weighted {
                r.config.fk_integral.exp()
            } else {
                1.0
            });
        } else {
            samples.push(0.0);
        }
    }
    let n = samples.len();
    let e = finish(samples, exploded)?;
    Ok(EndpointEstimate {
        probability: e.mean,
        stderr: e.stderr,
        hits,
        samples: n,
        exploded,
        zero_hit_bound: (hits == 0).then(|| 3.0 / n as f64),
    })
}
