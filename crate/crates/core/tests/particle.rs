use dualab_core::analytic::propagator_kj;
use dualab_core::domain::{Field, Kernel2, Kernel3, Lattice};
use dualab_core::fock::{FockBasis, FockOracle};
use dualab_core::model::ModelSpec;
use dualab_core::particle::*;
use dualab_core::rng::replica_rng;
use dualab_core::Error;

fn within(est: f64, se: f64, want: f64, slack: f64) -> bool {
    (est - want).abs() <= 3.0 * se + slack
}

#[test]
fn single_death_follows_exponential_law() {
    let lat = Lattice::new(3, 1.0 / 3.0).unwrap();
    let mu = 1.3;
    let spec = ModelSpec::bbd(lat, Field::constant(&lat, mu), Kernel2::zeros(3)).unwrap();
    let init = ParticleConfig::from_positions(3, &[1]).unwrap();
    for t in [0.2, 0.7, 1.5] {
        let e = endpoint_density_estimate(&init, &spec, &init, t, 10_000, 1, false).unwrap();
        let want = (-mu * t).exp();
        assert!(
            within(e.probability, e.stderr, want, 0.0),
            "t={t}: {} vs {want}",
            e.probability
        );
    }
}

#[test]
fn two_site_hop_chain() {
    let lat = Lattice::new(2, 0.5).unwrap();
    let d = 0.2;
    let spec = ModelSpec::jump_diffusion(lat, d, Kernel2::zeros(2)).unwrap();
    let init = ParticleConfig::from_positions(2, &[0]).unwrap();
    let other = ParticleConfig::from_positions(2, &[1]).unwrap();
    let t = 0.3;
    let a = 2.0 * d / (0.5 * 0.5);
    let stay = 0.5 * (1.0 + (-2.0 * a * t).exp());
    let h = endpoint_histogram(&init, &spec, &[init.clone(), other], t, 10_000, 2, false).unwrap();
    assert!(within(h[0].probability, h[0].stderr, stay, 0.0));
    assert!(within(h[1].probability, h[1].stderr, 1.0 - stay, 0.0));
    let at_zero = endpoint_density_estimate(&init, &spec, &init, 0.0, 10, 3, false).unwrap();
    assert_eq!(at_zero.probability, 1.0);
}

#[test]
fn conservative_model_gives_unit_estimate() {
    let lat = Lattice::new(4, 0.25).unwrap();
    let spec = ModelSpec::jump_diffusion(
        lat,
        0.5,
        Kernel2::homogeneous(&[0.0, 1.0, 0.5, 1.0]).unwrap(),
    )
    .unwrap();
    let init = ParticleConfig::from_positions(4, &[0, 2, 2]).unwrap();
    let e = feynman_kac_estimate(&init, &spec, &Field::constant(&lat, 1.0), 0.8, 100, 4).unwrap();
    assert_eq!((e.mean, e.stderr), (1.0, 0.0));
}

#[test]
fn cable_single_particle_is_decayed_diffusion() {
    let lat = Lattice::new(6, 0.25).unwrap();
    let spec = ModelSpec::cable_dual(lat, Kernel2::zeros(6)).unwrap();
    let z = Field((0..6).map(|i| 1.0 + (i as f64).sin()).collect());
    let t = 0.4;
    let init = ParticleConfig::from_positions(6, &[2]).unwrap();
    let e = feynman_kac_estimate(&init, &spec, &z, t, 10_000, 5).unwrap();
    let want = propagator_kj(&lat, 2, &z, t).unwrap();
    assert!(within(e.mean, e.stderr, want, 0.0), "{} vs {want}", e.mean);
}

#[test]
fn estimates_agree_with_oracle() {
    let lat = Lattice::new(3, 1.0 / 3.0).unwrap();
    let r = Kernel2::from_fn(3, true, |i, j| 0.3 + 0.2 * ((i + j) % 2) as f64).unwrap();
    let mu = Field(vec![0.5, 0.8, 0.3]);
    let z = Field(vec![0.6, 0.9, 0.4]);
    let r3 = Kernel3::from_fn(3, |_, _, k| 0.2 + 0.1 * k as f64).unwrap();
    let cases: Vec<(ModelSpec, Vec<usize>, FockBasis)> = vec![
        (
            ModelSpec::cable_dual(lat, r.clone()).unwrap(),
            vec![0, 2],
            FockBasis::new(lat, 2, 2, false).unwrap(),
        ),
        (
            ModelSpec::diffusion_annihilation(lat, 0.1, r.clone()).unwrap(),
            vec![0, 1, 1],
            FockBasis::new(lat, 3, 3, false).unwrap(),
        ),
        (
            ModelSpec::bbd(lat, mu, r).unwrap(),
            vec![1, 2],
            FockBasis::new(lat, 8, 10, false).unwrap(),
        ),
        (
            ModelSpec::fission_amalgamation(lat, Field(vec![0.3, 0.2, 0.4]), r3).unwrap(),
            vec![0],
            FockBasis::new(lat, 7, 8, true).unwrap(),
        ),
    ];
    let t = 0.4;
    for (k, (spec, pos, basis)) in cases.into_iter().enumerate() {
        let oracle = FockOracle::new(&spec, basis).unwrap();
        let c = oracle.duality_c(&pos, &z, t).unwrap();
        assert!(!c.flagged, "{:?} leakage {}", spec.kind, c.leakage);
        let init = ParticleConfig::from_positions(3, &pos).unwrap();
        let e = feynman_kac_estimate(&init, &spec, &z, t, 10_000, 10 + k as u64).unwrap();
        assert!(
            within(e.mean, e.stderr, c.value, c.leakage),
            "{:?}: {} +- {} vs {}",
            spec.kind,
            e.mean,
            e.stderr,
            c.value
        );
    }
}

#[test]
fn endpoint_distribution_matches_oracle() {
    let lat = Lattice::new(3, 1.0 / 3.0).unwrap();
    let r = Kernel2::constant(3, 0.9);
    let spec = ModelSpec::diffusion_annihilation(lat, 0.05, r).unwrap();
    let basis = FockBasis::new(lat, 3, 3, false).unwrap();
    let oracle = FockOracle::new(&spec, basis.clone()).unwrap();
    let pos = [0, 0, 2];
    let t = 0.5;
    let probs = oracle.endpoint_distribution(&pos, t, false).unwrap();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let targets: Vec<ParticleConfig> = basis
        .occupations()
        .iter()
        .map(|o| ParticleConfig::from_occupations(o.clone()))
        .collect();
    let init = ParticleConfig::from_positions(3, &pos).unwrap();
    let est = endpoint_histogram(&init, &spec, &targets, t, 10_000, 20, false).unwrap();
    for (s, (e, p)) in est.iter().zip(&probs).enumerate() {
        let se = e.stderr.max((p * (1.0 - p) / e.samples as f64).sqrt());
        assert!(
            within(e.probability, se, *p, 1e-12),
            "state {s} {:?}: {} vs {p}",
            basis.occupation(s),
            e.probability
        );
    }
}

#[test]
fn sign_tracks_fission_parity() {
    let lat = Lattice::new(2, 0.5).unwrap();
    let spec = ModelSpec::fission_amalgamation(
        lat,
        Field(vec![1.0, 2.0]),
        Kernel3::from_fn(2, |_, _, _| 0.5).unwrap(),
    )
    .unwrap();
    let mut sim = Gillespie::new(&spec).unwrap();
    let init = ParticleConfig::from_positions(2, &[0]).unwrap();
    for rep in 0..200 {
        let mut rng = replica_rng(9, rep);
        let r = sim.simulate(&init, 1.0, &mut rng).unwrap();
        let want = if r.fission_count.is_multiple_of(2) {
            1
        } else {
            -1
        };
        assert_eq!(r.config.sign, want);
    }
}

#[test]
fn population_cap_marks_explosion() {
    let lat = Lattice::new(2, 0.5).unwrap();
    let spec =
        ModelSpec::bbd(lat, Field::constant(&lat, 0.01), Kernel2::constant(2, 40.0)).unwrap();
    let mut sim = Gillespie::new(&spec).unwrap().with_population_cap(10);
    let init = ParticleConfig::from_positions(2, &[0, 1]).unwrap();
    let r = sim.simulate(&init, 5.0, &mut replica_rng(1, 0)).unwrap();
    assert!(r.exploded);
    assert!(r.config.population() >= 10);
}

#[test]
fn negative_rates_are_rejected() {
    let lat = Lattice::new(2, 0.5).unwrap();
    let r = Kernel2::from_fn(2, true, |i, j| if i == j { 0.1 } else { -0.2 }).unwrap();
    let spec = ModelSpec::cable_dual(lat, r).unwrap();
    match Gillespie::new(&spec) {
        Err(Error::Validation(msg)) => assert!(msg.contains("R[0][1]"), "{msg}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}
