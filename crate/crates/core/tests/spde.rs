use dualab_core::analytic::{cable_mean, cable_pairing_sum, jump_diffusion_solution};
use dualab_core::domain::{build_q_kernel, Field, Kernel2, Lattice, SpectralNoise};
use dualab_core::spde::*;
use dualab_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn field(lat: &Lattice, lo: f64, hi: f64, r: &mut ChaCha8Rng) -> Field {
    Field((0..lat.sites()).map(|_| r.random_range(lo..hi)).collect())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn lat8() -> Lattice {
    Lattice::new(8, 0.125).unwrap()
}

#[test]
fn no_drift_no_noise_is_identity() {
    let lat = lat8();
    let spec = SpdeSpec::new(lat, 0.0, 0.0, Drift::None, NoiseSpec::None, 0.01).unwrap();
    let z = field(&lat, -1.0, 1.0, &mut rng(1));
    let x = integrate(&z, &spec, 0.5, &mut rng(2)).unwrap();
    assert_eq!(x, z);
    assert_eq!(em_step(&z, &spec, &mut rng(3)).unwrap(), z);
}

#[test]
fn explicit_cable_step_is_definition() {
    let lat = lat8();
    let spec = SpdeSpec::cable(lat, Drift::None, NoiseSpec::None, 0.005).unwrap();
    let z = field(&lat, -1.0, 1.0, &mut rng(4));
    let x = em_step(&z, &spec, &mut rng(5)).unwrap();
    let lap = lat.laplacian(&z).unwrap();
    for i in 0..8 {
        let want = z[i] + 0.005 * (lap[i] - z[i]);
        assert!((x[i] - want).abs() < 1e-14);
    }
}

#[test]
fn zero_horizon_returns_initial_field() {
    let lat = lat8();
    let noise = NoiseSpec::AdditiveQ {
        noise: SpectralNoise::single_constant_mode(&lat, 0.5).unwrap(),
    };
    let spec = SpdeSpec::cable(lat, Drift::None, noise, 0.001).unwrap();
    let z = field(&lat, -1.0, 1.0, &mut rng(6));
    assert_eq!(integrate(&z, &spec, 0.0, &mut rng(7)).unwrap(), z);
    let y = field(&lat, -0.5, 0.5, &mut rng(8));
    let e = ensemble_exp_moment(&z, &spec, &y, 0.0, 10, 9).unwrap();
    assert_eq!(e.mean, lat.inner_product(&z, &y).unwrap().exp());
    assert_eq!(e.stderr, 0.0);
    let zero = Field::zeros(&lat);
    let e = ensemble_exp_moment(&z, &spec, &zero, 0.1, 10, 9).unwrap();
    assert_eq!((e.mean, e.stderr), (1.0, 0.0));
}

#[test]
fn rejects_uneven_horizon_and_unstable_explicit_step() {
    let lat = lat8();
    let spec = SpdeSpec::cable(lat, Drift::None, NoiseSpec::None, 0.003).unwrap();
    let z = Field::constant(&lat, 1.0);
    assert!(matches!(
        integrate(&z, &spec, 0.01, &mut rng(1)),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        SpdeSpec::cable(lat, Drift::None, NoiseSpec::None, 0.01),
        Err(Error::Validation(_))
    ));
    let imex = SpdeSpec::cable(lat, Drift::None, NoiseSpec::None, 0.001)
        .unwrap()
        .with_scheme(Scheme::ImexEm)
        .unwrap()
        .with_dt(0.05)
        .unwrap();
    assert!(integrate(&z, &imex, 0.5, &mut rng(1)).is_ok());
}

#[test]
fn deterministic_jump_diffusion_converges_first_order() {
    let lat = lat8();
    let mut r = rng(10);
    let rho: Vec<f64> = (0..8).map(|_| r.random_range(0.0..2.0)).collect();
    let kernel = Kernel2::homogeneous(&rho).unwrap();
    let z = field(&lat, 0.0, 1.0, &mut r);
    let t = 0.5;
    let exact = jump_diffusion_solution(&lat, &z, 0.5, &kernel, t).unwrap();
    let err = |dt: f64| {
        let spec = SpdeSpec::new(
            lat,
            0.5,
            0.0,
            Drift::JumpRedistribution {
                kernel: kernel.clone(),
            },
            NoiseSpec::None,
            dt,
        )
        .unwrap();
        max_diff(&integrate(&z, &spec, t, &mut rng(0)).unwrap(), &exact)
    };
    let (e1, e2) = (err(2e-3), err(1e-3));
    assert!(e1 < 1e-2 && e2 < e1);
    let ratio = e1 / e2;
    assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn riccati_decay_matches_closed_form() {
    let lat = lat8();
    let (g, c, t) = (0.8, 1.5, 1.0);
    let spec = SpdeSpec::new(
        lat,
        1.0,
        0.0,
        Drift::QuadraticDecay {
            gamma: Field::constant(&lat, g),
        },
        NoiseSpec::None,
        1e-3,
    )
    .unwrap();
    let x = integrate(&Field::constant(&lat, c), &spec, t, &mut rng(0)).unwrap();
    let want = c / (1.0 + g * c * t);
    for v in x.iter() {
        assert!((v - want).abs() < 2e-3, "{v} vs {want}");
    }
}

#[test]
fn noise_off_matches_fourth_order_integration() {
    let lat = lat8();
    let mut r = rng(11);
    let k = Kernel2::from_fn(8, false, |i, j| ((i * 3 + j) % 5) as f64 * 0.2).unwrap();
    let drifts = vec![
        Drift::None,
        Drift::JumpRedistribution { kernel: k.clone() },
        Drift::QuadraticDecay {
            gamma: field(&lat, 0.0, 1.0, &mut r),
        },
        Drift::QuadraticGrowth {
            rate: field(&lat, 0.0, 1.0, &mut r),
        },
        Drift::NonlocalQuadratic { kernel: k },
    ];
    let z = field(&lat, 0.0, 0.5, &mut r);
    for drift in drifts {
        let dt = 1e-3;
        let spec = SpdeSpec::new(lat, 1.0, 0.5, drift.clone(), NoiseSpec::None, dt).unwrap();
        let em = integrate(&z, &spec, 0.3, &mut rng(0)).unwrap();
        let rk = rk4_integrate(&z, &spec, 0.3, 1e-4).unwrap();
        assert!(max_diff(&em, &rk) < 10.0 * dt, "{drift:?}");
    }
}

#[test]
fn quadratic_growth_blows_up() {
    let lat = lat8();
    let spec = SpdeSpec::new(
        lat,
        0.0,
        0.0,
        Drift::QuadraticGrowth {
            rate: Field::constant(&lat, 1.0),
        },
        NoiseSpec::None,
        1e-2,
    )
    .unwrap();
    let err = integrate(&Field::constant(&lat, 5.0), &spec, 1.0, &mut rng(0)).unwrap_err();
    assert!(matches!(err, Error::Blowup { .. }));
}

#[test]
fn cable_mean_is_deterministic_solution() {
    let lat = lat8();
    let noise = SpectralNoise::single_constant_mode(&lat, 1.0).unwrap();
    let spec = SpdeSpec::cable(lat, Drift::None, NoiseSpec::AdditiveQ { noise }, 1e-3).unwrap();
    let z = field(&lat, 0.0, 1.0, &mut rng(12));
    let t = 0.2;
    let exact = cable_mean(&lat, &z, t).unwrap();
    for p in [0, 5] {
        let e = ensemble_product_moment(&z, &spec, &[p], t, 10_000, 77).unwrap();
        assert!(
            (e.mean - exact[p]).abs() < 3.0 * e.stderr + 1e-3,
            "{} vs {} ({})",
            e.mean,
            exact[p],
            e.stderr
        );
    }
    let quiet = spec.clone().with_noise(NoiseSpec::None).unwrap();
    let det = ensemble_product_moment(&z, &quiet, &[2, 3], t, 10, 1).unwrap();
    assert_eq!(det.stderr, 0.0);
    let path = integrate(&z, &quiet, t, &mut rng(0)).unwrap();
    assert_eq!(det.mean, path[2] * path[3]);
    let empty = ensemble_product_moment(&z, &spec, &[], t, 10, 1).unwrap();
    assert_eq!((empty.mean, empty.stderr), (1.0, 0.0));
}

#[test]
fn cable_second_moment_matches_pairing_sum() {
    let lat = lat8();
    let modes = vec![
        Field::constant(&lat, 1.0 / lat.length().sqrt()),
        Field::cosine(&lat, 0.0, (2.0 / lat.length()).sqrt(), 1),
    ];
    let noise = SpectralNoise::trace_class(&lat, vec![1.0, 0.6], modes).unwrap();
    let r = build_q_kernel(&noise).unwrap();
    let spec = SpdeSpec::cable(lat, Drift::None, NoiseSpec::AdditiveQ { noise }, 1e-3).unwrap();
    let z = field(&lat, 0.2, 1.0, &mut rng(13));
    let t = 0.3;
    let want = cable_pairing_sum(&lat, &[1, 4], &z, &r, t).unwrap();
    let e = ensemble_product_moment(&z, &spec, &[1, 4], t, 10_000, 78).unwrap();
    assert!(
        (e.mean - want).abs() < 3.0 * e.stderr + 2e-3,
        "{} vs {want} ({})",
        e.mean,
        e.stderr
    );
}

#[test]
fn ensembles_are_seed_deterministic() {
    let lat = lat8();
    let spec = SpdeSpec::cable(
        lat,
        Drift::None,
        NoiseSpec::GeometricCylindrical {
            omega: Field::constant(&lat, 0.5),
        },
        1e-3,
    )
    .unwrap();
    let z = Field::constant(&lat, 1.0);
    let a = ensemble_product_moment(&z, &spec, &[0, 3], 0.05, 64, 5).unwrap();
    let b = ensemble_product_moment(&z, &spec, &[0, 3], 0.05, 64, 5).unwrap();
    let c = ensemble_product_moment(&z, &spec, &[0, 3], 0.05, 64, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mean, c.mean);
}

#[test]
fn halving_shift_is_small_for_smooth_problems() {
    let lat = lat8();
    let noise = SpectralNoise::single_constant_mode(&lat, 0.5).unwrap();
    let spec = SpdeSpec::cable(lat, Drift::None, NoiseSpec::AdditiveQ { noise }, 2e-3).unwrap();
    let z = field(&lat, 0.0, 1.0, &mut rng(14));
    let h = ensemble_halving(&z, &spec, 0.2, 500, 3, |x| x[2]).unwrap();
    assert!(h.shift.mean.abs() < 1e-3 && h.shift.stderr < 1e-3);
    let exact = cable_mean(&lat, &z, 0.2).unwrap()[2];
    assert!((h.extrapolated() - exact).abs() < 3.0 * h.fine.stderr + 1e-4);
}

#[test]
fn match_kernel_constant_mode_formula() {
    let lat = lat8();
    let mut r = rng(15);
    let lambda0 = 0.7;
    let noise = SpectralNoise::single_constant_mode(&lat, lambda0).unwrap();
    let u = field(&lat, 0.0, 2.0, &mut r);
    let op = NoiseOperatorSpec::new(noise, vec![u.clone()]).unwrap();
    let k = build_match_kernel(&op).unwrap();
    for p in 0..8 {
        for q in 0..8 {
            for s in 0..8 {
                let want = 0.5 * lambda0 * u[s] / lat.length();
                assert!((k.get(p, q, s) - want).abs() < 1e-14);
            }
        }
    }
    let silent = NoiseOperatorSpec::new(
        SpectralNoise::single_constant_mode(&lat, 0.0).unwrap(),
        vec![u],
    )
    .unwrap();
    assert!(build_match_kernel(&silent)
        .unwrap()
        .values()
        .iter()
        .all(|v| *v == 0.0));
    let mut bad = field(&lat, 0.0, 1.0, &mut r);
    bad[3] = -0.1;
    let op = NoiseOperatorSpec::new(
        SpectralNoise::single_constant_mode(&lat, 1.0).unwrap(),
        vec![bad],
    )
    .unwrap();
    assert!(matches!(
        build_match_kernel(&op),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn match_condition_holds_on_random_fields() {
    let lat = lat8();
    let mut r = rng(16);
    let modes = vec![
        Field::constant(&lat, 1.0 / lat.length().sqrt()),
        Field::cosine(&lat, 0.0, (2.0 / lat.length()).sqrt(), 2),
    ];
    let noise = SpectralNoise::trace_class(&lat, vec![0.9, 0.4], modes).unwrap();
    let weights = vec![field(&lat, 0.0, 1.0, &mut r), field(&lat, 0.0, 1.0, &mut r)];
    let op = NoiseOperatorSpec::new(noise.clone(), weights).unwrap();
    let k = build_match_kernel(&op).unwrap();
    for _ in 0..100 {
        let x = field(&lat, 0.0, 3.0, &mut r);
        let contracted = k.contract(&lat, &x).unwrap();
        let images: Vec<Vec<f64>> = (0..2)
            .map(|m| op.mode_image(&lat, &x, m).unwrap())
            .collect();
        for p in 0..8 {
            for q in 0..8 {
                let rhs: f64 = 0.5
                    * (0..2)
                        .map(|m| noise.eigenvalues()[m] * images[m][p] * images[m][q])
                        .sum::<f64>();
                assert!((contracted.get(p, q) - rhs).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn imex_cable_never_grows(seed in 0u64..10_000, dt in 1e-4f64..10.0) {
        let lat = Lattice::new(16, 1.0 / 16.0).unwrap();
        let spec = SpdeSpec::cable(lat, Drift::None, NoiseSpec::None, 1e-3)
            .unwrap()
            .with_scheme(Scheme::ImexEm)
            .unwrap()
            .with_dt(dt)
            .unwrap();
        let stepper = Stepper::new(&spec).unwrap();
        let mut x = field(&lat, -5.0, 5.0, &mut rng(seed)).into_inner();
        let mut norm = x.iter().map(|v| v * v).sum::<f64>();
        for k in 0..5 {
            stepper.step_with(&mut x, dt, None, k).unwrap();
            let next = x.iter().map(|v| v * v).sum::<f64>();
            prop_assert!(next <= norm * (1.0 + 1e-12));
            norm = next;
        }
    }
}
