use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualab_cli::{resolve_scenario, FlagOverrides, RunConfig, SetOverride};
use dualab_core::harness::{ComparisonReport, ScenarioName};

fn dualab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn read_report(path: &Path) -> ComparisonReport {
    serde_json::from_reader(std::fs::File::open(path).unwrap()).unwrap()
}

fn sets(items: &[&str]) -> Vec<SetOverride> {
    items.iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn run_s1_is_deterministic_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = dualab(&[
            "run",
            "--scenario",
            "S1",
            "--seed",
            "7",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    }
    let ra = read_report(&a.join("S1_jump_diffusion.json"));
    let rb = read_report(&b.join("S1_jump_diffusion.json"));
    assert!(ra.pass);
    assert_eq!(ra.seed, 7);
    assert_eq!(ra.without_timings(), rb.without_timings());
    let csv = std::fs::read_to_string(a.join("S1_jump_diffusion.csv")).unwrap();
    assert!(csv.starts_with("method,value,stderr,leakage,blowup_fraction,runtime_s\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn run_s4_with_lattice_override_reports_ratio_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = dualab(&[
        "run",
        "--scenario",
        "S4",
        "--set",
        "lattice.L=3",
        "--reps",
        "20000",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let r = read_report(&dir.path().join("S4_bbd_sba.json"));
    let c = r
        .checks
        .iter()
        .find(|c| c.name == "ratio identity residual")
        .unwrap();
    assert!(c.pass && c.value < 1e-8);
    assert_eq!(r.scenario.reps, 20000);
    assert!(!dir.path().join("S4_bbd_sba.csv").exists());
}

#[test]
fn s2_csv_output_includes_pairing_terms() {
    let dir = tempfile::tempdir().unwrap();
    let o = dualab(&[
        "run",
        "--scenario",
        "S2",
        "--set",
        r#"methods=["oracle","pairing_sum","bbgky"]"#,
        "--format",
        "csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let terms = std::fs::read_to_string(dir.path().join("S2_cable_pairing_terms.csv")).unwrap();
    assert!(terms.starts_with("pairing,arc_factors,single_factors,product"));
    assert_eq!(terms.lines().count(), 3);
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let o = dualab(&["run", "--scenario", "S9"]);
    assert_eq!(code(&o), 2);
    for n in ScenarioName::ALL {
        assert!(stderr(&o).contains(n.as_str()), "{}", stderr(&o));
    }
}

#[test]
fn validation_errors_name_the_field() {
    let o = dualab(&["run", "--scenario", "S1", "--set", "lattice.sites=4"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sites"), "{}", stderr(&o));
    let o = dualab(&["run", "--scenario", "S1", "--set", "positions=[0, 12]"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("positions"), "{}", stderr(&o));
}

#[test]
fn config_parse_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "scenario = \"S1\"\n[params]\nt = = 3\n").unwrap();
    let o = dualab(&["run", "--config", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn comparison_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = dualab(&[
        "run",
        "--scenario",
        "S1",
        "--reps",
        "200",
        "--set",
        "tolerance.sigmas=0",
        "--set",
        "tolerance.abs_tol=0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn numerical_failure_exits_three() {
    let o = dualab(&[
        "run",
        "--scenario",
        "S1",
        "--set",
        r#"z={kind="constant",value=1e200}"#,
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical"));
}

fn oracle_value(out: &str) -> f64 {
    let line = out.lines().next().unwrap();
    line.split_whitespace()
        .skip_while(|w| *w != "value")
        .nth(1)
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn oracle_at_time_zero_is_the_product() {
    let o = dualab(&["oracle", "--scenario", "S1", "--set", "t=0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (z2, z5) = (
        1.0 + 0.5 * (std::f64::consts::PI / 2.0).cos(),
        1.0 + 0.5 * (5.0 * std::f64::consts::PI / 4.0).cos(),
    );
    assert!(
        (oracle_value(&stdout(&o)) - z2 * z5).abs() < 1e-14,
        "{}",
        stdout(&o)
    );
    assert!(stdout(&o).contains("leakage") && stdout(&o).contains("dim"));
}

#[test]
fn oracle_order_one_cable_is_decayed_diffusion() {
    let o = dualab(&["oracle", "--scenario", "S2", "--set", "positions=[3]"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = dualab_core::harness::Scenario::default_for(ScenarioName::S2Cable);
    let lat = s.lattice().unwrap();
    let z = s.z.unwrap().build(&lat).unwrap();
    let want = dualab_core::analytic::propagator_kj(&lat, 3, &z, s.t).unwrap();
    assert!((oracle_value(&stdout(&o)) - want).abs() < 1e-8);
}

#[test]
fn oracle_rejects_inadequate_caps() {
    let o = dualab(&[
        "oracle",
        "--scenario",
        "S2",
        "--set",
        "caps.n_max=1",
        "--set",
        "caps.N_max=1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cap"), "{}", stderr(&o));
}

#[test]
fn check_suite_passes_and_filters() {
    let o = dualab(&["check"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    for cat in [
        "conservation/",
        "semigroup/",
        "match/",
        "adjointness/",
        "rates/",
    ] {
        assert!(stdout(&o).contains(cat));
    }
    let o = dualab(&["check", "--filter", "conservation"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("ok") || l.starts_with("FAIL"))
        .collect();
    assert!(!lines.is_empty() && lines.iter().all(|l| l.contains("conservation/")));
}

#[test]
fn check_fails_loudly_on_corrupted_symmetry() {
    let fixture =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corrupted_symmetry.toml");
    let o = dualab(&[
        "check",
        "--config",
        fixture.to_str().unwrap(),
        "--filter",
        "conservation",
    ]);
    assert_eq!(code(&o), 1);
    assert!(
        stdout(&o).contains("FAIL conservation/deterministic jump-diffusion mass"),
        "{}",
        stdout(&o)
    );
    assert!(stderr(&o).contains("FAILED"));
}

#[test]
fn list_scenarios_prints_all() {
    let o = dualab(&["list-scenarios"]);
    assert_eq!(code(&o), 0);
    for n in ScenarioName::ALL {
        assert!(stdout(&o).contains(n.as_str()));
    }
}

#[test]
fn example_configs_round_trip() {
    let files = [
        "s1_jump_diffusion",
        "s2_cable",
        "s3_fermionic_decay",
        "s4_bbd_sba",
        "s5_diffusion_diffusion",
        "check",
    ];
    for f in files {
        let cfg = RunConfig::load(&repo(&format!("configs/{f}.toml"))).unwrap();
        let again: RunConfig = cfg.to_toml().parse().unwrap();
        assert_eq!(cfg, again, "{f}");
        if cfg.scenario.is_some() {
            let flags = FlagOverrides::default();
            let s = resolve_scenario(&cfg, &flags).unwrap();
            assert_eq!(s, resolve_scenario(&again, &flags).unwrap());
            assert_eq!(
                s,
                dualab_core::harness::Scenario::default_for(s.name),
                "{f} documents the defaults"
            );
        }
    }
}

#[test]
fn flags_take_precedence_over_file_values() {
    let cfg: RunConfig = r#"
        scenario = "S2"
        seed = 5
        [params]
        t = 0.3
        reps = 50
        [params.z]
        kind = "constant"
        value = 0.7
    "#
    .parse()
    .unwrap();
    let file_only = resolve_scenario(&cfg, &FlagOverrides::default()).unwrap();
    assert_eq!((file_only.t, file_only.reps), (0.3, 50));
    assert_eq!(file_only.dt, 1e-3);

    let flags = FlagOverrides {
        scenario: None,
        reps: Some(70),
        sets: sets(&["t=0.2", "reps=60", "z.value=0.9", "lattice.length=2.0"]),
    };
    let s = resolve_scenario(&cfg, &flags).unwrap();
    assert_eq!((s.t, s.reps, s.lattice.length), (0.2, 70, 2.0));
    assert_eq!(
        s.z,
        Some(dualab_core::harness::FieldGen::Constant { value: 0.9 })
    );

    let s = resolve_scenario(
        &cfg,
        &FlagOverrides {
            scenario: Some(ScenarioName::S1JumpDiffusion),
            ..flags
        },
    )
    .unwrap();
    assert_eq!(s.name, ScenarioName::S1JumpDiffusion);

    // seed: flag over file over default
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, "scenario = \"S1\"\nseed = 5\n[params]\nreps = 20\nmethods = [\"oracle\", \"particle_mc\"]\n").unwrap();
    for (extra, want) in [(vec![], 5u64), (vec!["--seed", "9"], 9)] {
        let out = dir.path().join(format!("o{want}"));
        let mut args = vec![
            "run",
            "--config",
            p.to_str().unwrap(),
            "--format",
            "json",
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend(extra);
        let o = dualab(&args);
        assert!(code(&o) <= 1, "{}", stderr(&o));
        assert_eq!(read_report(&out.join("S1_jump_diffusion.json")).seed, want);
    }
}

#[test]
fn generator_tables_replace_rather_than_merge() {
    let cfg: RunConfig = "scenario = \"S1\"\n[params.jump]\nkind = \"constant\"\nvalue = 0.2\n"
        .parse()
        .unwrap();
    let s = resolve_scenario(&cfg, &FlagOverrides::default()).unwrap();
    assert_eq!(
        s.jump,
        Some(dualab_core::harness::KernelGen::Constant { value: 0.2 })
    );
}
