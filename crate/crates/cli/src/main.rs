use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualab_cli::{
    resolve_scenario, resolve_suite, CliError, FlagOverrides, Format, RunConfig, SetOverride,
    EXIT_FAIL, EXIT_NUMERICAL, EXIT_PASS,
};
use dualab_core::analytic::{cable_pairing_terms, write_pairing_terms};
use dualab_core::harness::{
    method_matrix, run_invariants, run_scenario, ComparisonReport, Method, Scenario, ScenarioName,
};

#[derive(Parser)]
#[command(
    name = "dualab",
    version,
    about = "Particle / Hilbert-space duality laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method of a scenario and compare them.
    Run(RunArgs),
    /// Exact truncated-Fock values for a scenario, with leakage.
    Oracle(ScenarioArgs),
    /// Invariant suite: conservation, semigroup, match kernel, adjointness, rates.
    Check(CheckArgs),
    /// Scenario names, descriptions and methods.
    ListScenarios,
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name (`S1` or `S1_jump_diffusion`); overrides the file.
    #[arg(long)]
    scenario: Option<ScenarioName>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Parameter override `key.path=value`, repeatable; applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<SetOverride>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only invariants whose name contains this text.
    #[arg(long)]
    filter: Option<String>,
    /// Override of the `[check]` table, `key.path=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<SetOverride>,
    #[arg(long)]
    threads: Option<usize>,
}

const DEFAULT_SEED: u64 = 0;
const DEFAULT_OUT: &str = "dualab-out";

fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    path.map(RunConfig::load)
        .transpose()
        .map(Option::unwrap_or_default)
}

fn set_threads(flag: Option<usize>, cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(n) = flag.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads {n}: {e}")))?;
    }
    Ok(())
}

fn prepare(args: &ScenarioArgs) -> Result<(RunConfig, Scenario, u64), CliError> {
    let cfg = load(args.config.as_deref())?;
    set_threads(args.threads, &cfg)?;
    let flags = FlagOverrides {
        scenario: args.scenario,
        reps: args.reps,
        sets: args.sets.clone(),
    };
    let scenario = resolve_scenario(&cfg, &flags)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    Ok((cfg, scenario, seed))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_outputs(
    report: &ComparisonReport,
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let stem = report.scenario.name.as_str();
    let mut written = Vec::new();
    if format.json() {
        let p = dir.join(format!("{stem}.json"));
        report.write_json(create(&p)?)?;
        written.push(p);
    }
    if format.csv() {
        let p = dir.join(format!("{stem}.csv"));
        report.write_csv(create(&p)?)?;
        written.push(p);
        let s = &report.scenario;
        if s.name == ScenarioName::S2Cable
            && report.scenario.methods().contains(&Method::PairingSum)
        {
            let lat = s.lattice()?;
            let z = s.z.as_ref().expect("validated").build(&lat)?;
            let r = s.noise.as_ref().expect("validated").build(&lat)?;
            if let Ok(terms) = cable_pairing_terms(&lat, &s.positions, &z, &r, s.t) {
                let p = dir.join(format!("{stem}_pairing_terms.csv"));
                write_pairing_terms(&terms, create(&p)?)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

fn cmd_run(args: RunArgs) -> Result<u8, CliError> {
    let (cfg, scenario, seed) = prepare(&args.common)?;
    let report = run_scenario(&scenario, seed)?;
    print!("{}", report.summary());
    let dir = args
        .out
        .or(cfg.output.dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let format = args.format.or(cfg.output.format).unwrap_or_default();
    for p in write_outputs(&report, &dir, format)? {
        println!("wrote {}", p.display());
    }
    Ok(if report.pass {
        EXIT_PASS
    } else if report.has_numerical_failure() {
        EXIT_NUMERICAL
    } else {
        EXIT_FAIL
    })
}

fn cmd_oracle(args: ScenarioArgs) -> Result<u8, CliError> {
    let (_, mut scenario, seed) = prepare(&args)?;
    let exact = [
        Method::Oracle,
        Method::OracleSigned,
        Method::OracleDensities,
    ];
    scenario.methods = Some(
        method_matrix(scenario.name)
            .into_iter()
            .filter(|m| exact.contains(m))
            .collect(),
    );
    let report = run_scenario(&scenario, seed)?;
    for f in &report.failures {
        eprintln!("{} [{}]: {}", f.method, f.kind, f.message);
    }
    if let Some(f) = report.failures.first() {
        return Ok(if f.kind == "numerical" {
            EXIT_NUMERICAL
        } else {
            dualab_cli::EXIT_USAGE
        });
    }
    for e in &report.estimates {
        let dim = e
            .diagnostics
            .get("basis_dim")
            .map(|d| format!("  dim {d}"))
            .unwrap_or_default();
        println!(
            "{}  value {:.15e}  leakage {:.3e}{dim}",
            e.label,
            e.value,
            e.leakage.unwrap_or(0.0)
        );
    }
    Ok(EXIT_PASS)
}

fn cmd_check(args: CheckArgs) -> Result<u8, CliError> {
    let cfg = load(args.config.as_deref())?;
    set_threads(args.threads, &cfg)?;
    let suite = resolve_suite(&cfg, &args.sets)?;
    let checks = run_invariants(&suite, args.filter.as_deref())?;
    if checks.is_empty() {
        return Err(CliError::Usage(format!(
            "no invariant matches filter '{}'",
            args.filter.unwrap_or_default()
        )));
    }
    for c in &checks {
        println!(
            "{} {}: {:.3e} (threshold {:.1e})",
            if c.pass { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} invariants FAILED", checks.len());
        return Ok(EXIT_FAIL);
    }
    println!("all {} invariants pass", checks.len());
    Ok(EXIT_PASS)
}

fn cmd_list() -> u8 {
    for n in ScenarioName::ALL {
        let methods: Vec<&str> = method_matrix(n).iter().map(|m| m.as_str()).collect();
        println!(
            "{:<24} {}\n{:<24} methods: {}",
            n.as_str(),
            n.description(),
            "",
            methods.join(", ")
        );
    }
    EXIT_PASS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Check(a) => cmd_check(a),
        Command::ListScenarios => Ok(cmd_list()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
