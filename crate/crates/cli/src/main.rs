use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use parkingchain::contract::{
    check_feasibility, solve, sr_expected_utility, ContractError, ContractProblem, Scheme,
};
use parkingchain::harness::{run_scenario, validate_config, ExperimentConfig, HarnessError, Scenario};

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Runs parked-vehicle edge-computing experiments and writes CSV tables.
///
/// Scenarios: arrival-histogram, reputation-decay, detection-rate, collusion,
/// contract-feasibility, utility-vs-hour, utility-vs-type. `solve` solves a
/// single contract problem file; `validate` prints the normalized config.
#[derive(Parser, Debug)]
#[command(name = "parkedchain", version)]
struct Cli {
    /// Scenario name, `solve` or `validate`.
    target: String,
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Parking trace CSV (`arrival_hour,duration_hours`).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Contract problem file for `solve`.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Scheme for `solve` (LC, LIA, LA, SA, linear, oracle); all compared schemes when omitted.
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Infeasible(String),
    Other(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Read { .. } | HarnessError::UnknownScenario(_) => {
                Failure::Config(e.to_string())
            }
            HarnessError::Solver(_) => Failure::Infeasible(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<ContractError> for Failure {
    fn from(e: ContractError) -> Self {
        match e {
            ContractError::Parse(_)
            | ContractError::Io(_)
            | ContractError::InvalidParams(_)
            | ContractError::InvalidProblem(_)
            | ContractError::TooManyTypes { .. } => Failure::Config(e.to_string()),
            _ => Failure::Infeasible(e.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => validate_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trace) = &cli.trace {
        cfg.population.trace = Some(trace.clone());
    }
    cfg.check()?;
    Ok(cfg)
}

fn parse_scheme(tag: &str) -> Result<Scheme, Failure> {
    Scheme::COMPARED
        .into_iter()
        .chain([Scheme::GridOracle])
        .find(|s| s.tag().eq_ignore_ascii_case(tag))
        .ok_or_else(|| Failure::Config(format!("unknown scheme `{tag}`")))
}

fn run_solve(cli: &Cli) -> Result<(), Failure> {
    let path = cli.problem.as_ref().ok_or_else(|| Failure::Config("`solve` needs --problem <path>".into()))?;
    let problem = ContractProblem::load(path)?;
    let schemes = match &cli.scheme {
        Some(tag) => vec![parse_scheme(tag)?],
        None => Scheme::COMPARED.to_vec(),
    };
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::Other(e.to_string()))?;
    println!("scheme,sr_utility,pv_utility,ic_ir_feasible,menu");
    for scheme in schemes {
        let menu = solve(&problem, scheme)?;
        let feasible = check_feasibility(&menu, &problem, 1e-6).is_feasible();
        let file = cli.out.join(format!("menu_{}.csv", scheme.tag()));
        let writer = std::fs::File::create(&file).map_err(|e| Failure::Other(e.to_string()))?;
        menu.write_csv(&problem, writer).map_err(|e| Failure::Other(e.to_string()))?;
        println!(
            "{},{},{},{},{}",
            scheme.tag(),
            sr_expected_utility(&menu, &problem),
            menu.expected_pv_utility(&problem),
            feasible,
            file.display()
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match cli.target.as_str() {
        "solve" => run_solve(cli),
        "validate" => {
            print!("{}", load_config(cli)?.to_toml_string());
            Ok(())
        }
        name => {
            let scenario: Scenario = name.parse()?;
            let cfg = load_config(cli)?;
            let table = run_scenario(scenario, &cfg)?;
            let path = table.write_to_dir(&cli.out)?;
            eprintln!("wrote {} ({} rows)", path.display(), table.rows.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            if cli.target.parse::<Scenario>().is_err() && !matches!(cli.target.as_str(), "solve" | "validate") {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                eprintln!("expected one of: {}, solve, validate", names.join(", "));
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
