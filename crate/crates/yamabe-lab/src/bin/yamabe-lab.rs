use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use yamabe_lab::scenario::{
    emit_report, run_scenario, stage_elliptic, stage_simulate, stage_verify, stage_yamabe, validate_batch,
    verdict_table, Outcome, Scenario, ScenarioError, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_PASS,
};

#[derive(Parser)]
#[command(name = "yamabe-lab", version, about = "Yamabe flow experiments on radial asymptotically flat backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output root; artifacts go to <out>/<scenario name>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow(s) the scenario needs.
    Simulate(Common),
    /// Run the elliptic solves the scenario needs.
    Elliptic(Common),
    /// Classify the sign of the Yamabe invariant and print {sign, lower, upper}.
    Yamabe(Common),
    /// Evaluate the configured checks against existing artifacts.
    Verify(Common),
    /// Collect verdicts and key curves into report.json.
    Report(Common),
    /// Full pipeline for one or more scenarios.
    Run {
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Errors carry their exit status alongside the message.
struct Failure {
    code: i32,
    error: anyhow::Error,
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Self { code: e.exit_code(), error: e.into() }
    }
}

fn load(common: &Common) -> Result<(Scenario, PathBuf), Failure> {
    let sc = Scenario::from_file(&common.config)?;
    let dir = sc.artifact_dir(common.out.as_deref())?;
    Ok((sc, dir))
}

fn print_verdicts(outcome: &Outcome) {
    print!("{}", verdict_table(&outcome.verdicts));
    println!("artifacts: {}", outcome.dir.display());
}

fn run_batch(configs: &[PathBuf], out: Option<&Path>) -> Result<i32, Failure> {
    let scenarios = configs.iter().map(|p| Scenario::from_file(p)).collect::<Result<Vec<_>, _>>()?;
    validate_batch(&scenarios)?;
    let results: Vec<Result<Outcome, ScenarioError>> = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios.iter().map(|sc| s.spawn(move || run_scenario(sc, out))).collect();
        handles.into_iter().map(|h| h.join().expect("scenario worker panicked")).collect()
    });
    let mut code = EXIT_PASS;
    for (sc, result) in scenarios.iter().zip(results) {
        println!("== {}", sc.name);
        match result {
            Ok(outcome) => {
                print_verdicts(&outcome);
                code = code.max(outcome.exit_code());
            }
            Err(e) => {
                eprintln!("error: {}: {e}", sc.name);
                code = code.max(e.exit_code());
            }
        }
    }
    Ok(code)
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Run { config, out } => run_batch(&config, out.as_deref()),
        Command::Simulate(common) => {
            let (sc, dir) = load(&common)?;
            stage_simulate(&sc, &sc.background()?, &dir)?;
            println!("trajectories written to {}", dir.display());
            Ok(EXIT_PASS)
        }
        Command::Elliptic(common) => {
            let (sc, dir) = load(&common)?;
            for sol in stage_elliptic(&sc, &sc.background()?, &dir)? {
                println!(
                    "{:?}: residual {:.3e}, decay exponent {:.6}, {} Newton iterations",
                    sol.equation_tag, sol.residual_sup, sol.decay_exponent, sol.newton_iters
                );
            }
            Ok(EXIT_PASS)
        }
        Command::Yamabe(common) => {
            let (sc, dir) = load(&common)?;
            let record = stage_yamabe(&sc, &sc.background()?, &dir)?;
            let summary = json!({"sign": record.sign, "lower": record.lower, "upper": record.upper});
            println!("{summary:#}");
            Ok(EXIT_PASS)
        }
        Command::Verify(common) => {
            let (sc, dir) = load(&common)?;
            let verdicts = stage_verify(&sc, &sc.background()?, &dir)?;
            let outcome = Outcome { dir, verdicts };
            print_verdicts(&outcome);
            Ok(outcome.exit_code())
        }
        Command::Report(common) => {
            let (_, dir) = load(&common)?;
            let report = emit_report(&dir)?;
            println!("{}", dir.join("report.json").display());
            Ok(if report.all_passed { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    // Usage errors share the config-error status rather than clap's default 2,
    // which would read as a solver failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_subcommand_takes_config_and_out() {
        for sub in ["simulate", "elliptic", "yamabe", "verify", "report", "run"] {
            let cli = Cli::try_parse_from(["yamabe-lab", sub, "--config", "a.json", "--out", "o"]);
            assert!(cli.is_ok(), "{sub}");
        }
        assert!(Cli::try_parse_from(["yamabe-lab", "simulate"]).is_err());
    }

    #[test]
    fn missing_config_file_is_config_error() {
        let cli = Cli::try_parse_from(["yamabe-lab", "verify", "--config", "/nonexistent/scenario.json"]).unwrap();
        let failure = dispatch(cli).expect_err("must fail");
        assert_eq!(failure.code, EXIT_CONFIG);
        assert!(format!("{:#}", failure.error).contains("/nonexistent/scenario.json"));
    }
}
