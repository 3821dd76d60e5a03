use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use colombeau_cli::runner::{self, CommandKind, Overrides};

/// Growth classification and integral-operator checks for ε-parameterized
/// function nets.
#[derive(Parser)]
#[command(name = "colombeau", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a net's growth in ε against a chosen seminorm scale.
    Classify(CommonArgs),
    /// Verify the operator composition identity and probe kernel growth.
    Compose(CommonArgs),
    /// Apply a truncated operator exponential at chosen points.
    Expmap(CommonArgs),
    /// Check Hermite coefficient decay, weight-sequence conditions, and
    /// regularization bounds.
    Hermite(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON).
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
    /// Output directory for report.json and CSV series.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Override the Gauss–Hermite node count for operator quadrature.
    #[arg(long, value_name = "N")]
    nodes: Option<usize>,
    /// Replace the scenario grid with 2^-1 ... 2^-K.
    #[arg(long, value_name = "K")]
    eps_levels: Option<usize>,
    /// Override the scenario tolerance.
    #[arg(long, value_name = "T")]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Classify(a) => (CommandKind::Classify, a),
        Command::Compose(a) => (CommandKind::Compose, a),
        Command::Expmap(a) => (CommandKind::Expmap, a),
        Command::Hermite(a) => (CommandKind::Hermite, a),
    };
    let overrides = Overrides {
        nodes: args.nodes,
        eps_levels: args.eps_levels,
        tol: args.tol,
    };
    match runner::run(kind, &args.scenario, &args.out, &overrides) {
        Ok(pass) => {
            let verdict = if pass { "pass" } else { "fail" };
            println!(
                "{}: {verdict} (report in {})",
                kind.name(),
                args.out.display()
            );
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
